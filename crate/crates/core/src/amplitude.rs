//! Amplitude families `f : Z_q^m -> C` with unit 2-norm, their Fourier duals, and
//! target sets `T` used by the ISIS side of the reductions.
//!
//! Convention: `omega = exp(2 pi i / q)`, the forward transform is
//! `fhat(x) = q^{-m/2} sum_y omega^{x.y} f(y)` and the inverse uses `omega^{-x.y}`.
//! Dense tables are flattened mixed-radix with coordinate 0 most significant.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::caps::dense_points;
use crate::error::{Error, Result};
use crate::modq::lift_residue;

pub type C64 = Complex64;

pub const NORM_TOL: f64 = 1e-9;

/// Direction of a discrete Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn inverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

/// `omega^k` for `k = 0..q`, with the sign of the exponent set by `dir`.
pub fn twiddles(q: u32, dir: Direction) -> Vec<C64> {
    let sign = match dir {
        Direction::Forward => 1.0,
        Direction::Inverse => -1.0,
    };
    (0..q)
        .map(|k| C64::from_polar(1.0, sign * 2.0 * PI * k as f64 / q as f64))
        .collect()
}

/// Applies the unitary q-point DFT along one axis of a flat array laid out as
/// `outer x q x inner`. Only the first `q` values of every axis fiber are touched,
/// so callers can carry extra (untransformed) slots by widening `radix`.
pub(crate) fn dft_axis(data: &mut [C64], outer: usize, radix: usize, inner: usize, q: u32, w: &[C64]) {
    let qs = q as usize;
    let scale = 1.0 / (q as f64).sqrt();
    let mut buf = vec![C64::new(0.0, 0.0); qs];
    let mut out = vec![C64::new(0.0, 0.0); qs];
    for o in 0..outer {
        let base = o * radix * inner;
        for i in 0..inner {
            for (y, b) in buf.iter_mut().enumerate() {
                *b = data[base + y * inner + i];
            }
            for (x, ov) in out.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (y, b) in buf.iter().enumerate() {
                    acc += w[(x * y) % qs] * b;
                }
                *ov = acc * scale;
            }
            for (x, ov) in out.iter().enumerate() {
                data[base + x * inner + i] = *ov;
            }
        }
    }
}

/// Applies the per-coordinate DFT to every axis of a dense `q^m` table.
pub(crate) fn dft_all_axes(data: &mut [C64], q: u32, m: usize, dir: Direction) {
    let w = twiddles(q, dir);
    let qs = q as usize;
    for axis in 0..m {
        let inner = qs.pow((m - 1 - axis) as u32);
        let outer = qs.pow(axis as u32);
        dft_axis(data, outer, qs, inner, q, &w);
    }
}

fn dft_1d(values: &[C64], q: u32, dir: Direction) -> Vec<C64> {
    let mut v = values.to_vec();
    dft_axis(&mut v, 1, q as usize, 1, q, &twiddles(q, dir));
    v
}

fn norm_sqr(values: &[C64]) -> f64 {
    values.iter().map(|c| c.norm_sqr()).sum()
}

/// Storage form of an amplitude table.
#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeForm {
    Dense(Vec<C64>),
    /// One length-q table per coordinate; `f(e) = prod_j t_j(e_j)`.
    Product(Vec<Vec<C64>>),
}

/// Normalized amplitude assignment over `Z_q^m`.
#[derive(Debug, Clone)]
pub struct AmplitudeTable {
    q: u32,
    m: usize,
    form: AmplitudeForm,
    dual: OnceLock<Box<AmplitudeTable>>,
}

impl PartialEq for AmplitudeTable {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.m == other.m && self.form == other.form
    }
}

impl AmplitudeTable {
    pub fn dense(q: u32, m: usize, values: Vec<C64>) -> Result<Self> {
        let points = dense_points(q, m)?;
        if values.len() != points {
            return Err(Error::Dimension(format!(
                "dense table over Z_{q}^{m} needs {points} values, got {}",
                values.len()
            )));
        }
        let ns = norm_sqr(&values);
        if (ns - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(ns));
        }
        Ok(Self::raw(q, m, AmplitudeForm::Dense(values)))
    }

    /// Product form. Each coordinate table must itself be normalized.
    pub fn product(q: u32, tables: Vec<Vec<C64>>) -> Result<Self> {
        if q < 2 {
            return Err(Error::Modulus(format!("modulus {q}")));
        }
        for t in &tables {
            if t.len() != q as usize {
                return Err(Error::Dimension(format!(
                    "coordinate table of length {} over Z_{q}",
                    t.len()
                )));
            }
            let ns = norm_sqr(t);
            if (ns - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized(ns));
            }
        }
        let m = tables.len();
        Ok(Self::raw(q, m, AmplitudeForm::Product(tables)))
    }

    fn raw(q: u32, m: usize, form: AmplitudeForm) -> Self {
        Self {
            q,
            m,
            form,
            dual: OnceLock::new(),
        }
    }

    /// Same table repeated on every coordinate.
    pub fn product_power(q: u32, m: usize, table: Vec<C64>) -> Result<Self> {
        Self::product(q, vec![table; m])
    }

    pub fn delta(q: u32, m: usize) -> Result<Self> {
        let mut t = vec![C64::new(0.0, 0.0); q as usize];
        t[0] = C64::new(1.0, 0.0);
        Self::product_power(q, m, t)
    }

    pub fn uniform(q: u32, m: usize) -> Result<Self> {
        let a = 1.0 / (q as f64).sqrt();
        Self::product_power(q, m, vec![C64::new(a, 0.0); q as usize])
    }

    /// Random dense table with independent complex Gaussian entries, normalized.
    pub fn random_dense<R: Rng + ?Sized>(q: u32, m: usize, rng: &mut R) -> Result<Self> {
        let points = dense_points(q, m)?;
        let mut values: Vec<C64> = (0..points)
            .map(|_| {
                // Box-Muller
                let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.random();
                C64::from_polar((-2.0 * u1.ln()).sqrt(), 2.0 * PI * u2)
            })
            .collect();
        let n = norm_sqr(&values).sqrt();
        for v in values.iter_mut() {
            *v /= n;
        }
        Self::dense(q, m, values)
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn form(&self) -> &AmplitudeForm {
        &self.form
    }

    pub fn is_product(&self) -> bool {
        matches!(self.form, AmplitudeForm::Product(_))
    }

    /// Value at a point given as residues.
    pub fn value_at(&self, point: &[u32]) -> C64 {
        debug_assert_eq!(point.len(), self.m);
        match &self.form {
            AmplitudeForm::Dense(v) => v[point_index(self.q, point)],
            AmplitudeForm::Product(ts) => ts
                .iter()
                .zip(point)
                .fold(C64::new(1.0, 0.0), |acc, (t, &p)| acc * t[p as usize]),
        }
    }

    /// Value at a flat mixed-radix index.
    pub fn value_at_index(&self, index: usize) -> C64 {
        match &self.form {
            AmplitudeForm::Dense(v) => v[index],
            AmplitudeForm::Product(ts) => {
                let q = self.q as usize;
                let mut rest = index;
                let mut acc = C64::new(1.0, 0.0);
                for t in ts.iter().rev() {
                    acc *= t[rest % q];
                    rest /= q;
                }
                acc
            }
        }
    }

    /// Expands to the flat dense vector (subject to the dense cap).
    pub fn to_dense_vec(&self) -> Result<Vec<C64>> {
        let points = dense_points(self.q, self.m)?;
        match &self.form {
            AmplitudeForm::Dense(v) => Ok(v.clone()),
            AmplitudeForm::Product(ts) => {
                let mut out = vec![C64::new(1.0, 0.0)];
                out.reserve(points);
                for t in ts {
                    out = out
                        .iter()
                        .flat_map(|&a| t.iter().map(move |&b| a * b))
                        .collect();
                }
                Ok(out)
            }
        }
    }

    pub fn to_dense(&self) -> Result<Self> {
        Ok(Self::raw(self.q, self.m, AmplitudeForm::Dense(self.to_dense_vec()?)))
    }

    pub fn norm_sqr(&self) -> f64 {
        match &self.form {
            AmplitudeForm::Dense(v) => norm_sqr(v),
            AmplitudeForm::Product(ts) => ts.iter().map(|t| norm_sqr(t)).product(),
        }
    }

    fn transform(&self, dir: Direction) -> Self {
        let form = match &self.form {
            AmplitudeForm::Product(ts) => {
                AmplitudeForm::Product(ts.iter().map(|t| dft_1d(t, self.q, dir)).collect())
            }
            AmplitudeForm::Dense(v) => {
                let mut d = v.clone();
                dft_all_axes(&mut d, self.q, self.m, dir);
                AmplitudeForm::Dense(d)
            }
        };
        Self::raw(self.q, self.m, form)
    }

    /// Forward transform `fhat`. Computed afresh; see [`AmplitudeTable::dual`] for the cached copy.
    pub fn fourier(&self) -> Self {
        self.transform(Direction::Forward)
    }

    pub fn inverse_fourier(&self) -> Self {
        self.transform(Direction::Inverse)
    }

    /// Cached forward transform.
    pub fn dual(&self) -> &AmplitudeTable {
        self.dual.get_or_init(|| Box::new(self.fourier()))
    }

    /// Builds `f` from its dual; the dual is cached exactly as given.
    pub fn from_dual(fhat: AmplitudeTable) -> Self {
        let f = fhat.inverse_fourier();
        let _ = f.dual.set(Box::new(fhat));
        f
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.q != other.q || self.m != other.m {
            return Err(Error::Dimension("tables over different spaces".into()));
        }
        let a = self.to_dense_vec()?;
        let b = other.to_dense_vec()?;
        Ok(a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }
}

/// Flat index of a point, coordinate 0 most significant.
pub fn point_index(q: u32, point: &[u32]) -> usize {
    point
        .iter()
        .fold(0usize, |acc, &d| acc * q as usize + d as usize)
}

/// Inverse of [`point_index`].
pub fn index_point(q: u32, m: usize, mut index: usize) -> Vec<u32> {
    let mut out = vec![0u32; m];
    for d in out.iter_mut().rev() {
        *d = (index % q as usize) as u32;
        index /= q as usize;
    }
    out
}

/// Subset `T` of `Z_q^m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetSet {
    /// `Z_2^m` embedded as residues 0/1.
    Binary,
    /// Canonical-lift infinity norm at most `bound`.
    Linf { bound: u64 },
    Explicit { elements: Vec<Vec<u32>> },
}

impl TargetSet {
    pub fn explicit(elements: Vec<Vec<u32>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &elements {
            if !seen.insert(e.clone()) {
                return Err(Error::DuplicateElement);
            }
        }
        Ok(TargetSet::Explicit { elements })
    }

    /// Checks that the set is well formed over `Z_q^m` and nonempty.
    pub fn validate(&self, q: u32, m: usize) -> Result<()> {
        if let TargetSet::Explicit { elements } = self {
            let mut seen = BTreeSet::new();
            for e in elements {
                if e.len() != m {
                    return Err(Error::Dimension(format!(
                        "target element of length {} in Z_q^{m}",
                        e.len()
                    )));
                }
                if let Some(&bad) = e.iter().find(|&&v| v >= q) {
                    return Err(Error::EntryOutOfRange {
                        value: bad as i64,
                        modulus: q,
                    });
                }
                if !seen.insert(e) {
                    return Err(Error::DuplicateElement);
                }
            }
            if elements.is_empty() {
                return Err(Error::EmptyTarget);
            }
        }
        Ok(())
    }

    pub fn contains(&self, q: u32, point: &[u32]) -> bool {
        match self {
            TargetSet::Binary => point.iter().all(|&v| v <= 1),
            TargetSet::Linf { bound } => point
                .iter()
                .all(|&v| lift_residue(v, q).unsigned_abs() <= *bound),
            TargetSet::Explicit { elements } => elements.iter().any(|e| e == point),
        }
    }

    /// Per-coordinate membership mask when the set is a product of identical
    /// coordinate sets.
    pub fn coordinate_mask(&self, q: u32) -> Option<Vec<bool>> {
        match self {
            TargetSet::Explicit { .. } => None,
            _ => Some((0..q).map(|v| self.contains(q, &[v])).collect()),
        }
    }

    /// `|T cap Z_q^m|`.
    pub fn size(&self, q: u32, m: usize) -> u128 {
        match self {
            TargetSet::Explicit { elements } => elements.len() as u128,
            _ => {
                let per = self
                    .coordinate_mask(q)
                    .map_or(0, |mk| mk.iter().filter(|&&b| b).count());
                crate::caps::pow_u128(per as u64, m)
            }
        }
    }
}

/// `1 - eta = sum_{x in T} |fhat(x)|^2`.
pub fn mass_on(fhat: &AmplitudeTable, t: &TargetSet) -> Result<f64> {
    t.validate(fhat.q, fhat.m)?;
    let q = fhat.q;
    match (&fhat.form, t) {
        (_, TargetSet::Explicit { elements }) => Ok(elements
            .iter()
            .map(|e| fhat.value_at(e).norm_sqr())
            .sum()),
        (AmplitudeForm::Product(ts), _) => {
            let mask = t.coordinate_mask(q).expect("structured set");
            Ok(ts
                .iter()
                .map(|tab| {
                    tab.iter()
                        .zip(&mask)
                        .filter(|(_, &b)| b)
                        .map(|(c, _)| c.norm_sqr())
                        .sum::<f64>()
                })
                .product())
        }
        (AmplitudeForm::Dense(v), _) => Ok(v
            .iter()
            .enumerate()
            .filter(|(i, _)| t.contains(q, &index_point(q, fhat.m, *i)))
            .map(|(_, c)| c.norm_sqr())
            .sum()),
    }
}

/// `f` whose dual is `1_T / sqrt|T|` exactly.
pub fn indicator_fourier_family(t: &TargetSet, q: u32, m: usize) -> Result<AmplitudeTable> {
    t.validate(q, m)?;
    let size = t.size(q, m);
    if size == 0 {
        return Err(Error::EmptyTarget);
    }
    let fhat = match t {
        TargetSet::Explicit { elements } => {
            let points = dense_points(q, m)?;
            let a = 1.0 / (size as f64).sqrt();
            let mut v = vec![C64::new(0.0, 0.0); points];
            for e in elements {
                v[point_index(q, e)] = C64::new(a, 0.0);
            }
            AmplitudeTable::dense(q, m, v)?
        }
        _ => {
            let mask = t.coordinate_mask(q).expect("structured set");
            let count = mask.iter().filter(|&&b| b).count();
            let a = 1.0 / (count as f64).sqrt();
            let tab = mask
                .iter()
                .map(|&b| C64::new(if b { a } else { 0.0 }, 0.0))
                .collect();
            AmplitudeTable::product_power(q, m, tab)?
        }
    };
    Ok(AmplitudeTable::from_dual(fhat))
}

const GAUSS_TRUNC: f64 = 1e-15;
const GAUSS_MAX_WRAPS: i64 = 10_000_000;

/// Wrapped Gaussian mass `sum_k exp(-pi (x + k q)^2 / sigma^2)` at a canonical lift `x`.
fn wrapped_gaussian_mass(x: i64, q: u32, sigma: f64) -> f64 {
    let term = |k: i64| {
        let d = (x + k * q as i64) as f64;
        (-PI * d * d / (sigma * sigma)).exp()
    };
    let mut total = term(0);
    let mut k = 1;
    while k <= GAUSS_MAX_WRAPS {
        let a = term(k);
        let b = term(-k);
        total += a + b;
        if a < GAUSS_TRUNC && b < GAUSS_TRUNC {
            break;
        }
        k += 1;
    }
    total
}

/// Product-form discrete Gaussian: per-coordinate amplitude `sqrt(chi_sigma(x))`, normalized.
pub fn gaussian_family(sigma: f64, q: u32, m: usize) -> Result<AmplitudeTable> {
    if sigma.is_nan() || sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::OutOfRange(format!("sigma = {sigma}")));
    }
    let masses: Vec<f64> = (0..q)
        .map(|v| wrapped_gaussian_mass(lift_residue(v, q), q, sigma))
        .collect();
    let total: f64 = masses.iter().sum();
    let tab = masses
        .iter()
        .map(|&p| C64::new((p / total).sqrt(), 0.0))
        .collect();
    AmplitudeTable::product_power(q, m, tab)
}

/// JSON descriptor of an amplitude family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Delta,
    Uniform,
    IndicatorFourier {
        #[serde(rename = "T")]
        t: TargetSet,
    },
    Gaussian {
        sigma: f64,
    },
    Dense {
        re: Vec<f64>,
        im: Vec<f64>,
    },
}

impl FamilySpec {
    pub fn build(&self, q: u32, m: usize) -> Result<AmplitudeTable> {
        match self {
            FamilySpec::Delta => AmplitudeTable::delta(q, m),
            FamilySpec::Uniform => AmplitudeTable::uniform(q, m),
            FamilySpec::IndicatorFourier { t } => indicator_fourier_family(t, q, m),
            FamilySpec::Gaussian { sigma } => gaussian_family(*sigma, q, m),
            FamilySpec::Dense { re, im } => {
                if re.len() != im.len() {
                    return Err(Error::Malformed("re and im differ in length".into()));
                }
                let v = re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect();
                AmplitudeTable::dense(q, m, v)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }
}
