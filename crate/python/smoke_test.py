"""Smoke test for the rdl extension module.

Build and import, e.g.:
    maturin develop -m crates/python/Cargo.toml --features extension-module
    python python/smoke_test.py
"""

import math

import rdl


def main():
    inst = rdl.Instance.random(2, 1, 3, 7)
    assert inst.q == 2 and inst.n == 1 and inst.m == 3
    assert rdl.Instance.from_json(inst.to_json()).digest() == inst.digest()

    ctx = rdl.LatticeContext(inst, '{"kind":"uniform"}')
    assert abs(sum(ctx.weights()) / len(ctx.weights()) - 2.0) < 1e-9
    assert abs(ctx.pmax() - ctx.pgm_success_direct()) < 1e-9
    ids = ctx.identities()
    assert max(ids.values()) < 1e-9, ids

    gauss = rdl.LatticeContext(inst, '{"kind":"gaussian","sigma":0.8}')
    fwd = gauss.forward('{"kind":"binary"}', "symmetrized-biased")
    assert all(c["passed"] for c in fwd["checks"]), fwd["checks"]
    assert abs(fwd["p"] - 0.5) < 1e-9
    rev = gauss.reverse_perfect()
    assert abs(rev["mean_success"] - gauss.pmax()) < 1e-9

    assert abs(rdl.forward_bound(0.5, 0.1) - (0.45 - 2 * math.sqrt(0.025))) < 1e-12
    assert abs(rdl.reverse_bound(0.2, 0.0) - 0.64) < 1e-12

    assert rdl.tape_length(1, 1) == 2
    kind, x = rdl.solve(inst, 1, "4")
    if kind == "solution":
        assert rdl.recover(inst, 1, x) == "4"

    e2e = rdl.end_to_end(1, 1, seed=1)
    assert abs(e2e["mean_success"] - 1.0) < 1e-9

    try:
        rdl.Instance.from_json('{"q":2,"n":1,"m":2,"A":[[3,0]]}')
    except rdl.RdlError as e:
        assert "E_ENTRY_RANGE" in str(e)
    else:
        raise AssertionError("out-of-range entry accepted")

    print("rdl smoke test passed")


if __name__ == "__main__":
    main()
