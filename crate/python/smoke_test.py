"""Smoke test for the pairlab Python extension.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
(or `pip install crates/python --no-build-isolation`).
"""

import json
import math

import pairlab


def main() -> None:
    seq = pairlab.Sequence.generate("mono:2", 4)
    assert seq.values() == [1, 4, 9, 16], seq.values()
    assert len(seq) == 4

    r = pairlab.r2(seq, "0/1", s="1")
    assert r["count"] == 12 and r["value"] == 3.0, r

    e = pairlab.energy(pairlab.Sequence.from_set([3, 1, 2]))
    assert e["E"] == 19, e

    ap = pairlab.Sequence.generate("ap:1:1", 20)
    assert pairlab.energy(ap, "oracle")["E"] == (2 * 20**3 + 20) // 3

    sidon = pairlab.Sequence.from_set([1, 2, 5, 11])
    d = dict(pairlab.autocorrelation(sidon))
    assert all(v == 1 for v in d.values()) and len(d) == 6

    assert pairlab.distinct_gap_count(pairlab.Sequence.generate("mono:1", 1000), "random:3") <= 3

    assert math.isclose(pairlab.gcd_sum([2, 3]), 1 + 1 / math.sqrt(6), rel_tol=1e-12)
    assert math.isclose(pairlab.coefficient("1", 4, 1), 1 / math.pi, rel_tol=1e-12)
    parseval = pairlab.coefficient_pair_sum(1, 1, "1", 4)
    assert abs(parseval - 0.25) < 1e-12, parseval

    assert pairlab.dimension_bound(2.0, 1.0)["bound"] == 0.8

    grid = pairlab.grid_mean_check(pairlab.Sequence.generate("mono:2", 10))
    assert grid["pass"], grid

    lemma = pairlab.lemma6_check(pairlab.Sequence.random_subset(1024, 3, 1), 1024, 3)
    blow = pairlab.blowup_experiment(1024, 3, 1)
    assert blow["count_autocorrelation"] == blow["count_direct"], blow

    try:
        pairlab.Sequence.from_set([2, 2])
    except ValueError:
        pass
    else:
        raise AssertionError("duplicate set accepted")

    code, out, err = pairlab.cli(["energy", "--set", "1,2,3"])
    assert code == 0 and json.loads(out)["E"] == 19, (code, err)
    code, _, _ = pairlab.cli(["energy", "--set", "1,1"])
    assert code == 2

    print(f"pairlab {pairlab.__version__}: smoke test passed (random-set flatness all={lemma['pass_all']}, R2 at 1/q={blow['R2']:.3f})")


if __name__ == "__main__":
    main()
