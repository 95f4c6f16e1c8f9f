"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``.  The full set takes
several minutes on one core (criterion 6 colours 100 random matroids on about
2000 points, and criterion 12 repeats every randomized run with 8 workers).
"""

from __future__ import annotations

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from pgdecomp.colouring import colouring_number, full_geometry_colouring, verify_colouring
from pgdecomp.decomp import (
    counting_bound_report,
    find_violating_partial_transversal,
    naive_transversal_oracle,
    search_decomposition,
    threshold_n0,
    verify_decomposition,
)
from pgdecomp.matroid import edmonds_bruteforce, restrict
from pgdecomp.projgeom import enumerate_flats, geometry, qbinom
from pgdecomp.randmodel import (
    TrialConfig,
    run_census_experiment,
    run_colouring_experiment,
    run_rank_experiment,
    run_size_experiment,
)

SEED = 20261017

pytestmark = pytest.mark.slow

# criterion number -> (runner, config, runner kwargs)
RANDOMIZED = {
    4: (run_size_experiment, TrialConfig(n=12, q=2, p=0.5, delta=0.05, trials=500, seed=SEED), {}),
    5: (run_rank_experiment, TrialConfig(n=10, q=2, p=0.3, trials=500, seed=SEED), {}),
    6: (run_colouring_experiment, TrialConfig(n=12, q=2, p=0.5, delta=0.1, trials=100, seed=SEED), {}),
    7: (run_census_experiment, TrialConfig(n=10, q=2, p=0.5, d=3, trials=20, seed=SEED), {"claim1": False}),
    8: (run_census_experiment, TrialConfig(n=10, q=2, p=1.0, d=3, b=1, trials=20, seed=SEED), {"claim1": True}),
}

_runs: dict[tuple[int, int], tuple[object, float]] = {}


def run(criterion: int, workers: int = 1):
    """Result and wall time of a randomized criterion, cached per worker count."""
    key = (criterion, workers)
    if key not in _runs:
        runner, cfg, kw = RANDOMIZED[criterion]
        t = time.perf_counter()
        res = runner(cfg, workers=workers, **kw)
        _runs[key] = (res, time.perf_counter() - t)
    return _runs[key]


def serialise(res) -> bytes:
    return (json.dumps(res.to_dict(), sort_keys=True) + "\n" + res.csv()).encode()


def qbinom_product(n, d, q):
    num = den = 1
    for i in range(d):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def test_criterion_01_qbinom(acceptance):
    t = time.perf_counter()
    bad = []
    for q in (2, 3, 4, 5, 7, 8, 9):
        for n in range(31):
            for d in range(n + 1):
                v = qbinom(n, d, q)
                if v != qbinom_product(n, d, q) or not q ** (d * (n - d)) <= v <= q ** (d * (n - d + 1)):
                    bad.append(("qbinom", n, d, q))
    for q, nmax, dmax in ((2, 8, 4), (3, 5, 3)):
        for n in range(1, nmax + 1):
            ctx = geometry(n, q)
            for d in range(min(n, dmax) + 1):
                if sum(1 for _ in enumerate_flats(ctx, d)) != qbinom(n, d, q):
                    bad.append(("flats", n, d, q))
    dt = time.perf_counter() - t
    assert acceptance(1, not bad and dt < 60, f"q-binomials and flat counts, {len(bad)} mismatches, {dt:.1f}s")


def test_criterion_02_edmonds_agreement(acceptance):
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    mismatches = bad_witness = 0
    for n, q in ((5, 2), (4, 3)):
        ctx = geometry(n, q)
        for _ in range(100):
            p = rng.uniform(0.05, 1.0)
            S = np.flatnonzero(rng.random(ctx.size) < p).tolist() or [int(rng.integers(ctx.size))]
            M = restrict(ctx, S)
            k, col = colouring_number(M)
            mismatches += k != edmonds_bruteforce(M)
            bad_witness += not verify_colouring(M, col)
    dt = time.perf_counter() - t
    ok = mismatches == 0 and bad_witness == 0 and dt < 120
    assert acceptance(2, ok, f"200 instances, {mismatches} mismatches, {bad_witness} bad witnesses, {dt:.1f}s")


def test_criterion_03_full_geometries(acceptance):
    t = time.perf_counter()
    got = [full_geometry_colouring(n, 2)[0] for n in range(3, 11)]
    dt = time.perf_counter() - t
    want = [3, 4, 7, 11, 19, 32, 57, 103]
    assert want == [math.ceil((2 ** n - 1) / n) for n in range(3, 11)]
    assert acceptance(3, got == want and dt < 60, f"col(PG(n-1,2)) n=3..10 = {got}, {dt:.1f}s")


def test_criterion_04_size(acceptance):
    res, dt = run(4)
    f = res.fraction
    assert acceptance(4, f >= 0.99, f"|E_p| in band in {f:.3f} of 500 trials, {dt:.1f}s")


def test_criterion_05_rank(acceptance):
    res, dt = run(5)
    f, lb = res.fraction, res.summary["union_bound_log10"]
    ok = f == 1.0 and lb < -70
    assert acceptance(5, ok, f"full rank in {f:.3f} of 500 trials, union bound 10^{lb:.1f}, {dt:.1f}s")


def test_criterion_06_colouring(acceptance):
    res, dt = run(6)
    f = res.fraction
    centre = res.summary["centre"]
    ok = f >= 0.95 and abs(centre - 170.67) < 0.01 and dt < 600
    assert acceptance(6, ok, f"col(E_p) in band around {centre:.2f} in {f:.2f} of 100 trials, {dt:.1f}s")


def test_criterion_07_census(acceptance):
    res, dt = run(7)
    s = res.summary
    hits = s["in_band_count"]
    surv = s["survival_disjoint"]
    ok = (hits >= 18 and surv["within_3_sigma"] and s["survival_exact_fraction"] == "23/32"
          and Fraction(23, 32) == Fraction(92, 128) and dt < 600)
    z = (surv["frequency"] - s["survival_exact"]) / surv["sigma"]
    assert acceptance(7, ok, f"|Z_d| >= qbinom(10,3,2)/2 in {hits}/20 trials; survival {surv['frequency']:.5f} "
                             f"vs 0.71875 over {surv['samples']} disjoint flats (z={z:+.2f}); "
                             f"census mean {s['survival_census']['frequency']:.5f}, {dt:.1f}s")


def test_criterion_08_claim1(acceptance):
    res, dt = run(8)
    s = res.summary
    dense = sum(r["claim1"]["dense_count"] for r in s["per_trial"])
    ok = s["claim1_threshold_condition"] and s["claim1_exceptions"] == 0 and dense > 0
    assert acceptance(8, ok, f"{dense} dense flats over 20 trials, {s['claim1_exceptions']} with col <= b, {dt:.1f}s")


def test_criterion_09_reduction(acceptance):
    t = time.perf_counter()
    ctx = geometry(4, 2)
    rng = np.random.default_rng(SEED)
    disagree = 0
    for _ in range(100):
        ell = int(rng.integers(1, 7))
        sizes = rng.integers(1, 4, size=ell)
        pts = rng.choice(ctx.size, size=int(sizes.sum()), replace=False).tolist()
        classes = np.split(np.array(pts), np.cumsum(sizes)[:-1])
        classes = [c.tolist() for c in classes]
        M = restrict(ctx, pts)
        b = int(rng.integers(1, 3))
        w = find_violating_partial_transversal(M, classes, b)
        disagree += (w is None) != naive_transversal_oracle(M, classes, b)
    dt = time.perf_counter() - t
    assert acceptance(9, disagree == 0 and dt < 60, f"100 instances, {disagree} disagreements, {dt:.1f}s")


def test_criterion_10_worked(acceptance):
    fano = restrict(geometry(3, 2), range(7))
    v = verify_decomposition(fano, [[i] for i in range(7)], 2, 1)
    dec = search_decomposition(fano, 1, 2)
    ok = (v.outcome == "transversal_violation" and v.witness is not None and len(v.witness) == 7
          and dec is not None and verify_decomposition(fano, dec.classes, 1, 2).valid)
    assert acceptance(10, ok, f"singletons b=2: {v.outcome} |X|={len(v.witness or ())}; "
                              f"search b=1 c=2: {None if dec is None else [list(c) for c in dec.classes]}")


def test_criterion_11_bound_chain(acceptance):
    lemma5 = all(q ** (n * d - d * d) <= qbinom(n, d, q)
                 for q in (2, 3) for n in range(1, 31) for d in range(0, min(5, n) + 1))
    n0 = threshold_n0(2, 1, 1, 1, 0.1)
    rep = counting_bound_report(n0, 2, 1, 1, 1, 0.1).to_dict()
    regimes = rep["regimes"]
    complete = (set(regimes) == {"ell<=n", "ell<=bn"}
                and all(isinstance(s["holds"], bool) for e in regimes.values() for s in e["steps"])
                and "rescaled_steps" in regimes["ell<=bn"])
    summary = "; ".join(
        f"{k}: " + ", ".join(f"{s['name']} {'ok' if s['holds'] else 'FAILS'}" for s in e["steps"])
        for k, e in regimes.items())
    # b = 2 is where the regimes separate
    rep2 = counting_bound_report(threshold_n0(2, 1, 2, 1, 0.1), 2, 1, 2, 1, 0.1).to_dict()["regimes"]
    sep = rep2["ell<=n"]["steps"][0]["gap_log10"] - rep2["ell<=bn"]["steps"][0]["gap_log10"]
    ok = lemma5 and complete and rep["n"] == 1619
    assert acceptance(11, ok, f"q^(nd-d^2) <= qbinom for n<=30 d<=5 q in {{2,3}}: {lemma5}; n0={n0}, d={rep['d']}; "
                              f"{summary}; at b=2 the ell<=bn regime loses {sep:.3f} decades in the first link")


def test_criterion_12_determinism(acceptance):
    diffs = []
    for c in sorted(RANDOMIZED):
        a, _ = run(c, 1)
        b, _ = run(c, 8)
        if serialise(a) != serialise(b):
            diffs.append(c)
    assert acceptance(12, not diffs, f"criteria {sorted(RANDOMIZED)} at workers 1 vs 8: "
                                     f"{'identical' if not diffs else f'differ in {diffs}'}")
