"""Random restrictions PG_p(n-1, q) and the Monte Carlo experiments on them.

Every trial draws from its own stream ``trial_rng(seed, trial_index)``
(Philox keyed by a SeedSequence with the trial index as spawn key), so a
trial's outcome does not depend on which worker ran it or in what order.
Results are always aggregated in trial-index order.
"""

from __future__ import annotations

import functools
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .colouring import colouring_number
from .matroid import GuardError, SubMatroid, guard_limit, restrict
from .projgeom import (
    closure,
    flat_point_table,
    geometry,
    local_rank_table,
    qbinom,
    rank_vectors,
    trace_patterns,
)

__all__ = [
    "TrialConfig",
    "CensusResult",
    "Claim1Result",
    "BoundReport",
    "ExperimentResult",
    "trial_rng",
    "sample_pgp",
    "markov",
    "chernoff_upper",
    "chernoff_lower",
    "bound_report",
    "run_size_experiment",
    "run_rank_experiment",
    "run_colouring_experiment",
    "check_small_flat",
    "run_small_flat_experiment",
    "small_flat_failure_bound_log10",
    "dense_threshold",
    "dense_flat_census",
    "claim1_check",
    "run_census_experiment",
    "exact_survival_probability",
    "disjoint_flats",
]

LN10 = math.log(10)


@dataclass(frozen=True)
class TrialConfig:
    n: int
    q: int = 2
    p: float = 0.5
    delta: float = 0.1
    d: int = 3
    b: int = 1
    c: float = 1.0
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def trial_rng(seed: int, trial_index: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial_index, stream))
    return np.random.Generator(np.random.Philox(ss))


def sample_pgp(n: int, q: int, p: float, rng: np.random.Generator) -> SubMatroid:
    """Keep each point of PG(n-1, q) independently with probability p."""
    ctx = geometry(n, q)
    keep = rng.random(ctx.size) < p
    return restrict(ctx, np.flatnonzero(keep).tolist())


def _sample(cfg: TrialConfig, t: int) -> SubMatroid:
    return sample_pgp(cfg.n, cfg.q, cfg.p, trial_rng(cfg.seed, t))


# -- probability bounds --

def markov(mu: float, x: float) -> float:
    if x <= 0:
        raise ValueError("Markov bound needs x > 0")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return mu / x


def _check_chernoff(mu: float, delta: float) -> None:
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if not 0 <= delta <= 1:
        raise ValueError("Chernoff bounds need 0 <= delta <= 1")


def chernoff_upper(mu: float, delta: float) -> float:
    """Bound on P(X >= (1+delta) mu)."""
    _check_chernoff(mu, delta)
    return math.exp(-delta * delta * mu / 3)


def chernoff_lower(mu: float, delta: float) -> float:
    """Bound on P(X <= (1-delta) mu)."""
    _check_chernoff(mu, delta)
    return math.exp(-delta * delta * mu / 2)


@dataclass
class BoundReport:
    mu: float
    delta: float
    chernoff_upper: float | None
    chernoff_lower: float | None
    chernoff_upper_log10: float | None
    chernoff_lower_log10: float | None
    markov_x: float | None = None
    markov: float | None = None
    empirical_tail: float | None = None
    trials: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(mu: float, delta: float, x: float | None = None,
                 empirical_tail: float | None = None, trials: int | None = None) -> BoundReport:
    up = lo = up_l = lo_l = None
    if 0 <= delta <= 1:
        up, lo = chernoff_upper(mu, delta), chernoff_lower(mu, delta)
        up_l = -delta * delta * mu / 3 / LN10
        lo_l = -delta * delta * mu / 2 / LN10
    return BoundReport(mu, delta, up, lo, up_l, lo_l,
                       markov_x=x, markov=None if x is None else markov(mu, x),
                       empirical_tail=empirical_tail, trials=trials)


# -- trial plumbing --

def _map_trials(fn: Callable[[int], dict], trials: int, workers: int = 1) -> list[dict]:
    if workers <= 1 or trials == 1:
        return [fn(t) for t in range(trials)]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, range(trials), chunksize=max(1, trials // (4 * workers))))


@dataclass
class ExperimentResult:
    """Per-trial rows (trial_index, statistic, in_band) plus a summary."""

    name: str
    config: dict
    rows: list[dict]
    summary: dict

    @property
    def fraction(self) -> float:
        return self.summary["in_band_fraction"]

    def csv(self) -> str:
        lines = ["trial_index,statistic,in_band"]
        for r in self.rows:
            lines.append(f"{r['trial_index']},{_fmt(r['statistic'])},{int(bool(r['in_band']))}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"experiment": self.name, "config": self.config, "summary": self.summary}


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def _in_band(x: float, centre: float, delta: float) -> bool:
    return (1 - delta) * centre <= x <= (1 + delta) * centre


def _result(name: str, cfg: TrialConfig, rows: list[dict], **summary) -> ExperimentResult:
    hits = sum(1 for r in rows if r["in_band"])
    base = {"trials": len(rows), "in_band_count": hits, "in_band_fraction": hits / len(rows)}
    base.update(summary)
    return ExperimentResult(name, cfg.to_dict(), rows, base)


def _slack(f: float, trials: int) -> float:
    return 3 * math.sqrt(f * (1 - f) / trials)


# -- size of E_p --

def _size_trial(cfg: TrialConfig, t: int) -> dict:
    centre = cfg.p * (cfg.q ** cfg.n - 1) / (cfg.q - 1)
    size = len(_sample(cfg, t))
    return {"trial_index": t, "statistic": size, "in_band": _in_band(size, centre, cfg.delta)}


def run_size_experiment(cfg: TrialConfig, workers: int = 1) -> ExperimentResult:
    """Fraction of trials with |E_p| = (1 ± delta) p (q^n - 1)/(q - 1)."""
    n, q, p, delta = cfg.n, cfg.q, cfg.p, cfg.delta
    mu = p * (q ** n - 1) / (q - 1)
    rows = _map_trials(functools.partial(_size_trial, cfg), cfg.trials, workers)
    res = _result("lemma-size", cfg, rows, centre=mu,
                  centre_asymptotic=p * q ** n / (q - 1))
    rep = bound_report(mu, delta, empirical_tail=1 - res.fraction, trials=cfg.trials)
    res.summary["bounds"] = rep.to_dict()
    if rep.chernoff_upper is not None:
        predicted = min(1.0, rep.chernoff_upper + rep.chernoff_lower)
        res.summary["predicted_out_of_band"] = predicted
        res.summary["bound_consistent"] = predicted >= (1 - res.fraction) - _slack(1 - res.fraction, cfg.trials)
    return res


# -- rank of E_p --

def rank_union_bound_log10(n: int, q: int, p: float) -> float:
    """log10 of (q^n - 1)/(q - 1) * (1 - p)^(q^(n-1))."""
    if p >= 1:
        return float("-inf")
    return math.log10((q ** n - 1) // (q - 1)) + q ** (n - 1) * math.log10(1 - p)


def _rank_trial(cfg: TrialConfig, t: int) -> dict:
    M = _sample(cfg, t)
    r = M.rank
    return {"trial_index": t, "statistic": r, "in_band": r == cfg.n}


def run_rank_experiment(cfg: TrialConfig, workers: int = 1) -> ExperimentResult:
    rows = _map_trials(functools.partial(_rank_trial, cfg), cfg.trials, workers)
    log_b = rank_union_bound_log10(cfg.n, cfg.q, cfg.p)
    res = _result("lemma-rank", cfg, rows, union_bound_log10=log_b,
                  union_bound=10 ** log_b if log_b > -300 else 0.0)
    fail = 1 - res.fraction
    res.summary["bound_consistent"] = min(1.0, 10 ** min(log_b, 0)) >= fail - _slack(fail, cfg.trials)
    return res


# -- colouring number of E_p --

def _colour_trial(cfg: TrialConfig, t: int) -> dict:
    centre = cfg.p * cfg.q ** cfg.n / ((cfg.q - 1) * cfg.n)
    M = _sample(cfg, t)
    k = colouring_number(M)[0]
    return {"trial_index": t, "statistic": k, "in_band": _in_band(k, centre, cfg.delta)}


def small_flat_failure_bound_log10(n: int, q: int, p: float, delta: float) -> float:
    """log10 of the union bound on the small-flat property failing:

        sum over ranks t >= n - 2 log_q n of
            qbinom(n, t, q) * (q^t (1-p)^(q^(t-1)) + exp(-delta^2 p q^(t-1) / 3))
    """
    t0 = max(1, math.ceil(n - 2 * math.log(n, q))) if n > 1 else 1
    logs = []
    for t in range(t0, n + 1):
        lq = math.log10(qbinom(n, t, q))
        miss = (t * math.log10(q) + q ** (t - 1) * math.log10(1 - p)) if p < 1 else float("-inf")
        tail = -delta * delta * p * q ** (t - 1) / 3 / LN10
        logs.append(lq + _logsumexp10([miss, tail]))
    return _logsumexp10(logs)


def _logsumexp10(xs: list[float]) -> float:
    xs = [x for x in xs if x != float("-inf")]
    if not xs:
        return float("-inf")
    m = max(xs)
    return m + math.log10(sum(10 ** (x - m) for x in xs))


def run_colouring_experiment(cfg: TrialConfig, workers: int = 1) -> ExperimentResult:
    """Fraction of trials with col(E_p) = (1 ± delta) p q^n / ((q-1) n)."""
    n, q, p, delta = cfg.n, cfg.q, cfg.p, cfg.delta
    size = (q ** n - 1) // (q - 1)
    if size > guard_limit("MAX_COLOUR_POINTS"):
        raise GuardError(f"{size} points exceeds the colouring-experiment guard")
    centre = p * q ** n / ((q - 1) * n)
    rows = _map_trials(functools.partial(_colour_trial, cfg), cfg.trials, workers)
    res = _result("lemma-colouring", cfg, rows, centre=centre)
    # lower side: col >= |E_p| / n, so falling below the band needs |E_p| small
    mu = p * size
    lo_delta = 1 - (1 - delta) * p * q ** n / (q - 1) / mu
    lower_log = (-lo_delta ** 2 * mu / 2 / LN10) if 0 <= lo_delta <= 1 else 0.0
    upper_log = small_flat_failure_bound_log10(n, q, p, delta)
    total_log = _logsumexp10([lower_log, upper_log])
    fail = 1 - res.fraction
    res.summary.update({
        "lower_tail_bound_log10": lower_log,
        "small_flat_bound_log10": upper_log,
        "failure_bound_log10": total_log,
        "bound_consistent": min(1.0, 10 ** min(total_log, 0)) >= fail - _slack(fail, cfg.trials),
    })
    return res


# -- small-flat property --

def _max_points(r: int, q: int) -> int:
    return (q ** r - 1) // (q - 1)


def _flat_scan(M: SubMatroid, lam: float):
    """Yield (d, row index, count, rank of trace) for flats whose trace could
    violate |E ∩ F| <= lam * r(E ∩ F), in rank-then-table order."""
    ctx = M.ctx
    n, q = ctx.n, ctx.q
    rmin = np.zeros(ctx.size + 1, dtype=np.int64)
    r = 0
    for c in range(1, ctx.size + 1):
        while _max_points(r, q) < c:
            r += 1
        rmin[c] = r
    for d in range(1, n + 1):
        table = flat_point_table(ctx, d)
        counts = M.mask[table].sum(axis=1)
        # r(E ∩ F) >= rmin[count], so anything at or below lam * rmin is safe
        suspect = np.flatnonzero(counts > lam * rmin[counts])
        if not len(suspect):
            continue
        if table.shape[1] <= 16:
            ranks = local_rank_table(q, d)[trace_patterns(M.mask, table[suspect])]
        else:
            ranks = [rank_vectors(ctx.field, ctx.vectors(table[i][M.mask[table[i]]].tolist()), n)
                     for i in suspect]
        for i, cnt, rk in zip(suspect, counts[suspect], ranks):
            yield d, int(i), int(cnt), int(rk)


def check_small_flat(M: SubMatroid, p: float, delta: float):
    """Whether every flat F satisfies |E ∩ F| <= (1+delta) p q^n/((q-1)n) r(E ∩ F).

    Returns (holds, first violating Flat or None).
    """
    ctx = M.ctx
    n, q = ctx.n, ctx.q
    total = sum(qbinom(n, d, q) for d in range(1, n + 1))
    if total > guard_limit("MAX_FLATS"):
        raise GuardError(f"{total} flats exceeds the small-flat guard")
    lam = (1 + delta) * p * q ** n / ((q - 1) * n)
    for d, i, cnt, rk in _flat_scan(M, lam):
        if cnt > lam * rk:
            row = flat_point_table(ctx, d)[i]
            return False, closure(ctx, row[M.mask[row]].tolist())
    return True, None


def _small_flat_trial(cfg: TrialConfig, t: int) -> dict:
    M = _sample(cfg, t)
    holds, flat = check_small_flat(M, cfg.p, cfg.delta)
    return {"trial_index": t, "statistic": int(not holds), "in_band": holds,
            "violating_rank": None if flat is None else flat.rank}


def run_small_flat_experiment(cfg: TrialConfig, workers: int = 1) -> ExperimentResult:
    rows = _map_trials(functools.partial(_small_flat_trial, cfg), cfg.trials, workers)
    log_b = small_flat_failure_bound_log10(cfg.n, cfg.q, cfg.p, cfg.delta)
    res = _result("small-flat", cfg, rows, failure_bound_log10=log_b,
                  violation_ranks=[r["violating_rank"] for r in rows if r["violating_rank"]])
    fail = 1 - res.fraction
    res.summary["violation_frequency"] = fail
    res.summary["bound_consistent"] = min(1.0, 10 ** min(log_b, 0)) >= fail - _slack(fail, cfg.trials)
    return res


# -- dense flats --

def dense_threshold(q: int, d: int, p) -> Fraction:
    """(1/2) p (q^d - 1)/(q - 1), exactly."""
    pf = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    return Fraction(1, 2) * pf * Fraction(q ** d - 1, q - 1)


@dataclass
class CensusResult:
    n: int
    q: int
    d: int
    p: float
    total_flats: int
    threshold: float
    size_ok_count: int  # |E ∩ F| >= threshold
    full_rank_count: int  # r(E ∩ F) = d
    dense_count: int  # both: the dense rank-d flats of M
    target: float  # qbinom(n, d, q) / 2
    half_target_met: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _census_arrays(M: SubMatroid, d: int, p):
    ctx = M.ctx
    n, q = ctx.n, ctx.q
    if not 0 < d <= n:
        raise ValueError(f"need 0 < d <= n, got d={d}")
    total = qbinom(n, d, q)
    if total > guard_limit("MAX_CENSUS_FLATS"):
        raise GuardError(f"{total} rank-{d} flats exceeds the census guard")
    table = flat_point_table(ctx, d)
    patterns = trace_patterns(M.mask, table)
    m = table.shape[1]
    popcount = np.array([bin(x).count("1") for x in range(1 << m)], dtype=np.int64)
    counts = popcount[patterns]
    ranks = local_rank_table(q, d)[patterns]
    need = math.ceil(dense_threshold(q, d, p))
    size_ok = counts >= need
    full = ranks == d
    return table, patterns, counts, size_ok, full, total


def dense_flat_census(M: SubMatroid, d: int, p) -> CensusResult:
    """Count ambient rank-d flats that survive in M as dense rank-d flats."""
    _, _, _, size_ok, full, total = _census_arrays(M, d, p)
    dense = int(np.count_nonzero(size_ok & full))
    return CensusResult(
        n=M.ctx.n, q=M.ctx.q, d=d, p=float(p), total_flats=total,
        threshold=float(dense_threshold(M.ctx.q, d, p)),
        size_ok_count=int(np.count_nonzero(size_ok)),
        full_rank_count=int(np.count_nonzero(full)),
        dense_count=dense, target=total / 2, half_target_met=2 * dense >= total,
    )


@functools.lru_cache(maxsize=None)
def _local_colouring(q: int, d: int, pattern: int) -> int:
    loc = geometry(d, q)
    pts = [j for j in range(loc.size) if pattern >> j & 1]
    return colouring_number(restrict(loc, pts))[0]


@dataclass
class Claim1Result:
    dense_count: int
    threshold_condition: bool  # p (q^d - 1) / (2 (q-1) d) > b
    edmonds_bound_ok: int  # col >= ceil(|E ∩ F| / d) >= ceil(threshold / d)
    col_gt_b: int
    min_col: int | None
    exceptions: int  # dense flats with col <= b

    @property
    def all_gt_b(self) -> bool:
        return self.exceptions == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["all_gt_b"] = self.all_gt_b
        return out


def claim1_check(M: SubMatroid, d: int, b: int, p) -> Claim1Result:
    """Check col(M|F) > b on every dense rank-d flat F.

    M|F is isomorphic to the restriction of PG(d-1, q) to the trace pattern
    in the flat's own coordinates, so colouring numbers are computed once
    per distinct pattern.
    """
    q = M.ctx.q
    _, patterns, counts, size_ok, full, _ = _census_arrays(M, d, p)
    dense = size_ok & full
    thr = dense_threshold(q, d, p)
    present = np.flatnonzero(np.bincount(patterns[dense].astype(np.int64)))
    col = np.zeros(int(present.max()) + 1 if len(present) else 1, dtype=np.int64)
    for pat in present:
        col[pat] = _local_colouring(q, d, int(pat))
    dense_idx = np.flatnonzero(dense)
    cols = col[patterns[dense_idx].astype(np.int64)]
    cnts = counts[dense_idx]
    edmonds = (cols >= -(-cnts // d)) & (-(-cnts // d) >= math.ceil(thr / d))
    gt = int(np.count_nonzero(cols > b))
    return Claim1Result(
        dense_count=len(dense_idx),
        threshold_condition=thr / d > b,
        edmonds_bound_ok=int(np.count_nonzero(edmonds)),
        col_gt_b=gt,
        min_col=int(cols.min()) if len(cols) else None,
        exceptions=len(dense_idx) - gt,
    )


def exact_survival_probability(q: int, d: int, p) -> Fraction:
    """P(a fixed rank-d flat survives as a dense rank-d flat), by summing
    over all keep-patterns of its points."""
    pf = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    m = (q ** d - 1) // (q - 1)
    ranks = local_rank_table(q, d)
    need = math.ceil(dense_threshold(q, d, p))
    total = Fraction(0)
    for pat in range(1 << m):
        k = pat.bit_count()
        if k >= need and ranks[pat] == d:
            total += pf ** k * (1 - pf) ** (m - k)
    return total


@functools.lru_cache(maxsize=4)
def disjoint_flats(n: int, q: int, d: int) -> np.ndarray:
    """Row indices of a greedy family of pairwise point-disjoint rank-d flats.

    Survival events of disjoint flats are independent, which is what a
    binomial tolerance on the survival frequency needs.
    """
    table = flat_point_table(geometry(n, q), d)
    used = np.zeros(geometry(n, q).size, dtype=bool)
    chosen = []
    m = table.shape[1]
    for start in range(0, len(table), 1 << 16):
        block = table[start:start + (1 << 16)]
        for i in np.flatnonzero(~used[block].any(axis=1)):
            row = block[i]
            if not used[row].any():
                used[row] = True
                chosen.append(start + int(i))
        if used.size - used.sum() < m:
            break
    out = np.array(chosen, dtype=np.int64)
    out.setflags(write=False)
    return out


def _census_trial(cfg: TrialConfig, claim1: bool, t: int) -> dict:
    M = _sample(cfg, t)
    c = dense_flat_census(M, cfg.d, cfg.p)
    row = {"trial_index": t, "statistic": c.dense_count, "in_band": c.half_target_met,
           "size_ok": c.size_ok_count, "full_rank": c.full_rank_count}
    if claim1:
        row["claim1"] = claim1_check(M, cfg.d, cfg.b, cfg.p).to_dict()
    return row


def _survival_trial(cfg: TrialConfig, t: int) -> tuple[int, int]:
    M = _sample(cfg, t)
    ctx = M.ctx
    table = flat_point_table(ctx, cfg.d)[disjoint_flats(cfg.n, cfg.q, cfg.d)]
    pats = trace_patterns(M.mask, table)
    m = table.shape[1]
    counts = np.array([bin(x).count("1") for x in range(1 << m)])[pats]
    ranks = local_rank_table(cfg.q, cfg.d)[pats]
    ok = (counts >= math.ceil(dense_threshold(cfg.q, cfg.d, cfg.p))) & (ranks == cfg.d)
    return int(ok.sum()), len(ok)


def run_census_experiment(cfg: TrialConfig, workers: int = 1, claim1: bool = True,
                          survival_samples: int = 10_000) -> ExperimentResult:
    """Dense-flat census per trial, the dense-flat colouring check, and the
    per-flat survival frequency measured on disjoint flats."""
    ctx = geometry(cfg.n, cfg.q)
    flat_point_table(ctx, cfg.d)  # build before forking workers
    rows = _map_trials(functools.partial(_census_trial, cfg, claim1), cfg.trials, workers)
    total = qbinom(cfg.n, cfg.d, cfg.q)
    exact = exact_survival_probability(cfg.q, cfg.d, cfg.p)

    fam = disjoint_flats(cfg.n, cfg.q, cfg.d)
    survival_trials = max(cfg.trials, math.ceil(survival_samples / max(1, len(fam))))
    surv = _map_trials(functools.partial(_survival_trial, cfg), survival_trials, workers)
    hits = sum(h for h, _ in surv)
    samples = sum(s for _, s in surv)
    freq = hits / samples
    pe = float(exact)
    sigma = math.sqrt(pe * (1 - pe) / samples)

    pooled = [r["statistic"] / total for r in rows]
    pooled_mean = sum(pooled) / len(pooled)
    pooled_se = (math.sqrt(sum((x - pooled_mean) ** 2 for x in pooled) / (len(pooled) - 1) / len(pooled))
                 if len(pooled) > 1 else 0.0)

    summary = {
        "total_flats": total,
        "target": total / 2,
        "threshold": float(dense_threshold(cfg.q, cfg.d, cfg.p)),
        "survival_exact": pe,
        "survival_exact_fraction": f"{exact.numerator}/{exact.denominator}",
        "survival_disjoint": {"flats_per_trial": len(fam), "trials": survival_trials,
                              "samples": samples, "frequency": freq, "sigma": sigma,
                              "within_3_sigma": abs(freq - pe) <= 3 * sigma},
        "survival_census": {"frequency": pooled_mean, "standard_error": pooled_se},
        "per_trial": [{k: v for k, v in r.items() if k not in ("in_band",)} for r in rows],
    }
    # Markov on the number of non-surviving flats, mean (1 - pe) * total
    summary["markov_bound_half_target_fails"] = min(1.0, markov((1 - pe) * total, total / 2))
    if claim1:
        summary["claim1_exceptions"] = sum(r["claim1"]["exceptions"] for r in rows)
        summary["claim1_threshold_condition"] = rows[0]["claim1"]["threshold_condition"]
    res = _result("census", cfg, [{"trial_index": r["trial_index"], "statistic": r["statistic"],
                                   "in_band": r["in_band"]} for r in rows], **summary)
    fail = 1 - res.fraction
    res.summary["bound_consistent"] = summary["markov_bound_half_target_fails"] >= fail - _slack(fail, len(rows))
    return res
