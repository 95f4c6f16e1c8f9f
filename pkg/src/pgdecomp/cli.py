"""Command-line front end.

Exit codes: 0 success / property holds, 1 property violated, 2 usage or
guard error (including an exhausted search budget).

Every JSON artifact carries a ``run`` record (subcommand, parameters, tool
version).  ``pgdecomp replay ARTIFACT`` re-executes that record.  Worker
count and output paths are not part of the record: they never change the
results.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .colouring import colouring_number
from .decomp import (
    DEFAULT_BUDGET,
    BudgetExhausted,
    counting_bound_report,
    from_json_dict,
    search_decomposition,
    threshold_n0,
    to_json_dict,
    verify_decomposition,
)
from .gf import FieldError
from .matroid import GuardError, MatroidError, dump_matroid, load_matroid, restrict
from .projgeom import GeometryError, count_flats, enumerate_flats, flat_points, geometry, qbinom
from .randmodel import (
    TrialConfig,
    bound_report,
    run_census_experiment,
    run_colouring_experiment,
    run_rank_experiment,
    run_size_experiment,
    run_small_flat_experiment,
    sample_pgp,
    trial_rng,
)

_NOT_ECHOED = {"func", "command", "workers", "json", "csv", "plot_data", "out"}


def _run_record(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    return {"tool": "pgdecomp", "version": __version__, "subcommand": args.command, "params": params}


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit(args, payload: dict, experiment=None) -> None:
    doc = dict(payload)
    doc["run"] = _run_record(args)
    _write(getattr(args, "json", None), _dumps(doc))
    if experiment is not None:
        if getattr(args, "csv", None):
            _write(args.csv, experiment.csv())
        if getattr(args, "plot_data", None):
            lines = ["trial_index,statistic"] + [f"{r['trial_index']},{r['statistic']}" for r in experiment.rows]
            _write(args.plot_data, "\n".join(lines) + "\n")


def _matroid_from_args(args):
    if args.matroid:
        with open(args.matroid, encoding="utf-8") as fh:
            return load_matroid(fh.read())
    if args.n is None or args.q is None:
        raise MatroidError("--n and --q are required unless --matroid is given")
    ctx = geometry(args.n, args.q)
    if args.full:
        return restrict(ctx, range(ctx.size))
    if args.points is not None:
        pts = [int(t) for t in args.points.split(",") if t.strip()]
        return restrict(ctx, pts)
    raise MatroidError("choose one of --full, --points or --matroid")


def _cfg(args) -> TrialConfig:
    return TrialConfig(n=args.n, q=args.q, p=args.p, delta=args.delta, d=getattr(args, "d", 3),
                       b=getattr(args, "b", 1), c=getattr(args, "c", 1.0),
                       trials=args.trials, seed=args.seed)


# -- subcommands --

def cmd_points(args) -> int:
    ctx = geometry(args.n, args.q)
    _emit(args, {"n": args.n, "q": args.q, "count": ctx.size,
                 "points": [list(c) for c in ctx.coords]})
    return 0


def cmd_flats(args) -> int:
    ctx = geometry(args.n, args.q)
    out = {"n": args.n, "q": args.q, "d": args.d, "count": count_flats(args.n, args.d, args.q)}
    if args.list:
        flats = []
        for i, F in enumerate(enumerate_flats(ctx, args.d)):
            if i >= args.limit:
                break
            flats.append({"basis": [list(r) for r in F.basis], "points": flat_points(ctx, F)})
        out["flats"] = flats
    _emit(args, out)
    return 0


def cmd_qbinom(args) -> int:
    print(qbinom(args.n, args.d, args.q))
    return 0


def cmd_colour(args) -> int:
    M = _matroid_from_args(args)
    k, witness = colouring_number(M)
    payload = {"n": M.ctx.n, "q": M.ctx.q, "ground_size": len(M), "k": k,
               "witness": witness.as_lists()}
    if args.json in (None, "-"):
        print(f"k={k}")
    _emit(args, payload)
    return 0


def cmd_sample(args) -> int:
    M = sample_pgp(args.n, args.q, args.p, trial_rng(args.seed, args.trial))
    _write(args.out, dump_matroid(M))
    return 0


def _experiment(args, runner, **kw) -> int:
    res = runner(_cfg(args), workers=args.workers, **kw)
    _emit(args, res.to_dict(), experiment=res)
    if args.min_fraction is not None and res.fraction < args.min_fraction:
        return 1
    return 0


def cmd_lemma_size(args) -> int:
    return _experiment(args, run_size_experiment)


def cmd_lemma_rank(args) -> int:
    return _experiment(args, run_rank_experiment)


def cmd_lemma_colouring(args) -> int:
    return _experiment(args, run_colouring_experiment)


def cmd_small_flat(args) -> int:
    return _experiment(args, run_small_flat_experiment)


def cmd_census(args) -> int:
    return _experiment(args, run_census_experiment, claim1=False)


def cmd_claim1(args) -> int:
    res = run_census_experiment(_cfg(args), workers=args.workers, claim1=True)
    _emit(args, res.to_dict(), experiment=res)
    if res.summary["claim1_threshold_condition"] and res.summary["claim1_exceptions"]:
        return 1
    return 0


def cmd_verify_decomp(args) -> int:
    with open(args.infile, encoding="utf-8") as fh:
        doc = json.load(fh)
    M, classes, b, c = from_json_dict(doc)
    b = args.b if args.b is not None else b
    c = args.c if args.c is not None else c
    if b is None or c is None:
        raise MatroidError("b and c must be given in the file or on the command line")
    verdict = verify_decomposition(M, classes, int(b), c, budget=args.budget)
    _emit(args, {"outcome": verdict.outcome, "k": verdict.k, "class_index": verdict.class_index,
                 "witness": None if verdict.witness is None else list(verdict.witness),
                 "b": b, "c": c})
    return 0 if verdict.valid else 1


def cmd_search_decomp(args) -> int:
    M = _matroid_from_args(args)
    dec = search_decomposition(M, args.b, args.c, budget=args.budget)
    if dec is None:
        _emit(args, {"found": False, "n": M.ctx.n, "q": M.ctx.q, "b": args.b, "c": args.c})
        return 1
    doc = to_json_dict(M, dec.classes, args.b, args.c)
    doc.update({"found": True, "k": dec.k})
    _emit(args, doc)
    return 0


def cmd_threshold(args) -> int:
    print(threshold_n0(args.q, args.p, args.b, args.c, args.delta, args.log_base))
    return 0


def cmd_bound_chain(args) -> int:
    n = args.n if args.n is not None else threshold_n0(args.q, args.p, args.b, args.c, args.delta, args.log_base)
    rep = counting_bound_report(n, args.q, args.p, args.b, args.c, args.delta, args.log_base)
    _emit(args, rep.to_dict())
    return 0 if rep.regimes["ell<=n"]["chain_holds"] else 1


def cmd_bounds(args) -> int:
    _emit(args, bound_report(args.mu, args.delta, x=args.x).to_dict())
    return 0


def cmd_replay(args) -> int:
    with open(args.artifact, encoding="utf-8") as fh:
        run = json.load(fh)["run"]
    argv = [run["subcommand"]]
    for key, value in run["params"].items():
        flag = "--" + key.replace("_", "-")
        if key == "infile":
            flag = "--in"
        if value is None or value is False:
            continue
        argv += [flag] if value is True else [flag, str(value)]
    argv += ["--workers", str(args.workers)]
    if args.json:
        argv += ["--json", args.json]
    return main(argv)


# -- parser --

def _outputs(p, experiment: bool = False) -> None:
    p.add_argument("--json", metavar="PATH", help="write the JSON artifact here (default stdout)")
    if experiment:
        p.add_argument("--csv", metavar="PATH", help="per-trial CSV (trial_index,statistic,in_band)")
        p.add_argument("--plot-data", metavar="PATH", help="two-column CSV trial_index,statistic")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--min-fraction", type=float, default=None,
                       help="exit 1 if the in-band fraction falls below this")


def _geometry_args(p, required: bool = True) -> None:
    p.add_argument("--n", type=int, required=required)
    p.add_argument("--q", type=int, default=2)


def _matroid_args(p) -> None:
    _geometry_args(p, required=False)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--full", action="store_true", help="the whole geometry PG(n-1,q)")
    src.add_argument("--points", help="comma-separated point indices")
    src.add_argument("--matroid", metavar="FILE", help="matroid text file ('n q' then indices)")


def _trial_args(p, delta: float = 0.1) -> None:
    _geometry_args(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--delta", type=float, default=delta)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)


def _proof_args(p) -> None:
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--log-base", default="e", help="base of log in d = ceil(log log n): e, 2 or q")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgdecomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pgdecomp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("points", help="list the points of PG(n-1,q)")
    _geometry_args(p)
    _outputs(p)
    p.set_defaults(func=cmd_points)

    p = sub.add_parser("flats", help="count (and optionally list) rank-d flats")
    _geometry_args(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--list", action="store_true")
    p.add_argument("--limit", type=int, default=1000)
    _outputs(p)
    p.set_defaults(func=cmd_flats)

    p = sub.add_parser("qbinom", help="Gaussian binomial coefficient")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.set_defaults(func=cmd_qbinom)

    p = sub.add_parser("colour", aliases=["color"], help="colouring number with a witness")
    _matroid_args(p)
    _outputs(p)
    p.set_defaults(func=cmd_colour, command="colour")

    p = sub.add_parser("sample", help="draw PG_p(n-1,q) as a matroid text file")
    _geometry_args(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_sample)

    for name, func, delta, extra in (
        ("lemma-size", cmd_lemma_size, 0.1, ()),
        ("lemma-rank", cmd_lemma_rank, 0.1, ()),
        ("lemma-colouring", cmd_lemma_colouring, 0.1, ()),
        ("small-flat", cmd_small_flat, 0.1, ()),
        ("census", cmd_census, 0.1, ("d",)),
        ("claim1", cmd_claim1, 0.1, ("d", "b")),
    ):
        p = sub.add_parser(name)
        _trial_args(p, delta)
        if "d" in extra:
            p.add_argument("--d", type=int, default=3)
        if "b" in extra:
            p.add_argument("--b", type=int, default=1)
        _outputs(p, experiment=True)
        p.set_defaults(func=func)

    p = sub.add_parser("verify-decomp", help="check a decomposition JSON file")
    p.add_argument("--in", dest="infile", required=True, metavar="FILE")
    p.add_argument("--b", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    _outputs(p)
    p.set_defaults(func=cmd_verify_decomp)

    p = sub.add_parser("search-decomp", help="search for a (b,c)-decomposition")
    _matroid_args(p)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    _outputs(p)
    p.set_defaults(func=cmd_search_decomp)

    p = sub.add_parser("threshold", help="the n0 of the non-decomposability argument")
    _proof_args(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("bound-chain", help="evaluate the flat-counting inequality chain")
    p.add_argument("--n", type=int, help="defaults to the threshold n0")
    _proof_args(p)
    _outputs(p)
    p.set_defaults(func=cmd_bound_chain)

    p = sub.add_parser("bounds", help="Markov and Chernoff bound values")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--x", type=float)
    _outputs(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("replay", help="re-run the configuration embedded in an artifact")
    p.add_argument("artifact")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", metavar="PATH")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (GuardError, BudgetExhausted, FieldError, GeometryError, MatroidError,
            ValueError, OSError, KeyError) as exc:
        print(f"pgdecomp {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
