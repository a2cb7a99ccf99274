"""Batch front end: generate data, run/compare solvers, verify, evaluate.

Exit codes: 0 success (or all checks passed), 2 usage/precondition error,
3 solver stopped at the iteration cap, 4 internal numerical failure,
1 verification suite failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import (
    FixedEffectSpec,
    gen_fixed_effect,
    read_dense_matrix,
    read_sparse_labeled,
    write_dense_matrix,
    write_sparse_labeled,
    write_trace,
)
from .errors import (
    DegenerateUpdateError,
    DimensionMismatchError,
    DivergedError,
    InvalidInputError,
    ParseError,
    PreconditionError,
    UndefinedMetricError,
    UnsupportedRegimeError,
)
from .metrics import choose_K_by_variance, kmeans_accuracy, tev
from .model import ProblemInstance
from .solvers import METHODS, SolverConfig, draw_start, run_comparison, solve
from .verify import (
    audit_suite,
    criticality_report,
    error_bound_suite,
    kl_suite,
    oracle_suite,
    sandwich_probe,
    separation_suite,
)

SCHEMA_VERSION = 1
_DENSE_MAGIC = b"L1PCABIN"


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=float)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    print(text)


def _load_instance(path: str, K: int | None = None, n_features: int | None = None) -> ProblemInstance:
    p = Path(path)
    if p.is_dir():
        meta = json.loads((p / "meta.json").read_text(encoding="utf-8"))
        K_eff = K if K is not None else meta["K"]
        if meta.get("format") == "sparse":
            return read_sparse_labeled(p / meta["files"]["X"], K=K_eff, n_features=meta["d"])
        X = read_dense_matrix(p / meta["files"]["X"])
        return ProblemInstance(X, K_eff)
    with open(p, "rb") as fh:
        magic = fh.read(8)
    if magic == _DENSE_MAGIC:
        if K is None:
            raise PreconditionError("--K is required for dense matrix input")
        return ProblemInstance(read_dense_matrix(p), K)
    return read_sparse_labeled(p, K=K if K is not None else 1, n_features=n_features)


def _merge_config(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill unset flags from a JSON config file, then from defaults."""
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, file_values.get(key, default))
    return args


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(
        method=args.method,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        theorem_mode=bool(getattr(args, "theorem_mode", False)),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    args = _merge_config(args, {"n": None, "d": None, "K": None, "sigma": 0.5, "seed": 0, "format": "dense"})
    if args.n is None or args.d is None or args.K is None:
        raise PreconditionError("--n, --d and --K are required")
    spec = FixedEffectSpec(n=args.n, d=args.d, K=args.K, sigma=args.sigma, seed=args.seed)
    X, U, Z = gen_fixed_effect(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "dense":
        files = {"X": "X.bin", "U": "U.bin", "Z": "Z.bin"}
        write_dense_matrix(out / files["X"], X)
        write_dense_matrix(out / files["U"], U)
        write_dense_matrix(out / files["Z"], Z)
    else:
        files = {"X": "X.txt", "U": "U.bin", "Z": "Z.bin"}
        write_sparse_labeled(out / files["X"], sp.csc_matrix(X), np.zeros(spec.n))
        write_dense_matrix(out / files["U"], U)
        write_dense_matrix(out / files["Z"], Z)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "n": spec.n,
        "d": spec.d,
        "K": spec.K,
        "sigma": spec.sigma,
        "seed": spec.seed,
        "format": args.format,
        "files": files,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(meta, sort_keys=True))
    return 0


def cmd_solve(args) -> int:
    args = _merge_config(
        args,
        {
            "method": "pame",
            "alpha": 1e-4,
            "beta": 1.0,
            "gamma": 0.0,
            "tol": 1e-8,
            "max_iter": 1000,
            "seed": 0,
            "K": None,
        },
    )
    inst = _load_instance(args.input, K=args.K)
    cfg = _solver_config(args)
    P0, Q0 = draw_start(inst, args.seed)
    res = solve(inst, cfg, P0, Q0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(res.trace, out / "trace.csv", "csv")
    alpha_star = args.alpha if args.alpha > 0 else 1e-12
    crit = criticality_report(inst.X, res.P_final, res.Q_final, alpha_star=alpha_star)
    try:
        tev_value = tev(inst.X, res.Q_final)
    except UndefinedMetricError:
        tev_value = None
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": res.method,
        "converged": res.converged,
        "iterations": res.iterations,
        "termination_reason": res.termination_reason,
        "objective_l1": res.final_objective,
        "tev": tev_value,
        "criticality": crit.to_dict(),
        "config": {
            "alpha": args.alpha,
            "beta": args.beta,
            "gamma": args.gamma,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "seed": args.seed,
            "theorem_mode": bool(args.theorem_mode),
        },
        "files": {"trace_csv": str(out / "trace.csv")},
    }
    (out / "result.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8")
    print(json.dumps(payload, sort_keys=True, default=float))
    return 0 if res.converged else 3


def cmd_compare(args) -> int:
    args = _merge_config(
        args,
        {
            "methods": ",".join(METHODS),
            "alpha": 1e-4,
            "beta": 1.0,
            "gamma": 0.0,
            "tol": 1e-8,
            "max_iter": 1000,
            "seed": 0,
            "K": None,
        },
    )
    inst = _load_instance(args.input, K=args.K)
    methods = sorted({m.strip() for m in args.methods.split(",") if m.strip()})
    configs = [
        SolverConfig(
            method=m,
            alpha=args.alpha,
            beta=args.beta,
            gamma=args.gamma,
            tol=args.tol,
            max_iter=args.max_iter,
            seed=args.seed,
        )
        for m in methods
    ]
    outcomes = run_comparison(inst, configs, seed=args.seed)
    lines = ["method,iterations,objective_l1,tev,converged,error"]
    for oc in outcomes:
        if oc.result is not None:
            r = oc.result
            try:
                t = f"{tev(inst.X, r.Q_final):.17g}"
            except UndefinedMetricError:
                t = ""
            lines.append(f"{oc.method},{r.iterations},{r.final_objective:.17g},{t},{int(r.converged)},")
        else:
            lines.append(f"{oc.method},,,,,{oc.error}")
    table = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_verify(args) -> int:
    suite = args.suite
    if suite == "sandwich":
        rep = sandwich_probe(samples=args.samples, seed=args.seed)
        payload, passed = rep.to_dict(), rep.passed
    elif suite == "critical-sets":
        rep = separation_suite(n_specs=args.specs, samples=args.samples, seed=args.seed)
        payload, passed = rep.to_dict(), rep.passed
    elif suite == "error-bound":
        payload = error_bound_suite(samples=args.samples, seed=args.seed)
        passed = payload["passed"]
    elif suite == "kl":
        payload = kl_suite(instances=args.instances, samples=args.samples, seed=args.seed)
        passed = payload["passed"]
    elif suite == "audit":
        payload = audit_suite(
            instances=args.instances,
            n=args.n or 200,
            d=args.d or 80,
            K=args.K or 5,
            sigma=args.sigma,
            seed=args.seed,
            method=args.method,
        )
        passed = payload["passed"]
    elif suite == "oracle":
        rep = oracle_suite(
            instances=args.instances,
            restarts=args.restarts,
            seed=args.seed,
            n=args.n,
            d=args.d,
            K=args.K,
        )
        payload, passed = rep.to_dict(), rep.passed
    else:  # pragma: no cover - argparse choices guard this
        raise PreconditionError(f"unknown suite {suite!r}")
    payload["schema_version"] = SCHEMA_VERSION
    _emit(payload, args.out)
    return 0 if passed else 1


def cmd_cluster(args) -> int:
    args = _merge_config(
        args,
        {
            "method": "pame",
            "alpha": 1e-4,
            "beta": 1.0,
            "gamma": 0.0,
            "tol": 1e-6,
            "max_iter": 1000,
            "seed": 0,
            "restarts": 10,
            "threshold": 0.8,
        },
    )
    inst = _load_instance(args.input)
    if inst.labels is None:
        raise PreconditionError("clustering requires a labeled dataset")
    K = choose_K_by_variance(inst.X, args.threshold) if args.auto_K else args.K
    if K is None:
        raise PreconditionError("pass --K or --auto-K")
    inst = ProblemInstance(inst.X, K, labels=inst.labels)
    cfg = _solver_config(args)
    P0, Q0 = draw_start(inst, args.seed)
    res = solve(inst, cfg, P0, Q0)
    k = len(np.unique(inst.labels))
    accuracy = kmeans_accuracy(inst.X, res.Q_final, inst.labels, k=k, restarts=args.restarts, seed=args.seed)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": res.method,
        "K": int(K),
        "clusters": int(k),
        "accuracy": accuracy,
        "tev": tev(inst.X, res.Q_final),
        "converged": res.converged,
        "iterations": res.iterations,
    }
    _emit(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_solver_flags(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    if with_method:
        p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file of flag defaults; flags override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l1pca", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    g = sub.add_parser("generate", help="generate a synthetic fixed-effect instance")
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--d", type=int, default=None)
    g.add_argument("--K", type=int, default=None)
    g.add_argument("--sigma", type=float, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.add_argument("--format", choices=("dense", "sparse"), default=None)
    g.add_argument("--config", default=None)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run one solver and export trace + report")
    _add_solver_flags(s)
    s.add_argument("--theorem-mode", dest="theorem_mode", action="store_true")
    s.add_argument("--input", required=True)
    s.add_argument("--K", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("compare", help="run several methods from one start")
    c.add_argument("--methods", default=None, help="comma-separated method list")
    _add_solver_flags(c, with_method=False)
    c.add_argument("--input", required=True)
    c.add_argument("--K", type=int, default=None)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", required=True, choices=("sandwich", "critical-sets", "error-bound", "kl", "audit", "oracle"))
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--specs", type=int, default=10)
    v.add_argument("--instances", type=int, default=10)
    v.add_argument("--restarts", type=int, default=20)
    v.add_argument("--n", type=int, default=None)
    v.add_argument("--d", type=int, default=None)
    v.add_argument("--K", type=int, default=None)
    v.add_argument("--sigma", type=float, default=0.5)
    v.add_argument("--method", choices=("pame", "pam"), default="pame")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    cl = sub.add_parser("cluster", help="solve, project, cluster, and score")
    _add_solver_flags(cl)
    cl.add_argument("--input", required=True)
    cl.add_argument("--K", type=int, default=None)
    cl.add_argument("--auto-K", dest="auto_K", action="store_true")
    cl.add_argument("--threshold", type=float, default=None)
    cl.add_argument("--restarts", type=int, default=None)
    cl.add_argument("--out", default=None)
    cl.set_defaults(func=cmd_cluster)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (
        PreconditionError,
        InvalidInputError,
        ParseError,
        UnsupportedRegimeError,
        UndefinedMetricError,
        DimensionMismatchError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergedError, DegenerateUpdateError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
