"""Command-line front end: dataset generation, budgeted experiment runs,
confidence-interval reports, the consistency harness, event-log replay, and
the annotation service."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import baselines as bl
from .data import EmbeddedDataset, load_dataset, save_dataset
from .graph import build_epsilon_graph, build_knn_graph
from .intervals import ci_report, save_ci_report
from .rates import HARNESS_RANGE, consistency_experiment
from .session import AnnotationSession, save_estimates
from .solver import SolverConfig
from .synth import (draw_events, kl_divergence, make_sine_1d, make_two_moons,
                    oracle_for, rmse, save_experiment_records)


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="dataset file path")
    p.add_argument("--dataset-format", default="csv",
                   choices=["csv", "delimited-text", "binary", "packed-binary"])


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", default="knn", choices=["knn", "epsilon"])
    p.add_argument("--k", type=int, default=5, help="k for knn graphs")
    p.add_argument("--h", type=float, help="bandwidth for epsilon graphs")
    p.add_argument("--normalization", default="symmetric",
                   choices=["symmetric", "random_walk"])


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--method", default="auto", choices=["auto", "cg", "direct"])


def _build_graph(dataset: EmbeddedDataset, args):
    if args.graph == "knn":
        return build_knn_graph(dataset, args.k)
    if args.h is None:
        raise SystemExit("--h is required for epsilon graphs")
    return build_epsilon_graph(dataset, args.h)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(alpha=args.alpha, tolerance=args.tolerance,
                        max_iterations=args.max_iterations, method=args.method)


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def cmd_generate(args) -> int:
    if args.kind == "two-moons":
        ds = make_two_moons(args.n, noise=args.noise, sharpness=args.sharpness,
                            rng_seed=args.seed)
    else:
        ds = make_sine_1d(args.n, lo=args.lo, hi=args.hi, rng_seed=args.seed)
    save_dataset(ds, args.out, format=args.format)
    print(f"wrote {args.kind} dataset: n={ds.n} d={ds.d} -> {args.out}")
    return 0


def _budget_count(args, n: int) -> int:
    if (args.budget is None) == (args.budget_frac is None):
        raise SystemExit("specify exactly one of --budget / --budget-frac")
    if args.budget is not None:
        m = args.budget
    else:
        m = round(args.budget_frac * n)
    if m < 1:
        raise SystemExit(f"budget resolves to {m}; need at least 1")
    return m


def cmd_run(args) -> int:
    ds = load_dataset(args.dataset, format=args.dataset_format)
    if ds.truth is None:
        raise SystemExit("run requires a dataset with ground-truth labels "
                         "(the oracle samples feedback from them)")
    m = _budget_count(args, ds.n)
    checkpoints = _parse_int_list(args.checkpoints) if args.checkpoints else [m]
    if any(c < 1 or c > m for c in checkpoints) or checkpoints != sorted(checkpoints):
        raise SystemExit("checkpoints must be ascending and within the budget")
    graph = _build_graph(ds, args)
    config = _solver_config(args)
    C = ds.truth.shape[1]
    records = []
    last_estimate = None
    rep_seeds = np.random.SeedSequence(args.seed).spawn(args.reps)
    for r, rep_seed in enumerate(rep_seeds):
        oracle_seed, point_seed = rep_seed.spawn(2)
        events = draw_events(oracle_for(ds, oracle_seed), ds.n, m, point_seed)
        started = time.perf_counter()
        if args.estimator == "pls":
            session = AnnotationSession(graph, C, variant=args.normalization,
                                        config=config)
            marks = set(checkpoints)
            for j, (q, c) in enumerate(events, 1):
                session.annotate(q, c, source="simulated")
                if j in marks:
                    est = session.estimates()
                    records.append(_record(j, r, est, ds, started))
                    last_estimate = est
        else:
            for j in checkpoints:
                log = bl.log_from_events(events[:j], ds.n, C)
                if args.estimator == "gkr":
                    est = bl.gkr_estimate(ds, log, gamma=args.gamma)
                elif args.estimator == "knn":
                    est = bl.knn_estimate(ds, log, k=args.knn_k)
                else:
                    est = bl.histogram_estimate(log)
                records.append(_record(j, r, est, ds, started))
                last_estimate = est
    preamble = {
        "command": "run", "dataset": args.dataset, "n": ds.n,
        "estimator": args.estimator, "graph": args.graph,
        "normalization": args.normalization, "alpha": args.alpha,
        "seed": args.seed, "budget": m,
    }
    save_experiment_records(records, args.out, preamble=preamble)
    if args.estimates_out and last_estimate is not None:
        save_estimates(ds.ids, last_estimate, args.estimates_out)
    print(f"wrote {len(records)} records -> {args.out}")
    return 0


def _record(budget: int, repetition: int, est, ds, started: float) -> dict:
    return {
        "budget": budget, "repetition": repetition,
        "rmse": rmse(est, ds.truth), "kl": kl_divergence(est, ds.truth),
        "wall_ms": 1000.0 * (time.perf_counter() - started),
    }


def _read_events_file(path) -> list[tuple[int, int, str]]:
    events = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        need = {"point_index", "class_index"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise SystemExit(f"{path}: need header columns point_index,class_index")
        for row in reader:
            events.append((int(row["point_index"]), int(row["class_index"]),
                           row.get("source") or "human"))
    return events


def _session_for_events(args, ds: EmbeddedDataset, num_classes: int,
                        lipschitz=None) -> AnnotationSession:
    graph = _build_graph(ds, args)
    return AnnotationSession(graph, num_classes, variant=args.normalization,
                             config=_solver_config(args),
                             features=ds.features, lipschitz=lipschitz)


def cmd_ci(args) -> int:
    ds = load_dataset(args.dataset, format=args.dataset_format)
    if (args.events is None) == (args.budget is None and args.budget_frac is None):
        raise SystemExit("specify --events or a budget (--budget/--budget-frac)")
    if args.events is not None:
        events = [(p, c) for p, c, _ in _read_events_file(args.events)]
        C = args.num_classes or (max(c for _, c in events) + 1
                                 if events else 2)
        if ds.truth is not None:
            C = max(C, ds.truth.shape[1])
    else:
        if ds.truth is None:
            raise SystemExit("simulated budgets need ground-truth labels")
        C = ds.truth.shape[1]
        oracle_seed, point_seed = np.random.SeedSequence(args.seed).spawn(2)
        m = _budget_count(args, ds.n)
        events = draw_events(oracle_for(ds, oracle_seed), ds.n, m, point_seed)
    session = _session_for_events(args, ds, C, lipschitz=args.lipschitz)
    for q, c in events:
        session.annotate(q, c, source="simulated")
    if args.ci_method == "wilson":
        rows = ci_report(session, "wilson", z=args.z)
    else:
        if args.lipschitz is None:
            raise SystemExit("hoeffding intervals need --lipschitz")
        rows = ci_report(session, "hoeffding", delta=args.delta,
                         bonferroni=args.bonferroni)
    save_ci_report(ds.ids, rows, args.out)
    if ds.truth is not None:
        inside = sum(1 for q, c, ci in rows
                     if ci.lower <= ds.truth[q, c] <= ci.upper)
        total = len(rows)
        print(f"coverage: {inside}/{total} = {inside / total:.6f}")
    print(f"wrote {len(rows)} interval rows -> {args.out}")
    return 0


def cmd_consistency(args) -> int:
    rows = consistency_experiment(
        ns=_parse_int_list(args.ns), eps=args.eps, lipschitz=args.lipschitz,
        kappa=args.kappa, reps=args.reps, rng_seed=args.seed,
        domain=(args.domain_lo, args.domain_hi))
    fields = ["n", "repetition", "alpha_n", "h_n", "m_n",
              "max_error", "mean_error", "status", "wall_ms"]
    save_experiment_records(rows, args.out, fields=fields,
                            preamble={"command": "consistency", "eps": args.eps,
                                      "kappa": args.kappa, "seed": args.seed})
    ok = [r for r in rows if r["status"] == "ok"]
    for n in sorted({r["n"] for r in ok}):
        errs = [r["max_error"] for r in ok if r["n"] == n]
        print(f"n={n}: mean max-error {np.mean(errs):.6f} over {len(errs)} reps")
    print(f"wrote {len(rows)} rows -> {args.out}")
    return 0


def cmd_replay(args) -> int:
    if args.session_file:
        meta = json.loads(Path(args.session_file).read_text())
        ds = load_dataset(meta["dataset_path"], format=meta["dataset_format"])
        graph_cfg = meta["graph"]
        if graph_cfg["kind"] == "knn":
            graph = build_knn_graph(ds, int(graph_cfg["k"]))
        else:
            graph = build_epsilon_graph(ds, float(graph_cfg["h"]))
        config = SolverConfig(alpha=meta["alpha"], tolerance=meta["tolerance"])
        session = AnnotationSession(
            graph, int(meta["num_classes"]), variant=meta["normalization"],
            config=config, features=ds.features,
            lipschitz=meta.get("lipschitz"))
        events_path = meta.get("events_path") or str(
            Path(args.session_file).with_suffix("")) + ".events.jsonl"
        with open(events_path) as fh:
            for line in fh:
                if line.strip():
                    e = json.loads(line)
                    session.annotate(int(e["point_index"]),
                                     int(e["class_index"]),
                                     e.get("source", "human"))
    else:
        if not (args.dataset and args.events and args.num_classes):
            raise SystemExit("replay needs --session-file, or --dataset with "
                             "--events and --num-classes")
        ds = load_dataset(args.dataset, format=args.dataset_format)
        session = _session_for_events(args, ds, args.num_classes)
        for p, c, source in _read_events_file(args.events):
            session.annotate(p, c, source)
    save_estimates(ds.ids, session.estimates(), args.out)
    print(f"replayed {len(session.log)} events -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve
    serve(ServiceConfig(data_dir=args.data_dir, capacity=args.capacity),
          host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softspread",
        description="Soft-label estimation by spreading annotations "
                    "through a neighborhood-graph heat kernel.")
    parser.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("kind", choices=["two-moons", "sine1d"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--sharpness", type=float, default=3.0)
    g.add_argument("--lo", type=float, default=0.0)
    g.add_argument("--hi", type=float, default=10.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--format", default="csv",
                   choices=["csv", "delimited-text", "binary", "packed-binary"])
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="budgeted estimation experiment")
    _add_dataset_args(r)
    _add_graph_args(r)
    _add_solver_args(r)
    r.add_argument("--estimator", default="pls",
                   choices=["pls", "gkr", "knn", "histogram"])
    r.add_argument("--gamma", type=float, default=1.0, help="gkr kernel scale")
    r.add_argument("--knn-k", type=int, default=5, help="k for the knn estimator")
    r.add_argument("--budget", type=int, help="absolute annotation count")
    r.add_argument("--budget-frac", type=float,
                   help="annotation count as a fraction of n")
    r.add_argument("--checkpoints", help="comma-separated budget checkpoints")
    r.add_argument("--reps", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--estimates-out",
                   help="also write the final estimates of the last repetition")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("ci", help="confidence-interval report")
    _add_dataset_args(c)
    _add_graph_args(c)
    _add_solver_args(c)
    c.add_argument("--events", help="event-log CSV (point_index,class_index)")
    c.add_argument("--num-classes", type=int)
    c.add_argument("--budget", type=int)
    c.add_argument("--budget-frac", type=float)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--ci-method", default="wilson",
                   choices=["wilson", "hoeffding"])
    c.add_argument("--z", type=float, default=1.96,
                   help="wilson critical value (1.645~90%%, 1.96~95%%, 2.576~99%%)")
    c.add_argument("--delta", type=float, default=0.05)
    c.add_argument("--bonferroni", action="store_true")
    c.add_argument("--lipschitz", type=float)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_ci)

    k = sub.add_parser("consistency", help="growing-n consistency harness")
    k.add_argument("--ns", required=True, help="comma-separated sample sizes")
    k.add_argument("--eps", type=float, required=True)
    k.add_argument("--lipschitz", type=float, default=1.0)
    k.add_argument("--kappa", type=float, default=1.0)
    k.add_argument("--reps", type=int, default=10)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--domain-lo", type=float, default=HARNESS_RANGE[0])
    k.add_argument("--domain-hi", type=float, default=HARNESS_RANGE[1])
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_consistency)

    p = sub.add_parser("replay", help="rebuild estimates from an event log")
    p.add_argument("--session-file", help="service session metadata JSON")
    p.add_argument("--dataset")
    p.add_argument("--dataset-format", default="csv",
                   choices=["csv", "delimited-text", "binary", "packed-binary"])
    _add_graph_args(p)
    _add_solver_args(p)
    p.add_argument("--events", help="event-log CSV")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)

    s = sub.add_parser("serve", help="run the HTTP annotation service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--data-dir", required=True)
    s.add_argument("--capacity", type=int, default=100_000,
                   help="maximum dataset size a session may hold")
    s.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
