"""Command-line driver: ``gwf train|embed|cluster|baseline-gwbkm|solver-bench|synth``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import analysis, data
from .model import load_model, save_model, train_semisupervised
from .solvers import SolverConfig, gwd


def _fmt(x) -> str:
    return f"{x:.12g}"


def _read_labels(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([int(line.split(",")[-1]) for line in fh if line.strip()], dtype=int)


def _binary(labels) -> np.ndarray:
    """Map two distinct label values onto {0, 1}."""
    values = np.unique(labels)
    if values.size > 2:
        raise SystemExit(f"clustering accuracy needs two classes, found {values.size}")
    return np.searchsorted(values, labels)


def _load(args):
    ds = data.load_tudataset(args.data, args.name)
    if getattr(args, "symmetrize", False):
        ds.graphs = [data.symmetrize(g) for g in ds.graphs]
    return ds


def cmd_train(args):
    base = data.RunConfig.load(args.config).to_dict() if args.config else {}
    overrides = {
        "num_atoms": args.atoms, "inner_iters": args.inner, "outer_iters": args.outer, "gamma": args.gamma,
        "solver": args.solver, "learning_rate": args.lr, "epochs": args.epochs, "rng_seed": args.seed,
        "semi_weight": args.semi_beta, "labels": args.labels, "data": args.data, "name": args.name, "out": args.out,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.symmetrize:
        base["symmetrize"] = True
    if args.solver is not None and args.gamma is None:
        base["gamma"] = None
    run = data.RunConfig.from_dict(base)
    if not run.data or not run.name or not run.out:
        raise SystemExit("train needs --data, --name and --out (or a --config providing them)")

    ds = data.load_tudataset(run.data, run.name)
    if run.symmetrize:
        ds.graphs = [data.symmetrize(g) for g in ds.graphs]
    labels = None
    if run.labels:
        raw = _read_labels(run.labels)
        labels = {i: int(y) for i, y in enumerate(raw) if y >= 0}
        if run.semi_weight == 0:
            run.semi_weight = 0.5
    model, _, report = train_semisupervised(ds.graphs, labels, run.train_config())

    save_model(model, run.out)
    out_dir = os.path.dirname(os.path.abspath(run.out))
    run.save(os.path.join(out_dir, "run_config.json"))
    with open(os.path.join(out_dir, "train_report.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss", "seconds"])
        for epoch, loss, secs in report.rows():
            w.writerow([epoch, _fmt(loss), _fmt(secs)])
    print(f"trained {model.num_atoms} atoms on {len(ds)} graphs; final mean loss {_fmt(report.epoch_loss[-1])}")


def cmd_embed(args):
    model = load_model(args.model)
    analysis.write_embeddings_csv(args.out, model)


def cmd_cluster(args):
    model = load_model(args.model)
    result = analysis.kmeans(model.embedding_matrix(), args.k, seeds=args.restarts, rng_seed=args.seed)
    analysis.write_embeddings_csv(args.out, model, result.labels)
    if args.truth:
        acc = analysis.clustering_accuracy(_binary(_read_labels(args.truth)), result.labels)
        print(f"clustering accuracy: {_fmt(acc)}")


def cmd_gwbkm(args):
    ds = _load(args)
    solver = SolverConfig(kind=args.solver, gamma=args.gamma, inner_iters=args.inner)
    result = analysis.gwb_km(ds.graphs, args.k, solver, args.max_iters, args.seed, args.outer)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph_id", "cluster"])
        w.writerows([i, int(c)] for i, c in enumerate(result.labels))
    if ds.labels is not None and args.k == 2:
        print(f"clustering accuracy: {_fmt(analysis.clustering_accuracy(_binary(ds.labels), result.labels))}")


def solver_bench(pairs, nodes, m, iters, solver, seed, directed=False, gamma=None):
    """Per-step mean and standard deviation of the squared GW cost over random BA pairs.

    Directed pairs come straight from the generator; undirected ones are the
    symmetrized directed graphs.
    """
    rng = np.random.default_rng(seed)
    config = SolverConfig(kind=solver, gamma=gamma, inner_iters=iters)
    traces = []
    for _ in range(pairs):
        a = data.generate_ba(nodes, m, True, rng)
        b = data.generate_ba(nodes, m, True, rng)
        if not directed:
            a, b = data.symmetrize(a), data.symmetrize(b)
        traces.append(gwd(a, b, config).cost_trace)
    traces = np.asarray(traces)
    return traces.mean(axis=0), traces.std(axis=0)


def cmd_bench(args):
    mean, std = solver_bench(args.pairs, args.nodes, args.ba_m, args.iters, args.solver, args.seed,
                             args.directed, args.gamma)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "mean_sq_gw", "std_sq_gw"])
        for step, (mu, sd) in enumerate(zip(mean, std)):
            w.writerow([step, _fmt(mu), _fmt(sd)])


def cmd_synth(args):
    if args.kind == "sbm":
        ds = data.sbm_dataset(args.graphs, args.nodes, args.p_in, args.p_out, seed=args.seed)
    else:
        ds = data.ba_dataset(args.graphs, args.nodes, args.m, args.directed, seed=args.seed)
    data.write_tudataset(ds, args.out, args.name or ds.name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwf", description="Gromov-Wasserstein factorization of graphs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn atoms and embeddings")
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--data")
    p.add_argument("--name")
    p.add_argument("--atoms", type=int)
    p.add_argument("--inner", type=int)
    p.add_argument("--outer", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--solver", choices=["ppa", "badmm"])
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--semi-beta", type=float)
    p.add_argument("--labels", help="one label per line (graph order); negative means unlabeled")
    p.add_argument("--symmetrize", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="export z and lambda per graph")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="k-means on learned embeddings")
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("baseline-gwbkm", help="k-means of graphs with GW barycenter centers")
    p.add_argument("--data", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--solver", choices=["ppa", "badmm"], default="ppa")
    p.add_argument("--gamma", type=float)
    p.add_argument("--inner", type=int, default=50)
    p.add_argument("--outer", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--symmetrize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gwbkm)

    p = sub.add_parser("solver-bench", help="per-step squared GW over random BA pairs")
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--directed", action="store_true")
    p.add_argument("--ba-m", type=int, required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--solver", choices=["ppa", "badmm"], required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic dataset in TUDataset format")
    p.add_argument("kind", choices=["sbm", "ba"])
    p.add_argument("--graphs", type=int, default=100)
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--p-in", type=float, default=0.7)
    p.add_argument("--p-out", type=float, default=0.05)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--directed", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
