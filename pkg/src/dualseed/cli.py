"""Command-line front end.

Subcommands: gen (datasets/matrices), train, solve (one matrix, one
strategy), bench (grid from a key=value config file), sweep
{noise|sparsity|topk|perm|features}, report (summaries from saved records).
"""

import argparse
import json
import sys

import numpy as np

from . import baselines, bench, datagen, rowdualnet
from .errors import DualseedError
from .lap_core import solve_cold
from .warmstart import PipelineConfig, min_trick, run_pipeline


def _pipeline_from_args(args) -> PipelineConfig:
    kwargs = {}
    for key in ("eps", "tau", "eq_tol", "refine_k", "feature_dim"):
        value = getattr(args, key, None)
        if value is not None:
            kwargs[key] = value
    return PipelineConfig(**kwargs)


def _add_pipeline_args(p: argparse.ArgumentParser):
    p.add_argument("--eps", type=float, default=None, help="equality-density tolerance")
    p.add_argument("--tau", type=float, default=None, help="fallback density threshold")
    p.add_argument("--eq-tol", dest="eq_tol", type=float, default=None,
                   help="solver equality tolerance")
    p.add_argument("--refine-k", dest="refine_k", type=int, default=None,
                   help="refinement width K")
    p.add_argument("--feature-dim", dest="feature_dim", type=int, default=None,
                   choices=(4, 13, 21), help="feature vector size")


def cmd_gen(args) -> int:
    if args.kind == "matrix":
        if args.generator == "dense":
            c = datagen.gen_dense(args.n, args.seed)
        else:
            params = datagen.BlockParams(
                n=args.n, num_groups=args.block_groups,
                noise_sigma=args.block_noise, seed=args.seed,
            )
            c = datagen.gen_block(params)
        if args.mask_fraction > 0:
            c = datagen.sparsify(c, args.mask_fraction, args.seed)
        datagen.write_matrix(args.out, c)
        print(f"wrote {args.out}: n={c.n} generator={args.generator}")
        return 0
    cfg = _pipeline_from_args(args)
    instances = []
    for i in range(args.count):
        if args.generator == "dense":
            c = datagen.gen_dense(args.n, args.seed, stream_index=i)
        else:
            params = datagen.BlockParams(
                n=args.n, num_groups=args.block_groups,
                noise_sigma=args.block_noise, seed=args.seed,
            )
            c = datagen.gen_block(params, stream_index=i)
        if args.mask_fraction > 0:
            c = datagen.sparsify(c, args.mask_fraction, args.seed, stream_index=i)
        instances.append(datagen.gen_labels(c, cfg, center_sweeps=args.center_sweeps))
    datagen.write_dataset(args.out, instances)
    print(f"wrote {args.out}: {args.count} labeled instances, n={args.n}")
    return 0


def cmd_train(args) -> int:
    cfg = _pipeline_from_args(args)
    dataset = datagen.read_dataset(args.dataset, cfg)
    if args.augment_transpose:
        dataset = dataset + [datagen.transpose_instance(inst, cfg) for inst in dataset]
    tc = rowdualnet.TrainConfig(
        lr=args.lr, weight_decay=args.weight_decay, lambda_cs=args.lambda_cs,
        batch=args.batch, epochs=args.epochs, seed=args.seed,
        val_fraction=args.val_fraction,
    )
    init = rowdualnet.init_model(
        dataset[0].features.d, refine_k=cfg.refine_k, seed=tc.seed,
        activation=args.activation,
    )
    model, log = rowdualnet.train(dataset, tc, model=init)
    rowdualnet.save_checkpoint(model, args.out)
    if args.log:
        with open(args.log, "w") as fh:
            for entry in log:
                fh.write(json.dumps(entry) + "\n")
    print(
        f"trained {args.epochs} epochs on {len(dataset)} instances: "
        f"val loss {log[0]['val_loss']:.6f} -> {log[-1]['val_loss']:.6f}; wrote {args.out}"
    )
    return 0


def cmd_solve(args) -> int:
    c = datagen.read_csv(args.matrix) if args.matrix.endswith(".csv") else datagen.read_matrix(args.matrix)
    cfg = _pipeline_from_args(args)
    if args.strategy == "cold":
        assignment, _, stats = solve_cold(c, eq_tol=cfg.eq_tol)
        print(f"cost {assignment.total_cost:.9f}")
        print(f"greedy_matched {stats.greedy_matched} dual_update_steps {stats.dual_update_steps}")
        if args.out:
            np.savetxt(args.out, assignment.row_to_col, fmt="%d")
        return 0
    if args.strategy == "neural":
        model = rowdualnet.load_checkpoint(args.checkpoint, expect_input_dim=cfg.feature_dim)
        predict = lambda feats: rowdualnet.forward(model, feats, c)
        needs_features = True
    elif args.strategy == "row_mean":
        predict, needs_features = lambda feats: baselines.seed_row_mean(c), False
    elif args.strategy == "random":
        predict, needs_features = lambda feats: baselines.seed_random(c, args.seed), False
    elif args.strategy == "subgradient":
        sub_cfg = baselines.SubgradientConfig(time_budget_ns=args.subgradient_budget_ns)
        predict, needs_features = lambda feats: baselines.seed_subgradient(c, sub_cfg), False
    else:
        raise DualseedError(f"strategy {args.strategy} is not usable on a single matrix")
    assignment, report = run_pipeline(c, predict, cfg, needs_features=needs_features)
    stats = report.solve_stats
    print(f"cost {assignment.total_cost:.9f}")
    print(
        f"rho {report.density_rho:.3f} fallback {report.fallback_triggered} "
        f"greedy_matched {stats.greedy_matched} dual_update_steps {stats.dual_update_steps}"
    )
    for stage, ns in report.stage_times.items():
        print(f"  {stage}: {ns / 1e6:.3f} ms")
    if args.out:
        np.savetxt(args.out, assignment.row_to_col, fmt="%d")
    return 0


def cmd_bench(args) -> int:
    with open(args.config) as fh:
        spec = bench.parse_spec(fh.read())
    records = bench.run_experiment(spec, out_path=args.records)
    rows = bench.summarize(records)
    csv_text = bench.summary_csv(rows)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(csv_text)
    print(csv_text, end="")
    return 0


def cmd_sweep(args) -> int:
    with open(args.config) as fh:
        spec = bench.parse_spec(fh.read())
    if args.axis == "noise":
        sigmas = [float(x) for x in args.values.split(",")] if args.values else [0.0, 0.05, 0.1, 0.2, 0.4]
        rows = bench.sweep_noise(spec, sigmas)
        text = bench.noise_csv(rows)
    elif args.axis == "sparsity":
        fractions = [float(x) for x in args.values.split(",")] if args.values else [0.0, 0.3, 0.6, 0.9]
        rows = bench.sweep_sparsity(spec, fractions)
        text = bench.axis_csv("mask_fraction", rows)
    elif args.axis == "topk":
        ks = [int(x) for x in args.values.split(",")] if args.values else [4, 8, 16, 32]
        rows = bench.sweep_topk(spec, ks, train_instances=args.train_instances,
                                epochs=args.epochs)
        text = bench.axis_csv("k", rows)
    elif args.axis == "perm":
        rows = bench.sweep_permutation(spec, num_perms=args.num_perms)
        text = bench.permutation_csv(rows)
    else:  # features
        dims = [int(x) for x in args.values.split(",")] if args.values else [4, 13, 21]
        rows = bench.sweep_features(spec, dims, train_instances=args.train_instances,
                                    epochs=args.epochs)
        text = bench.axis_csv("feature_dim", rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return 0


def cmd_report(args) -> int:
    records = bench.read_records(args.records)
    if args.kind == "summary":
        text = bench.summary_csv(bench.summarize(records))
    else:
        text = bench.breakdown_csv(bench.breakdown_table(records))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualseed",
        description="Exact assignment solving with learned dual warm starts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate matrices or labeled datasets")
    p.add_argument("kind", choices=("matrix", "dataset"))
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1, help="instances (dataset only)")
    p.add_argument("--generator", choices=("dense", "block"), default="dense")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-fraction", dest="mask_fraction", type=float, default=0.0)
    p.add_argument("--block-groups", dest="block_groups", type=int, default=None)
    p.add_argument("--block-noise", dest="block_noise", type=float, default=None)
    p.add_argument("--center-sweeps", dest="center_sweeps", type=int, default=3,
                   help="label-centering sweeps (dataset only)")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the row-potential model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="write per-epoch JSONL log here")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=1e-4)
    p.add_argument("--lambda-cs", dest="lambda_cs", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.1)
    p.add_argument("--activation", choices=rowdualnet.ACTIVATIONS, default="relu")
    p.add_argument("--augment-transpose", dest="augment_transpose", action="store_true",
                   help="double the dataset with transposed copies")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="solve one matrix with one strategy")
    p.add_argument("matrix", help="binary matrix file or .csv")
    p.add_argument("--strategy", default="cold",
                   choices=("cold", "neural", "row_mean", "random", "subgradient"))
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subgradient-budget-ns", dest="subgradient_budget_ns",
                   type=int, default=1_000_000)
    p.add_argument("--out", default=None, help="write the assignment here")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a benchmark grid from a config file")
    p.add_argument("config", help="key=value spec file")
    p.add_argument("--records", default=None, help="write JSONL records here")
    p.add_argument("--summary", default=None, help="write summary CSV here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="sensitivity sweeps")
    p.add_argument("axis", choices=("noise", "sparsity", "topk", "perm", "features"))
    p.add_argument("config", help="key=value spec file")
    p.add_argument("--values", default=None, help="comma-separated axis values")
    p.add_argument("--num-perms", dest="num_perms", type=int, default=10)
    p.add_argument("--train-instances", dest="train_instances", type=int, default=50)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summaries from saved records")
    p.add_argument("kind", choices=("summary", "breakdown"))
    p.add_argument("records", help="JSONL records file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DualseedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
