"""Experiment harness: strategy grids, statistics, and sensitivity sweeps.

run_experiment executes every requested seed strategy on identical instances
with monotonic timing and cross-checks that all strategies report the same
optimal cost. summarize turns raw records into mean-of-ratios speedups with
normal-approximation confidence intervals; breakdown_table splits wall time
into the five pipeline stages. The sweeps vary seed noise, sparsity, the
refinement width K, row permutations, and feature dimension.

Timing protocol: one untimed warm-up run per (strategy, size) before the
timed trials; all timed runs for one instance execute sequentially.
DUALSEED_THREADS caps worker parallelism for untimed preparation (default 1).
"""

import dataclasses
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DualseedError, InsufficientTrials
from ._rng import STREAM_NOISE, STREAM_PERMUTATION, substream
from .lap_core import Assignment, CostMatrix, SolveStats, solve_cold, solve_seeded
from .warmstart import (
    STAGE_FALLBACK,
    STAGE_FEATURES,
    STAGE_MIN_TRICK,
    STAGE_MODEL,
    STAGE_NAMES,
    STAGE_SOLVER,
    FeatureMatrix,
    PipelineConfig,
    equality_density,
    extract_features,
    min_trick,
    run_pipeline,
)
from . import baselines, datagen, rowdualnet

ALL_STRATEGIES = (
    "cold",
    "neural",
    "row_mean",
    "random",
    "linreg",
    "median",
    "subgradient",
    "optimal_oracle",
)

SUMMARY_HEADER = (
    "strategy,n,trials,mean_ratio,ci_lo,ci_hi,median_ratio,cv,"
    "min_wall_ns,max_wall_ns,mean_greedy_match_rate,augment_reduction_vs_cold,fallback_rate"
)
BREAKDOWN_HEADER = (
    "n,features_ms,features_pct,model_ms,model_pct,min_trick_ms,min_trick_pct,"
    "fallback_check_ms,fallback_check_pct,solver_ms,solver_pct"
)

PREP_CORPUS_SIZE = 20
PREP_STREAM_BASE = 100_000


@dataclass
class ExperimentSpec:
    """One benchmark grid: generator x sizes x trials x strategies."""

    generator: str = "dense"
    sizes: tuple = (64,)
    trials: int = 3
    strategies: tuple = ("cold",)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    checkpoint: str | None = None
    seed: int = 0
    block_groups: int | None = None
    block_noise: float | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.strategies:
            raise ValueError("strategies must be non-empty")
        for s in self.strategies:
            if s not in ALL_STRATEGIES:
                raise ValueError(f"unknown strategy {s!r} (choose from {ALL_STRATEGIES})")
        if not (self.generator in ("dense", "block") or self.generator.startswith("file:")):
            raise ValueError("generator must be dense, block, or file:<path>")


SPEC_KEYS = (
    "generator",
    "sizes",
    "trials",
    "strategies",
    "checkpoint",
    "seed",
    "eps",
    "tau",
    "eq_tol",
    "refine_k",
    "feature_dim",
    "block_groups",
    "block_noise",
)


def parse_spec(text: str) -> ExperimentSpec:
    """Parse key=value lines (# comments allowed) into an ExperimentSpec."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in SPEC_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r} (known: {', '.join(SPEC_KEYS)})")
        raw[key] = value

    pipe_kwargs = {}
    for key, cast in (("eps", float), ("tau", float), ("eq_tol", float),
                      ("refine_k", int), ("feature_dim", int)):
        if key in raw:
            pipe_kwargs[key] = cast(raw.pop(key))
    spec_kwargs = {"pipeline": PipelineConfig(**pipe_kwargs)}
    if "generator" in raw:
        spec_kwargs["generator"] = raw.pop("generator")
    if "sizes" in raw:
        spec_kwargs["sizes"] = tuple(int(x) for x in raw.pop("sizes").split(","))
    if "trials" in raw:
        spec_kwargs["trials"] = int(raw.pop("trials"))
    if "strategies" in raw:
        spec_kwargs["strategies"] = tuple(s.strip() for s in raw.pop("strategies").split(","))
    if "checkpoint" in raw:
        spec_kwargs["checkpoint"] = raw.pop("checkpoint")
    if "seed" in raw:
        spec_kwargs["seed"] = int(raw.pop("seed"))
    if "block_groups" in raw:
        spec_kwargs["block_groups"] = int(raw.pop("block_groups"))
    if "block_noise" in raw:
        spec_kwargs["block_noise"] = float(raw.pop("block_noise"))
    return ExperimentSpec(**spec_kwargs)


@dataclass
class RunRecord:
    """One timed strategy run on one instance."""

    strategy: str
    n: int
    trial: int
    total_cost: float | None = None
    wall_ns: int = 0
    features_ns: int = 0
    model_ns: int = 0
    min_trick_ns: int = 0
    fallback_check_ns: int = 0
    solver_ns: int = 0
    density_rho: float | None = None
    fallback_triggered: bool | None = None
    greedy_matched: int = 0
    free_rows: int = 0
    augment_searches: int = 0
    dual_update_steps: int = 0
    greedy_match_rate: float = 0.0
    error: str | None = None


def _record_from_report(strategy, n, trial, report) -> RunRecord:
    st = report.stage_times
    stats = report.solve_stats
    return RunRecord(
        strategy=strategy,
        n=n,
        trial=trial,
        total_cost=report.total_cost,
        wall_ns=sum(st.values()),
        features_ns=st[STAGE_FEATURES],
        model_ns=st[STAGE_MODEL],
        min_trick_ns=st[STAGE_MIN_TRICK],
        fallback_check_ns=st[STAGE_FALLBACK],
        solver_ns=st[STAGE_SOLVER],
        density_rho=report.density_rho,
        fallback_triggered=report.fallback_triggered,
        greedy_matched=stats.greedy_matched,
        free_rows=stats.free_rows,
        augment_searches=stats.augment_searches,
        dual_update_steps=stats.dual_update_steps,
        greedy_match_rate=stats.greedy_matched / n,
    )


def worker_count() -> int:
    """Parallelism cap for untimed preparation, from DUALSEED_THREADS."""
    try:
        return max(1, int(os.environ.get("DUALSEED_THREADS", "1")))
    except ValueError:
        return 1


def _generate_instances(spec: ExperimentSpec, n: int) -> list:
    """All trial instances for one size; each is pure in (spec, n, trial),
    so the DUALSEED_THREADS fan-out cannot change the results."""
    threads = worker_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda t: generate_instance(spec, n, t), range(spec.trials)))
    return [generate_instance(spec, n, t) for t in range(spec.trials)]


def generate_instance(spec: ExperimentSpec, n: int, trial: int) -> CostMatrix:
    """The instance shared by every strategy in one (size, trial) cell."""
    if spec.generator == "dense":
        return datagen.gen_dense(n, seed=spec.seed, stream_index=trial)
    if spec.generator == "block":
        params = datagen.BlockParams(
            n=n,
            num_groups=spec.block_groups,
            noise_sigma=spec.block_noise,
            seed=spec.seed,
        )
        return datagen.gen_block(params, stream_index=trial)
    return datagen.read_matrix(spec.generator[len("file:") :])


class _StrategyRunner:
    """A named predictor plus whether it consumes the feature stage."""

    def __init__(self, name, needs_features, make_predict):
        self.name = name
        self.needs_features = needs_features
        self.make_predict = make_predict  # (c, prep) -> callable(feats) -> u_hat

    def run(self, c: CostMatrix, prep: dict, cfg: PipelineConfig):
        predict = self.make_predict(c, prep)
        return run_pipeline(c, predict, cfg, needs_features=self.needs_features)


def _run_cold(c: CostMatrix, cfg: PipelineConfig):
    t0 = time.perf_counter_ns()
    assignment, _, stats = solve_cold(c, eq_tol=cfg.eq_tol)
    t1 = time.perf_counter_ns()

    class _Report:
        stage_times = {name: 0 for name in STAGE_NAMES}
        density_rho = None
        fallback_triggered = None
        solve_stats = stats
        total_cost = assignment.total_cost

    report = _Report()
    report.stage_times = dict(report.stage_times)
    report.stage_times[STAGE_SOLVER] = t1 - t0
    return assignment, report


def _measure_forward_ns(model, inst) -> int:
    best = None
    for _ in range(3):
        t0 = time.perf_counter_ns()
        rowdualnet.forward(model, inst.features, inst.c)
        dt = time.perf_counter_ns() - t0
        best = dt if best is None else min(best, dt)
    return best


def _prepare_size(spec: ExperimentSpec, n: int, model) -> dict:
    """Untimed per-size artifacts: fitted baselines and the oracle corpus."""
    prep = {"model": model}
    needs_corpus = {"linreg", "median", "subgradient"} & set(spec.strategies)
    if needs_corpus:
        corpus = []
        for i in range(PREP_CORPUS_SIZE):
            if spec.generator == "block":
                params = datagen.BlockParams(
                    n=n, num_groups=spec.block_groups,
                    noise_sigma=spec.block_noise, seed=spec.seed,
                )
                c = datagen.gen_block(params, stream_index=PREP_STREAM_BASE + i)
            elif spec.generator == "dense":
                c = datagen.gen_dense(n, seed=spec.seed, stream_index=PREP_STREAM_BASE + i)
            else:  # fixed file instance: corpus of one
                c = generate_instance(spec, n, 0)
                corpus = [datagen.gen_labels(c, spec.pipeline)]
                break
            corpus.append(datagen.gen_labels(c, spec.pipeline))
        prep["corpus"] = corpus
        if "linreg" in spec.strategies:
            prep["linreg"] = baselines.train_linreg(corpus)
        if "median" in spec.strategies:
            prep["median"] = baselines.seed_learned_median(
                np.stack([inst.u_star for inst in corpus])
            )
        if "subgradient" in spec.strategies:
            if model is not None:
                budget = _measure_forward_ns(model, corpus[0])
            else:
                t0 = time.perf_counter_ns()
                extract_features(corpus[0].c, spec.pipeline)
                budget = time.perf_counter_ns() - t0
            prep["subgradient_cfg"] = baselines.SubgradientConfig(time_budget_ns=budget)
    return prep


def _build_runners(spec: ExperimentSpec) -> dict:
    runners = {}
    for name in spec.strategies:
        if name == "cold":
            continue
        if name == "neural":
            runners[name] = _StrategyRunner(
                name, True,
                lambda c, prep: (lambda feats: rowdualnet.forward(prep["model"], feats, c)),
            )
        elif name == "row_mean":
            runners[name] = _StrategyRunner(
                name, False, lambda c, prep: (lambda feats: baselines.seed_row_mean(c))
            )
        elif name == "random":
            runners[name] = _StrategyRunner(
                name, False,
                lambda c, prep: (lambda feats: baselines.seed_random(c, spec.seed)),
            )
        elif name == "linreg":
            runners[name] = _StrategyRunner(
                name, True,
                lambda c, prep: (lambda feats: baselines.seed_linreg(feats, prep["linreg"])),
            )
        elif name == "median":
            runners[name] = _StrategyRunner(
                name, False, lambda c, prep: (lambda feats: prep["median"])
            )
        elif name == "subgradient":
            runners[name] = _StrategyRunner(
                name, False,
                lambda c, prep: (lambda feats: baselines.seed_subgradient(c, prep["subgradient_cfg"])),
            )
        elif name == "optimal_oracle":
            runners[name] = _StrategyRunner(
                name, False, lambda c, prep: (lambda feats: prep["oracle_u"])
            )
    return runners


def run_experiment(spec: ExperimentSpec, out_path: str | None = None) -> list:
    """Run the grid; returns records (and writes line-delimited JSON)."""
    model = None
    if "neural" in spec.strategies:
        if spec.checkpoint is None:
            raise ValueError("neural strategy requires a checkpoint path")
        model = rowdualnet.load_checkpoint(
            spec.checkpoint, expect_input_dim=spec.pipeline.feature_dim
        )
    runners = _build_runners(spec)
    records = []
    for n in spec.sizes:
        prep = _prepare_size(spec, n, model)
        instances = _generate_instances(spec, n)
        warmed = set()
        for trial in range(spec.trials):
            c = instances[trial]
            if "optimal_oracle" in spec.strategies:
                # Solver-vertex duals: their completion reproduces the seed
                # exactly, so the seeded solve performs zero dual updates.
                prep["oracle_u"] = datagen.gen_labels(c, spec.pipeline, center=False).u_star
            cell_costs = {}
            for name in spec.strategies:
                try:
                    if name == "cold":
                        if ("cold", n) not in warmed:
                            _run_cold(c, spec.pipeline)
                            warmed.add(("cold", n))
                        _, report = _run_cold(c, spec.pipeline)
                    else:
                        runner = runners[name]
                        if (name, n) not in warmed:
                            runner.run(c, prep, spec.pipeline)
                            warmed.add((name, n))
                        _, report = runner.run(c, prep, spec.pipeline)
                    rec = _record_from_report(name, n, trial, report)
                    cell_costs[name] = rec.total_cost
                except DualseedError as exc:
                    rec = RunRecord(strategy=name, n=n, trial=trial, error=str(exc))
                records.append(rec)
            if len(cell_costs) > 1:
                costs = list(cell_costs.values())
                if max(costs) - min(costs) > 1e-9 * max(1.0, abs(max(costs))):
                    raise DualseedError(
                        f"cost disagreement at n={n} trial={trial}: {cell_costs}"
                    )
    if out_path is not None:
        write_records(out_path, records, spec)
    return records


def write_records(path: str, records: list, spec: ExperimentSpec | None = None):
    """Line-delimited JSON; the first line is a metadata record."""
    with open(path, "w") as fh:
        meta = {
            "_meta": {
                "warmup_runs": 1,
                "threads": worker_count(),
            }
        }
        if spec is not None:
            meta["_meta"]["generator"] = spec.generator
            meta["_meta"]["seed"] = spec.seed
        fh.write(json.dumps(meta) + "\n")
        for rec in records:
            fh.write(json.dumps(dataclasses.asdict(rec)) + "\n")


def read_records(path: str) -> list:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "_meta" in obj:
                continue
            records.append(RunRecord(**obj))
    return records


@dataclass
class SummaryRow:
    strategy: str
    n: int
    trials: int
    mean_ratio: float | None
    ci_lo: float | None
    ci_hi: float | None
    median_ratio: float | None
    cv: float
    min_wall_ns: int
    max_wall_ns: int
    mean_greedy_match_rate: float
    augment_reduction_vs_cold: float | None
    fallback_rate: float | None


def summarize(records: list) -> list:
    """Per (strategy, n) statistics against the cold runs of the same cells.

    Speedup is the mean of per-instance ratios T_cold / T_strategy with a
    normal-approximation 95% CI (sample std); the coefficient of variation
    of raw wall times uses the population std.
    """
    ok = [r for r in records if r.error is None]
    cold_wall = {(r.n, r.trial): r.wall_ns for r in ok if r.strategy == "cold"}
    cold_aug = {(r.n, r.trial): r.augment_searches for r in ok if r.strategy == "cold"}
    rows = []
    strategies = sorted({r.strategy for r in ok}, key=lambda s: ALL_STRATEGIES.index(s))
    for strategy in strategies:
        for n in sorted({r.n for r in ok if r.strategy == strategy}):
            cell = [r for r in ok if r.strategy == strategy and r.n == n]
            walls = np.array([r.wall_ns for r in cell], dtype=np.float64)
            ratios = np.array(
                [
                    cold_wall[(n, r.trial)] / r.wall_ns
                    for r in cell
                    if (n, r.trial) in cold_wall and r.wall_ns > 0
                ]
            )
            if ratios.size:
                if ratios.size < 2:
                    raise InsufficientTrials(
                        f"{strategy} at n={n}: {ratios.size} ratio(s); CI needs >= 2"
                    )
                mean_ratio = float(ratios.mean())
                half = 1.96 * float(ratios.std(ddof=1)) / np.sqrt(ratios.size)
                ci_lo, ci_hi = mean_ratio - half, mean_ratio + half
                median_ratio = float(np.median(ratios))
            else:
                mean_ratio = ci_lo = ci_hi = median_ratio = None
            aug = [
                1.0 - r.augment_searches / cold_aug[(n, r.trial)]
                for r in cell
                if (n, r.trial) in cold_aug and cold_aug[(n, r.trial)] > 0
            ]
            fallbacks = [r.fallback_triggered for r in cell if r.fallback_triggered is not None]
            rows.append(
                SummaryRow(
                    strategy=strategy,
                    n=n,
                    trials=len(cell),
                    mean_ratio=mean_ratio,
                    ci_lo=ci_lo,
                    ci_hi=ci_hi,
                    median_ratio=median_ratio,
                    cv=float(walls.std() / walls.mean()) if walls.size else 0.0,
                    min_wall_ns=int(walls.min()) if walls.size else 0,
                    max_wall_ns=int(walls.max()) if walls.size else 0,
                    mean_greedy_match_rate=float(np.mean([r.greedy_match_rate for r in cell])),
                    augment_reduction_vs_cold=float(np.mean(aug)) if aug else None,
                    fallback_rate=float(np.mean(fallbacks)) if fallbacks else None,
                )
            )
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def summary_csv(rows: list) -> str:
    lines = [SUMMARY_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.strategy, r.n, r.trials, r.mean_ratio, r.ci_lo, r.ci_hi,
                    r.median_ratio, r.cv, r.min_wall_ns, r.max_wall_ns,
                    r.mean_greedy_match_rate, r.augment_reduction_vs_cold, r.fallback_rate,
                )
            )
        )
    return "\n".join(lines) + "\n"


def breakdown_table(records: list) -> list:
    """Mean per-stage milliseconds and percentage share, one row per n.

    Only full-pipeline records qualify; cold or errored records are dropped.
    Percentages sum to 100 within 0.1.
    """
    eligible = [
        r
        for r in records
        if r.error is None
        and (r.features_ns or r.model_ns) and r.min_trick_ns and r.solver_ns
    ]
    if not eligible:
        raise ValueError("no full-pipeline records to break down")
    rows = []
    for n in sorted({r.n for r in eligible}):
        cell = [r for r in eligible if r.n == n]
        means = {
            STAGE_FEATURES: np.mean([r.features_ns for r in cell]),
            STAGE_MODEL: np.mean([r.model_ns for r in cell]),
            STAGE_MIN_TRICK: np.mean([r.min_trick_ns for r in cell]),
            STAGE_FALLBACK: np.mean([r.fallback_check_ns for r in cell]),
            STAGE_SOLVER: np.mean([r.solver_ns for r in cell]),
        }
        total = sum(means.values())
        row = {"n": n}
        for stage in STAGE_NAMES:
            row[f"{stage}_ms"] = means[stage] / 1e6
            row[f"{stage}_pct"] = 100.0 * means[stage] / total
        rows.append(row)
    return rows


def breakdown_csv(rows: list) -> str:
    lines = [BREAKDOWN_HEADER]
    for row in rows:
        cells = [str(row["n"])]
        for stage in STAGE_NAMES:
            cells.append(f"{row[f'{stage}_ms']:.6f}")
            cells.append(f"{row[f'{stage}_pct']:.3f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def sweep_noise(spec: ExperimentSpec, sigmas: list) -> list:
    """Perturb exact solver duals with Gaussian noise scaled by range(C).

    The seed is u* + N(0, (sigma*range)^2) completed by the columnwise
    minimum; the fallback gate is disabled so the solver always consumes the
    seed. Rows report mean equality density and mean dual updates per sigma.
    """
    insts = []
    for n in spec.sizes:
        for trial in range(spec.trials):
            c = generate_instance(spec, n, trial)
            labels = datagen.gen_labels(c, spec.pipeline, center=False)
            insts.append((c, labels, trial))
    rows = []
    for k, sigma in enumerate(sorted(sigmas)):
        rhos, steps = [], []
        for idx, (c, labels, trial) in enumerate(insts):
            rng = substream(spec.seed, STREAM_NOISE, index=k * len(insts) + idx)
            spread = float(c.values.max() - c.values.min())
            u_noisy = labels.u_star + rng.normal(0.0, sigma * spread, c.n)
            duals = min_trick(c, u_noisy)
            rhos.append(equality_density(c, duals, spec.pipeline.eps))
            _, _, stats = solve_seeded(c, duals, eq_tol=spec.pipeline.eq_tol)
            steps.append(stats.dual_update_steps)
        rows.append(
            {"sigma": sigma, "mean_rho": float(np.mean(rhos)),
             "mean_dual_update_steps": float(np.mean(steps))}
        )
    return rows


def noise_csv(rows: list) -> str:
    lines = ["sigma,mean_rho,mean_dual_update_steps"]
    for r in rows:
        lines.append(f"{r['sigma']:.6f},{r['mean_rho']:.6f},{r['mean_dual_update_steps']:.6f}")
    return "\n".join(lines) + "\n"


def _axis_rows(spec: ExperimentSpec, axis_name: str, axis_value, records: list) -> list:
    rows = []
    for srow in summarize(records):
        if srow.strategy == "cold":
            continue
        rows.append(
            {
                axis_name: axis_value,
                "strategy": srow.strategy,
                "n": srow.n,
                "mean_ratio": srow.mean_ratio,
                "ci_lo": srow.ci_lo,
                "ci_hi": srow.ci_hi,
                "mean_greedy_match_rate": srow.mean_greedy_match_rate,
                "augment_reduction_vs_cold": srow.augment_reduction_vs_cold,
                "fallback_rate": srow.fallback_rate,
            }
        )
    return rows


def axis_csv(axis_name: str, rows: list) -> str:
    header = (
        f"{axis_name},strategy,n,mean_ratio,ci_lo,ci_hi,"
        "mean_greedy_match_rate,augment_reduction_vs_cold,fallback_rate"
    )
    lines = [header]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r[axis_name], r["strategy"], r["n"], r["mean_ratio"], r["ci_lo"],
                    r["ci_hi"], r["mean_greedy_match_rate"],
                    r["augment_reduction_vs_cold"], r["fallback_rate"],
                )
            )
        )
    return "\n".join(lines) + "\n"


def sweep_sparsity(spec: ExperimentSpec, fractions: list) -> list:
    """Re-run the grid on progressively sparsified copies of each instance."""
    rows = []
    for fraction in fractions:
        records = []
        model = None
        if "neural" in spec.strategies:
            model = rowdualnet.load_checkpoint(
                spec.checkpoint, expect_input_dim=spec.pipeline.feature_dim
            )
        runners = _build_runners(spec)
        for n in spec.sizes:
            prep = _prepare_size(spec, n, model)
            for trial in range(spec.trials):
                base = generate_instance(spec, n, trial)
                c = datagen.sparsify(base, fraction, spec.seed, stream_index=trial)
                if "optimal_oracle" in spec.strategies:
                    prep["oracle_u"] = datagen.gen_labels(c, spec.pipeline, center=False).u_star
                for name in spec.strategies:
                    if name == "cold":
                        _, report = _run_cold(c, spec.pipeline)
                    else:
                        _, report = runners[name].run(c, prep, spec.pipeline)
                    records.append(_record_from_report(name, n, trial, report))
        rows.extend(_axis_rows(spec, "mask_fraction", fraction, records))
    return rows


def _train_variant(spec: ExperimentSpec, refine_k: int, feature_dim: int,
                   train_instances: int, epochs: int) -> rowdualnet.ModelParams:
    cfg = PipelineConfig(
        eps=spec.pipeline.eps, tau=spec.pipeline.tau, eq_tol=spec.pipeline.eq_tol,
        refine_k=refine_k, feature_dim=feature_dim,
    )
    n = spec.sizes[0]
    corpus = []
    for i in range(train_instances):
        if spec.generator == "block":
            params = datagen.BlockParams(
                n=n, num_groups=spec.block_groups,
                noise_sigma=spec.block_noise, seed=spec.seed,
            )
            c = datagen.gen_block(params, stream_index=PREP_STREAM_BASE + i)
        else:
            c = datagen.gen_dense(n, seed=spec.seed, stream_index=PREP_STREAM_BASE + i)
        corpus.append(datagen.gen_labels(c, cfg))
    tc = rowdualnet.TrainConfig(epochs=epochs, seed=spec.seed)
    model, _ = rowdualnet.train(corpus, tc, refine_k=refine_k)
    return model, cfg


def sweep_topk(spec: ExperimentSpec, ks: list, train_instances: int = 50,
               epochs: int = 60) -> list:
    """Train a fresh model per refinement width K and benchmark each."""
    rows = []
    for k in ks:
        model, cfg = _train_variant(spec, k, spec.pipeline.feature_dim,
                                    train_instances, epochs)
        variant = dataclasses.replace(spec, strategies=("cold", "neural"), pipeline=cfg)
        records = _run_with_model(variant, model)
        rows.extend(_axis_rows(variant, "k", k, records))
    return rows


def sweep_features(spec: ExperimentSpec, dims: list, train_instances: int = 50,
                   epochs: int = 60) -> list:
    """Train a fresh model per feature dimension (4, 13, 21) and benchmark."""
    rows = []
    for d in dims:
        model, cfg = _train_variant(spec, spec.pipeline.refine_k, d,
                                    train_instances, epochs)
        variant = dataclasses.replace(spec, strategies=("cold", "neural"), pipeline=cfg)
        records = _run_with_model(variant, model)
        rows.extend(_axis_rows(variant, "feature_dim", d, records))
    return rows


def _run_with_model(spec: ExperimentSpec, model) -> list:
    runners = _build_runners(spec)
    records = []
    for n in spec.sizes:
        prep = {"model": model}
        warmed = set()
        for trial in range(spec.trials):
            c = generate_instance(spec, n, trial)
            for name in spec.strategies:
                if name == "cold":
                    if ("cold", n) not in warmed:
                        _run_cold(c, spec.pipeline)
                        warmed.add(("cold", n))
                    _, report = _run_cold(c, spec.pipeline)
                else:
                    if (name, n) not in warmed:
                        runners[name].run(c, prep, spec.pipeline)
                        warmed.add((name, n))
                    _, report = runners[name].run(c, prep, spec.pipeline)
                records.append(_record_from_report(name, n, trial, report))
    return records


def sweep_permutation(spec: ExperimentSpec, num_perms: int = 10) -> list:
    """Row-permute one fixed instance; the optimal cost must not move.

    Reports, per strategy, the count of distinct optimal costs (expect 1)
    and the wall-clock spread across permutations.
    """
    n = spec.sizes[0]
    base = generate_instance(spec, n, 0)
    model = None
    if "neural" in spec.strategies:
        model = rowdualnet.load_checkpoint(
            spec.checkpoint, expect_input_dim=spec.pipeline.feature_dim
        )
    runners = _build_runners(spec)
    prep = _prepare_size(spec, n, model)
    per_strategy = {name: {"costs": [], "walls": []} for name in spec.strategies}
    for p in range(num_perms):
        rng = substream(spec.seed, STREAM_PERMUTATION, index=p)
        perm = rng.permutation(n)
        c = CostMatrix(base.values[perm], base.sentinel)
        if "optimal_oracle" in spec.strategies:
            prep["oracle_u"] = datagen.gen_labels(c, spec.pipeline, center=False).u_star
        for name in spec.strategies:
            if name == "cold":
                _, report = _run_cold(c, spec.pipeline)
            else:
                _, report = runners[name].run(c, prep, spec.pipeline)
            per_strategy[name]["costs"].append(report.total_cost)
            per_strategy[name]["walls"].append(sum(report.stage_times.values()))
    rows = []
    for name in spec.strategies:
        costs = np.array(per_strategy[name]["costs"])
        walls = np.array(per_strategy[name]["walls"], dtype=np.float64)
        rows.append(
            {
                "strategy": name,
                "num_perms": num_perms,
                "distinct_costs": int(np.unique(np.round(costs, 9)).size),
                "cost": float(costs[0]),
                "mean_wall_ns": float(walls.mean()),
                "wall_std_ns": float(walls.std()),
            }
        )
    return rows


def permutation_csv(rows: list) -> str:
    lines = ["strategy,num_perms,distinct_costs,cost,mean_wall_ns,wall_std_ns"]
    for r in rows:
        lines.append(
            f"{r['strategy']},{r['num_perms']},{r['distinct_costs']},"
            f"{r['cost']:.9f},{r['mean_wall_ns']:.1f},{r['wall_std_ns']:.1f}"
        )
    return "\n".join(lines) + "\n"
