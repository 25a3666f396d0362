"""Competing seed strategies: heuristics, a linear model, the coordinate-wise
learned median, and a time-bounded subgradient-ascent dual initializer.

Every strategy emits raw row potentials; downstream callers restore
feasibility with the columnwise-minimum completion, so any real vector is a
safe output.
"""

import time
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, SingularSystem
from ._rng import STREAM_SEED_RANDOM, substream
from .lap_core import CostMatrix


def seed_row_mean(c: CostMatrix) -> np.ndarray:
    """u_i = mean of row i."""
    return c.values.mean(axis=1)


def seed_random(c: CostMatrix, seed: int) -> np.ndarray:
    """i.i.d. uniform(0,1) potentials; deterministic per seed."""
    rng = substream(seed, STREAM_SEED_RANDOM)
    return rng.random(c.n)


@dataclass
class LinregWeights:
    """Affine per-row map u_hat = f @ w + b, shared across rows and instances."""

    w: np.ndarray
    b: float


def train_linreg(dataset: list, ridge: float = 1e-8) -> LinregWeights:
    """Pooled least squares over (feature row, u* entry) samples.

    Normal equations with a small ridge for conditioning; with ridge
    disabled a rank-deficient design surfaces as SingularSystem.
    """
    xs = np.concatenate([inst.features.values for inst in dataset], axis=0)
    ys = np.concatenate([inst.u_star for inst in dataset])
    ones = np.ones((xs.shape[0], 1))
    design = np.concatenate([xs, ones], axis=1)
    gram = design.T @ design
    if ridge:
        gram = gram + ridge * np.eye(gram.shape[0])
    try:
        coef = np.linalg.solve(gram, design.T @ ys)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"normal equations singular: {exc}") from exc
    return LinregWeights(w=coef[:-1], b=float(coef[-1]))


def seed_linreg(f, weights: LinregWeights) -> np.ndarray:
    values = f.values if hasattr(f, "values") else np.asarray(f, dtype=np.float64)
    if values.shape[1] != weights.w.shape[0]:
        raise ShapeMismatch(
            f"feature dim {values.shape[1]} does not match weights dim {weights.w.shape[0]}"
        )
    return values @ weights.w + weights.b


def seed_learned_median(training_duals: np.ndarray) -> np.ndarray:
    """Coordinate-wise lower median of gauge-fixed u* vectors (fixed n)."""
    duals = np.asarray(training_duals, dtype=np.float64)
    if duals.ndim != 2 or duals.shape[0] < 1:
        raise ShapeMismatch(f"training duals must be (M, n), got {duals.shape}")
    m = duals.shape[0]
    return np.sort(duals, axis=0)[(m - 1) // 2]


@dataclass
class SubgradientConfig:
    """Budgeted ascent on the reduced dual g(u) = sum(u) + sum_j min_i (C_ij - u_i)."""

    time_budget_ns: int
    step0: float | None = None  # default range(C)/10, resolved per matrix

    def __post_init__(self):
        if self.time_budget_ns < 0:
            raise ValueError("time_budget_ns must be >= 0")


def dual_objective(values: np.ndarray, u: np.ndarray) -> float:
    return float(u.sum() + (values - u[:, None]).min(axis=0).sum())


def seed_subgradient(c: CostMatrix, cfg: SubgradientConfig) -> np.ndarray:
    """Projected subgradient ascent from u0 = row minima, best iterate kept.

    Each iteration costs one columnwise argmin (O(n^2), comparable to one
    model forward); the step is step0 / sqrt(t). Stops when the monotonic
    clock exceeds the budget, returning the iterate with the best dual
    objective seen (u0 itself when the budget is zero).
    """
    values = c.values
    n = c.n
    u = values.min(axis=1).astype(np.float64)
    step0 = cfg.step0
    if step0 is None:
        step0 = float(values.max() - values.min()) / 10.0 or 1.0
    best_u = u.copy()
    best_g = dual_objective(values, u)
    start = time.monotonic_ns()
    t = 0
    while time.monotonic_ns() - start < cfg.time_budget_ns:
        t += 1
        d = values - u[:, None]
        counts = np.bincount(d.argmin(axis=0), minlength=n)
        grad = 1.0 - counts
        u = u + (step0 / np.sqrt(t)) * grad
        g = dual_objective(values, u)
        if g > best_g:
            best_g = g
            best_u = u.copy()
    return best_u
