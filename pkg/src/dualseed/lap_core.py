"""Exact linear assignment solving with optional injected dual seeds.

The solver is a shortest-augmenting-path method over reduced costs
r_ij = C_ij - u_i - v_j. Cold starts initialize with column reduction and
reduction transfer; seeded starts inject caller-supplied feasible potentials,
harvest the equality subgraph with one greedy pass, and go straight to
augmentation. Both paths return an optimal assignment together with feasible
potentials that certify it.

Reduced costs are always evaluated as (C - u) - v in that association: when v
was produced as a columnwise min of (C - u), feasibility then holds exactly in
floating point, not merely up to rounding.
"""

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleSeed, NonFinite, NonSquare, ShapeMismatch, TooLarge

FEAS_TOL = 1e-9
EQ_TOL = 1e-9
BRUTE_FORCE_LIMIT = 10

# phase keys reported in SolveStats.phase_times (nanoseconds)
PHASE_INIT = "init"
PHASE_GREEDY = "greedy"
PHASE_AUGMENT = "augment"


@dataclass
class CostMatrix:
    """Square dense cost matrix in float64, row-major.

    `sentinel` marks the finite value standing in for masked (absent) edges,
    or None for fully dense instances. Sentinels are ordinary large costs to
    the solver; they only matter to generators and reports.
    """

    values: np.ndarray
    sentinel: float | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_array(cls, arr, sentinel: float | None = None) -> "CostMatrix":
        values = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise NonSquare(f"expected square matrix, got shape {values.shape}")
        if values.shape[0] < 1:
            raise NonSquare("empty matrix")
        if not np.isfinite(values).all():
            raise NonFinite("cost matrix contains NaN or infinity")
        if sentinel is not None and not np.isfinite(sentinel):
            raise NonFinite("sentinel must be finite")
        return cls(values=values, sentinel=sentinel)


@dataclass
class DualPotentials:
    """Row/column potentials (u, v). Feasible when u_i + v_j <= C_ij."""

    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "DualPotentials":
        return DualPotentials(self.u.copy(), self.v.copy())

    def is_feasible(self, c: CostMatrix, tol: float = FEAS_TOL) -> bool:
        r = reduced_costs(c.values, self.u, self.v)
        return bool(r.min() >= -tol)


@dataclass
class Assignment:
    """Permutation row -> column plus its total cost."""

    row_to_col: np.ndarray
    total_cost: float


@dataclass
class SolveStats:
    """Counters and per-phase wall times (ns) for one solve.

    greedy_matched counts rows matched before the augmentation phase;
    free_rows = n - greedy_matched = augment_searches. dual_update_steps
    counts augmenting searches whose shortest-path length exceeded eq_tol,
    i.e. searches that actually moved the potentials; paths inside the
    equality subgraph leave the duals untouched and are not counted.
    """

    greedy_matched: int = 0
    free_rows: int = 0
    augment_searches: int = 0
    dual_update_steps: int = 0
    phase_times: dict = field(default_factory=dict)


@dataclass
class CertificateResult:
    """Outcome of verify_certificate: ok flag plus a reason when not ok."""

    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def reduced_costs(values: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(C - u) - v, the association every feasibility check relies on."""
    return (values - u[:, None]) - v[None, :]


def total_cost_of(values: np.ndarray, row_to_col: np.ndarray) -> float:
    return float(values[np.arange(values.shape[0]), row_to_col].sum())


def brute_force(c: CostMatrix) -> tuple[float, np.ndarray]:
    """Exhaustive minimum over all permutations, n <= 10.

    Ties are broken toward the lexicographically smallest permutation, which
    falls out of enumerating permutations in lexicographic order and keeping
    only strict improvements.
    """
    n = c.n
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    values = c.values
    rows = np.arange(n)
    best_cost = np.inf
    best_perm = None
    for perm in itertools.permutations(range(n)):
        cost = float(values[rows, perm].sum())
        if cost < best_cost:
            best_cost = cost
            best_perm = perm
    return best_cost, np.array(best_perm, dtype=np.int64)


def verify_certificate(
    c: CostMatrix,
    assignment: Assignment,
    duals: DualPotentials,
    feas_tol: float = FEAS_TOL,
    eq_tol: float = EQ_TOL,
) -> CertificateResult:
    """Check that (assignment, duals) certify optimality.

    Three conditions, reported in order of failure: the duals are feasible,
    the assignment is a bijection, and every assigned edge is tight within
    eq_tol (scaled by the entry magnitude, matching the solver's own
    guarantee).
    """
    values = c.values
    n = c.n
    r = reduced_costs(values, duals.u, duals.v)
    if r.min() < -feas_tol:
        return CertificateResult(False, "infeasible-dual")
    perm = assignment.row_to_col
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        return CertificateResult(False, "not-bijection")
    assigned = values[np.arange(n), perm]
    slack = np.abs(r[np.arange(n), perm])
    if (slack > eq_tol * np.maximum(1.0, np.abs(assigned))).any():
        return CertificateResult(False, "slackness-violated")
    return CertificateResult(True, None)


def _column_reduction(values, u, v, row_to_col, col_to_row):
    """Set v to column minima; assign each column's argmin row if still free."""
    n = values.shape[0]
    argmins = np.argmin(values, axis=0)
    v[:] = values[argmins, np.arange(n)]
    for j in range(n):
        i = int(argmins[j])
        if row_to_col[i] < 0:
            row_to_col[i] = j
            col_to_row[j] = i


def _reduction_transfer(values, u, v, row_to_col):
    """Shift slack from assigned rows onto their columns.

    For an assigned row i with column j1, the second-best value
    mu = min_{j != j1}(C_ij - v_j) moves into u_i while v_j1 drops by the
    same amount, keeping the assigned edge tight and the duals feasible.
    """
    n = values.shape[0]
    if n == 1:
        return
    for i in range(n):
        j1 = row_to_col[i]
        if j1 < 0:
            continue
        slack = values[i] - v
        slack[j1] = np.inf
        mu = slack.min()
        v[j1] -= mu
        u[i] = mu


def center_duals(
    c: CostMatrix,
    assignment: Assignment,
    duals: DualPotentials,
    sweeps: int = 3,
) -> DualPotentials:
    """Move optimal duals toward the interior of the optimal dual face.

    Solver-returned potentials sit at a vertex of the dual polytope, where
    many non-assigned edges are accidentally tight. Coordinate sweeps place
    each u_i at the midpoint of its feasible interval (keeping the assigned
    edge tight by moving v_{sigma(i)} in lockstep), which drives non-assigned
    slacks strictly positive wherever the instance allows. Seeds built from
    the result have an equality subgraph that is nearly the assignment alone,
    which is what makes them clean greedy-phase oracles and stable regression
    labels. Optimality is preserved: assigned edges stay tight and
    feasibility is re-checked edge by edge.
    """
    values = c.values
    n = c.n
    perm = assignment.row_to_col
    u = duals.u.copy()
    v = duals.v.copy()
    for _ in range(sweeps):
        for i in range(n):
            j0 = perm[i]
            col = values[:, j0] - u
            col[i] = np.inf
            lo = values[i, j0] - col.min()
            row = values[i] - v
            row[j0] = np.inf
            hi = row.min()
            if np.isfinite(lo) and np.isfinite(hi) and lo <= hi:
                u[i] = 0.5 * (lo + hi)
                v[j0] = values[i, j0] - u[i]
    return DualPotentials(u, v)


def _shortest_path_augment(values, u, v, row_to_col, col_to_row, free_rows, eq_tol, stats):
    """Resolve each free row with a Dijkstra search over reduced costs.

    Potentials move only when the shortest path length exceeds eq_tol;
    zero-length paths (within the equality subgraph) augment the matching
    without touching the duals, so an already-optimal seed passes through
    bit-identically.
    """
    n = values.shape[0]
    for f in free_rows:
        stats.augment_searches += 1
        d = (values[f] - u[f]) - v
        pred = np.full(n, f, dtype=np.int64)
        done = np.zeros(n, dtype=bool)
        while True:
            d_open = np.where(done, np.inf, d)
            j = int(np.argmin(d_open))
            mu = d_open[j]
            done[j] = True
            if col_to_row[j] < 0:
                end = j
                break
            i1 = col_to_row[j]
            open_idx = np.flatnonzero(~done)
            alt = mu + (values[i1, open_idx] - u[i1]) - v[open_idx]
            upd = alt < d[open_idx]
            hit = open_idx[upd]
            d[hit] = alt[upd]
            pred[hit] = i1

        if mu > eq_tol:
            stats.dual_update_steps += 1
            fin = np.flatnonzero(done)
            delta = mu - d[fin]
            owners = col_to_row[fin]
            has_owner = owners >= 0
            u[owners[has_owner]] += delta[has_owner]
            u[f] += mu
            v[fin] -= delta

        # trace the alternating path back from the free column
        j = end
        while True:
            i = pred[j]
            col_to_row[j] = i
            j_prev = row_to_col[i]
            row_to_col[i] = j
            if i == f:
                break
            j = j_prev


def solve_cold(c: CostMatrix, eq_tol: float = EQ_TOL) -> tuple[Assignment, DualPotentials, SolveStats]:
    """Solve from scratch.

    Initialization is column reduction plus reduction transfer; every row the
    reduction leaves free goes through an augmenting search. greedy_matched
    therefore reports the column-reduction match rate, the quantity the warm
    strategies are benchmarked against.
    """
    values = c.values
    n = c.n
    stats = SolveStats()

    t0 = time.perf_counter_ns()
    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(n, dtype=np.float64)
    row_to_col = np.full(n, -1, dtype=np.int64)
    col_to_row = np.full(n, -1, dtype=np.int64)
    t1 = time.perf_counter_ns()
    _column_reduction(values, u, v, row_to_col, col_to_row)
    _reduction_transfer(values, u, v, row_to_col)
    free = [i for i in range(n) if row_to_col[i] < 0]
    t2 = time.perf_counter_ns()

    stats.greedy_matched = n - len(free)
    stats.free_rows = len(free)
    _shortest_path_augment(values, u, v, row_to_col, col_to_row, free, eq_tol, stats)
    t3 = time.perf_counter_ns()

    stats.phase_times = {PHASE_INIT: t1 - t0, PHASE_GREEDY: t2 - t1, PHASE_AUGMENT: t3 - t2}
    assignment = Assignment(row_to_col, total_cost_of(values, row_to_col))
    return assignment, DualPotentials(u, v), stats


def solve_seeded(
    c: CostMatrix,
    seed: DualPotentials,
    feas_tol: float = FEAS_TOL,
    eq_tol: float = EQ_TOL,
) -> tuple[Assignment, DualPotentials, SolveStats]:
    """Solve starting from injected feasible potentials.

    One greedy pass matches rows to equality edges (r_ij <= eq_tol, rows in
    index order, lowest-index free column wins), then the augmentation phase
    finishes the matching. Raises InfeasibleSeed when the seed violates
    feasibility beyond feas_tol.
    """
    values = c.values
    n = c.n
    if seed.u.shape != (n,) or seed.v.shape != (n,):
        raise ShapeMismatch(
            f"seed shapes {seed.u.shape}/{seed.v.shape} do not match n={n}"
        )
    stats = SolveStats()

    t0 = time.perf_counter_ns()
    u = np.asarray(seed.u, dtype=np.float64).copy()
    v = np.asarray(seed.v, dtype=np.float64).copy()
    r = reduced_costs(values, u, v)
    if r.min() < -feas_tol:
        raise InfeasibleSeed(f"seed violates feasibility by {-float(r.min()):.3e}")
    t1 = time.perf_counter_ns()

    row_to_col = np.full(n, -1, dtype=np.int64)
    col_to_row = np.full(n, -1, dtype=np.int64)
    col_free = np.ones(n, dtype=bool)
    for i in range(n):
        tight = np.flatnonzero(r[i] <= eq_tol)
        candidates = tight[col_free[tight]]
        if candidates.size:
            j = int(candidates[0])
            row_to_col[i] = j
            col_to_row[j] = i
            col_free[j] = False
    t2 = time.perf_counter_ns()

    free = [i for i in range(n) if row_to_col[i] < 0]
    stats.greedy_matched = n - len(free)
    stats.free_rows = len(free)
    _shortest_path_augment(values, u, v, row_to_col, col_to_row, free, eq_tol, stats)
    t3 = time.perf_counter_ns()

    stats.phase_times = {PHASE_INIT: t1 - t0, PHASE_GREEDY: t2 - t1, PHASE_AUGMENT: t3 - t2}
    assignment = Assignment(row_to_col, total_cost_of(values, row_to_col))
    return assignment, DualPotentials(u, v), stats
