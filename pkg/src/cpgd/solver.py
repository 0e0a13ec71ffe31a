"""Cyclic coordinate projected gradient descent.

The solver minimizes F = f + psi + phi where f has block-wise Lipschitz
gradient, psi is twice differentiable (possibly nonseparable), and phi is
the indicator of a separable closed convex set. Each sweep visits the
blocks cyclically; a block visit takes a gradient step on h = f + psi with
the adaptive stepsize 1/H_F from :mod:`cpgd.stepsize`, then projects onto
the block's constraint set. A full projected-gradient method with
backtracking is included as a comparison baseline.
"""

from __future__ import annotations

import abc
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockPartition, make_partition
from .stepsize import StepsizePolyParams, adaptive_stepsize

logger = logging.getLogger(__name__)

__all__ = [
    "CompositeProblem",
    "SeparableQuadratic",
    "SolverConfig",
    "CycleRecord",
    "RunLog",
    "cpgd_block_update",
    "run_cpgd",
    "run_pgd_baseline",
    "stationarity_bound",
    "box_stationarity_residual",
    "fd_partial_gradient",
]

# H_f floor for degenerate (zero) block Lipschitz constants
_HF_FLOOR = 1e-12
# numerical slack multiplier for descent verification
_DESCENT_SLACK = 1e-8
# iterate growth factor that triggers a boundedness warning
_GROWTH_WARN = 1e6

CSV_BASE_COLUMNS = ("cycle", "elapsed_s", "F", "step_norm", "stat_bound",
                    "alpha_max", "HF_max")


class CompositeProblem(abc.ABC):
    """Composite objective F = f + psi + phi over a block partition.

    Implementations provide values and block partial gradients of the
    differentiable part h = f + psi, per-block Lipschitz constants, the
    curvature-growth pair (p, H_psi_i), and Euclidean projection onto each
    block's constraint set. Blocks are numbered 1..N. Implementations must
    be safe for concurrent read-only evaluation.
    """

    @abc.abstractmethod
    def partition(self) -> BlockPartition: ...

    @abc.abstractmethod
    def f_value(self, x) -> float: ...

    @abc.abstractmethod
    def psi_value(self, x) -> float: ...

    @abc.abstractmethod
    def h_partial_grad(self, x, i: int) -> np.ndarray:
        """Block-i component of grad(f + psi) at x."""

    @abc.abstractmethod
    def block_lipschitz(self, x, i: int) -> float:
        """Lipschitz constant of the block-i partial gradient of f at x."""

    @abc.abstractmethod
    def hessian_growth(self, i: int) -> tuple[int, float]:
        """Pair (p, H_psi_i) bounding the block-i psi curvature."""

    @abc.abstractmethod
    def project_block(self, v, i: int) -> np.ndarray:
        """Euclidean projection of v onto the block-i constraint set."""

    def F_value(self, x) -> float:
        """Objective value; phi contributes zero on the feasible set."""
        return self.f_value(x) + self.psi_value(x)

    def feasible(self, x) -> bool:
        """Exact membership test; default compares against projection."""
        P = self.partition()
        x = np.asarray(x)
        for i in range(1, P.N + 1):
            v = x[P.indices(i)]
            if not np.array_equal(self.project_block(v, i), v):
                return False
        return True

    def h_gradient(self, x) -> np.ndarray:
        """Full gradient of h, assembled from the block partial gradients."""
        P = self.partition()
        g = np.empty(P.n)
        for i in range(1, P.N + 1):
            g[P.indices(i)] = self.h_partial_grad(x, i)
        return g

    def stepsize_point_norm(self, x, i: int) -> float:
        """Norm the curvature-growth term of block i is evaluated at.

        Defaults to the Euclidean norm of the full point. Matrix
        factorization problems may override this with the norm of the
        factor being updated, matching their explicit update formulas.
        """
        return float(np.linalg.norm(x))

    def full_gradient_lipschitz(self):
        """Analytic Lipschitz constant of grad f over the iterate hull.

        Return None (the default) to have the solver estimate it from
        logged iterates; the estimate is labeled 'empirical'.
        """
        return None

    def box_bounds(self):
        """(lower, upper) arrays when the constraint set is a box, else None.

        Box problems get an exact per-cycle stationarity residual logged
        as metric ``direct_resid``.
        """
        return None

    def metrics(self, x) -> dict:
        """Problem-specific per-cycle metrics (name -> value)."""
        return {}


@dataclass
class SolverConfig:
    """Stepsize policy, tolerances and budgets for a solver run.

    eta_multiplier sets H_f = eta_multiplier * L_i and must exceed 0.5 so
    every block visit has a positive descent margin 2*H_f - L_i. step_tol
    defaults to 1e-8 * sqrt(n) at run time. seed feeds problem/start
    initialization only; the solve itself is deterministic.
    """

    eta_multiplier: float = 0.51
    max_cycles: int = 1000
    time_budget: float | None = None
    step_tol: float | None = None
    root_tol: float = 1e-12
    assert_descent: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.eta_multiplier > 0.5:
            raise ValueError(
                f"eta_multiplier must exceed 0.5, got {self.eta_multiplier}")
        if self.max_cycles < 1:
            raise ValueError(f"max_cycles must be >= 1, got {self.max_cycles}")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError(f"time_budget must be > 0, got {self.time_budget}")
        if self.step_tol is not None and self.step_tol < 0:
            raise ValueError(f"step_tol must be >= 0, got {self.step_tol}")
        if self.root_tol <= 0:
            raise ValueError(f"root_tol must be > 0, got {self.root_tol}")


@dataclass
class CycleRecord:
    """State of a run after one full sweep over the blocks."""

    cycle: int
    elapsed_s: float
    F: float
    step_norm: float
    stat_bound: float
    alpha_max: float
    HF_max: float
    metrics: dict = field(default_factory=dict)


@dataclass
class RunLog:
    """Per-cycle trace of one solver run plus run-level constants.

    ``constants`` carries N, L (with its source), H_psi_max, H_F_max,
    eta_min and the stationarity constant C when the run produced them;
    logs loaded back from CSV have only the per-cycle trace.
    """

    records: list
    status: str = "unknown"
    initial_F: float = math.nan
    constants: dict = field(default_factory=dict)
    status_detail: str | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def F_values(self) -> np.ndarray:
        return self.column("F")

    @property
    def step_norms(self) -> np.ndarray:
        return self.column("step_norm")

    @property
    def stat_bounds(self) -> np.ndarray:
        return self.column("stat_bound")

    @property
    def metric_keys(self) -> list:
        keys = set()
        for r in self.records:
            keys.update(r.metrics)
        return sorted(keys)

    def metric(self, name: str) -> np.ndarray:
        return np.array([r.metrics.get(name, math.nan) for r in self.records])

    @property
    def final(self) -> CycleRecord:
        if not self.records:
            raise ValueError("run log has no records")
        return self.records[-1]

    def to_csv(self, path) -> None:
        """Write the per-cycle trace; floats carry 17 significant digits."""
        keys = self.metric_keys
        header = ",".join(CSV_BASE_COLUMNS + tuple(f"metric:{k}" for k in keys))
        lines = [header]
        for r in self.records:
            vals = [f"{r.cycle:d}"]
            vals += [f"{v:.17g}" for v in (r.elapsed_s, r.F, r.step_norm,
                                           r.stat_bound, r.alpha_max, r.HF_max)]
            vals += [f"{r.metrics.get(k, math.nan):.17g}" for k in keys]
            lines.append(",".join(vals))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RunLog":
        with open(path) as fh:
            lines = [ln for ln in (s.strip() for s in fh) if ln]
        if not lines:
            raise ValueError(f"{path}: empty run log")
        cols = lines[0].split(",")
        if tuple(cols[: len(CSV_BASE_COLUMNS)]) != CSV_BASE_COLUMNS:
            raise ValueError(f"{path}: unexpected run-log header {lines[0]!r}")
        metric_names = []
        for c in cols[len(CSV_BASE_COLUMNS):]:
            if not c.startswith("metric:"):
                raise ValueError(f"{path}: unexpected run-log column {c!r}")
            metric_names.append(c[len("metric:"):])
        records = []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != len(cols):
                raise ValueError(f"{path}: row has {len(parts)} fields, "
                                 f"header has {len(cols)}")
            base = [float(v) for v in parts[1:7]]
            records.append(CycleRecord(
                cycle=int(parts[0]), elapsed_s=base[0], F=base[1],
                step_norm=base[2], stat_bound=base[3], alpha_max=base[4],
                HF_max=base[5],
                metrics=dict(zip(metric_names, map(float, parts[7:]))),
            ))
        return cls(records=records)


def _block_step(problem, x, i, eta_multiplier, root_tol):
    """One in-place block visit; returns its diagnostics dict.

    x is mutated (the caller owns it). The update is the gradient step on
    h with stepsize 1/H_F followed by projection onto the block set.
    """
    idx = problem.partition().indices(i)
    g = np.asarray(problem.h_partial_grad(x, i), dtype=float).ravel()
    if not np.all(np.isfinite(g)):
        raise RuntimeError(
            f"non-finite partial gradient on block {i} "
            f"(|x|={np.linalg.norm(x):.3e})")
    L = float(problem.block_lipschitz(x, i))
    if not (math.isfinite(L) and L >= 0):
        raise RuntimeError(f"invalid block Lipschitz constant {L} on block {i}")
    H_f = max(eta_multiplier * L, _HF_FLOOR)
    p, H_psi = problem.hessian_growth(i)
    params = StepsizePolyParams(
        p=int(p), H_psi=float(H_psi),
        x_norm=problem.stepsize_point_norm(x, i),
        H_f=H_f, grad_norm=float(np.linalg.norm(g)))
    res = adaptive_stepsize(params, tol=root_tol)
    xi = x[idx]
    v = np.asarray(problem.project_block(xi - g / res.H_F, i), dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise RuntimeError(f"non-finite update on block {i}")
    d_norm = float(np.linalg.norm(v - xi))
    # cancellation in v - xi costs ~eps * |x| absolute accuracy, hence the
    # point-scaled slack
    slack = res.alpha * 1e-9 + 1e-10 * (1.0 + float(np.linalg.norm(xi)))
    if d_norm > res.alpha + slack:
        raise RuntimeError(
            f"projection expanded the step on block {i}: "
            f"|d|={d_norm:.17g} > alpha={res.alpha:.17g}")
    x[idx] = v
    return {"alpha": res.alpha, "H_F": res.H_F, "d_norm": d_norm,
            "H_f": H_f, "L": L, "p": params.p, "H_psi": params.H_psi,
            "x_norm": params.x_norm}


def cpgd_block_update(problem, x, i, config=None):
    """Single block update; returns (new point, diagnostics).

    The input point is not mutated. Diagnostics carry alpha, H_F and the
    realized step norm d_norm (always <= alpha by nonexpansiveness of the
    projection).
    """
    config = config or SolverConfig()
    x_new = np.array(x, dtype=float)
    diag = _block_step(x=x_new, problem=problem, i=i,
                       eta_multiplier=config.eta_multiplier,
                       root_tol=config.root_tol)
    return x_new, diag


def box_stationarity_residual(x, grad, lower, upper) -> float:
    """Exact distance from 0 to grad + normal cone of a box at x.

    Coordinates at their lower bound contribute max(-g, 0), at their upper
    bound max(g, 0), interior ones |g|.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(grad, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    r = np.abs(g)
    at_lo = x <= lower
    at_hi = x >= upper
    r = np.where(at_lo, np.maximum(-g, 0.0), r)
    r = np.where(at_hi, np.maximum(g, 0.0), r)
    r = np.where(at_lo & at_hi, 0.0, r)
    return float(np.linalg.norm(r))


class _RunTracker:
    """Accumulates run-level constants and assembles the RunLog."""

    def __init__(self, problem, x0):
        self.problem = problem
        self.N = problem.partition().N
        self.H_F_max = 0.0
        self.H_psi_max = 0.0
        self.eta_min = math.inf
        self.L_declared = problem.full_gradient_lipschitz()
        self.L_emp = 0.0
        self.box = problem.box_bounds()
        self.grad_prev = problem.h_gradient(x0)
        self.records = []

    def note_visit(self, diag):
        self.H_F_max = max(self.H_F_max, diag["H_F"])
        self.eta_min = min(self.eta_min, 2.0 * diag["H_f"] - diag["L"])
        self.H_psi_max = max(self.H_psi_max,
                             diag["H_psi"] * diag["x_norm"] ** diag["p"])

    def close_cycle(self, x, step_norm):
        """Per-cycle full gradient bookkeeping; returns metrics for the record."""
        g = self.problem.h_gradient(x)
        if step_norm > 0.0:
            self.L_emp = max(
                self.L_emp,
                float(np.linalg.norm(g - self.grad_prev)) / step_norm)
        self.grad_prev = g
        metrics = dict(self.problem.metrics(x))
        if self.box is not None:
            metrics["direct_resid"] = box_stationarity_residual(
                x, g, self.box[0], self.box[1])
        return metrics

    def constants(self):
        if self.L_declared is not None:
            L, source = float(self.L_declared), "declared"
        else:
            L, source = self.L_emp, "empirical"
        C = 4.0 * self.N * L ** 2 + 4.0 * self.N * self.H_psi_max ** 2 \
            + 2.0 * self.H_F_max
        return {"N": self.N, "L": L, "L_source": source,
                "H_psi_max": self.H_psi_max, "H_F_max": self.H_F_max,
                "eta_min": self.eta_min if math.isfinite(self.eta_min) else math.nan,
                "C": C}

    def finish(self, status, initial_F, detail=None):
        consts = self.constants()
        root_C = math.sqrt(consts["C"])
        for r in self.records:
            r.stat_bound = root_C * r.step_norm
        return RunLog(records=self.records, status=status, initial_F=initial_F,
                      constants=consts, status_detail=detail)


def run_cpgd(problem, x0, config: SolverConfig | None = None) -> RunLog:
    """Run cyclic sweeps of adaptive block updates until a stop rule fires.

    Stops when the full-cycle step norm falls below step_tol, when
    max_cycles or the time budget is exhausted, or (with assert_descent)
    when a cycle fails the quantitative descent check
    F_new <= F_old - (eta/2)*step^2 + 1e-8*(1+|F_old|), where eta is the
    smallest margin 2*H_f - L_i among the cycle's block visits.
    """
    config = config or SolverConfig()
    P = problem.partition()
    x = np.array(x0, dtype=float).ravel()
    if x.shape != (P.n,):
        raise ValueError(f"x0 has shape {np.shape(x0)}, expected ({P.n},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 has non-finite entries")
    if not problem.feasible(x):
        raise ValueError("x0 is not feasible")
    step_tol = config.step_tol
    if step_tol is None:
        step_tol = 1e-8 * math.sqrt(P.n)

    tracker = _RunTracker(problem, x)
    F_prev = float(problem.F_value(x))
    initial_F = F_prev
    x0_scale = max(1.0, float(np.linalg.norm(x)))
    warned_growth = False
    status, detail = "max-cycles", None
    t0 = time.perf_counter()

    for k in range(1, config.max_cycles + 1):
        x_before = x.copy()
        alpha_max = 0.0
        HF_cycle = 0.0
        eta_cycle = math.inf
        for i in range(1, P.N + 1):
            diag = _block_step(problem, x, i, config.eta_multiplier,
                               config.root_tol)
            tracker.note_visit(diag)
            alpha_max = max(alpha_max, diag["alpha"])
            HF_cycle = max(HF_cycle, diag["H_F"])
            eta_cycle = min(eta_cycle, 2.0 * diag["H_f"] - diag["L"])
        step_norm = float(np.linalg.norm(x - x_before))
        F_new = float(problem.F_value(x))
        elapsed = time.perf_counter() - t0
        metrics = tracker.close_cycle(x, step_norm)
        tracker.records.append(CycleRecord(
            cycle=k, elapsed_s=elapsed, F=F_new, step_norm=step_norm,
            stat_bound=math.nan, alpha_max=alpha_max, HF_max=HF_cycle,
            metrics=metrics))

        slack = _DESCENT_SLACK * (1.0 + abs(F_prev))
        if F_new > F_prev - 0.5 * eta_cycle * step_norm ** 2 + slack:
            detail = (f"cycle {k}: F {F_prev:.17g} -> {F_new:.17g}, "
                      f"required decrease {0.5 * eta_cycle * step_norm ** 2:.3e}")
            if config.assert_descent:
                status = "descent-violation"
                break
            logger.warning("descent check failed at %s", detail)
        F_prev = F_new

        if not warned_growth and float(np.linalg.norm(x)) > _GROWTH_WARN * x0_scale:
            logger.warning(
                "iterate norm grew by more than %g x from the start; "
                "boundedness assumption may fail", _GROWTH_WARN)
            warned_growth = True
        if step_norm <= step_tol:
            status = "converged"
            break
        if config.time_budget is not None and elapsed >= config.time_budget:
            status = "time-budget"
            break

    return tracker.finish(status, initial_F, detail)


def run_pgd_baseline(problem, x0, config: SolverConfig | None = None) -> RunLog:
    """Full projected gradient with backtracking, on the same log schema.

    Each iteration halves the trial stepsize t until
    F(x+) <= F(x) - (1/(2t)) * |x+ - x|^2 holds, then doubles t for the
    next iteration. Serves as a generic non-block baseline.
    """
    config = config or SolverConfig()
    P = problem.partition()
    x = np.array(x0, dtype=float).ravel()
    if not problem.feasible(x):
        raise ValueError("x0 is not feasible")
    step_tol = config.step_tol
    if step_tol is None:
        step_tol = 1e-8 * math.sqrt(P.n)

    def project_full(v):
        out = np.empty_like(v)
        for i in range(1, P.N + 1):
            idx = P.indices(i)
            out[idx] = problem.project_block(v[idx], i)
        return out

    tracker = _RunTracker(problem, x)
    F_prev = float(problem.F_value(x))
    initial_F = F_prev
    t = 1.0
    status, detail = "max-cycles", None
    t0 = time.perf_counter()

    for k in range(1, config.max_cycles + 1):
        g = problem.h_gradient(x)
        if not np.all(np.isfinite(g)):
            raise RuntimeError("non-finite gradient in baseline run")
        g_norm = float(np.linalg.norm(g))
        slack = 1e-12 * (1.0 + abs(F_prev))
        while True:
            x_new = project_full(x - t * g)
            step_norm = float(np.linalg.norm(x_new - x))
            F_new = float(problem.F_value(x_new))
            if F_new <= F_prev - step_norm ** 2 / (2.0 * t) + slack:
                break
            t *= 0.5
            if t < 1e-20:
                raise RuntimeError(
                    f"backtracking floor reached at iteration {k}")
        # visit bookkeeping mirroring the block path: H_F plays 1/t
        for i in range(1, P.N + 1):
            p, H_psi = problem.hessian_growth(i)
            tracker.H_psi_max = max(
                tracker.H_psi_max,
                H_psi * problem.stepsize_point_norm(x, i) ** p)
        tracker.H_F_max = max(tracker.H_F_max, 1.0 / t)
        x = x_new
        elapsed = time.perf_counter() - t0
        metrics = tracker.close_cycle(x, step_norm)
        tracker.records.append(CycleRecord(
            cycle=k, elapsed_s=elapsed, F=F_new, step_norm=step_norm,
            stat_bound=math.nan, alpha_max=t * g_norm, HF_max=1.0 / t,
            metrics=metrics))
        if config.assert_descent and F_new > F_prev + slack:
            status = "descent-violation"
            detail = f"cycle {k}: F {F_prev:.17g} -> {F_new:.17g}"
            break
        F_prev = F_new
        if step_norm <= step_tol:
            status = "converged"
            break
        if config.time_budget is not None and elapsed >= config.time_budget:
            status = "time-budget"
            break
        t *= 2.0

    return tracker.finish(status, initial_F, detail)


def stationarity_bound(run_log: RunLog, constants: dict | None = None) -> np.ndarray:
    """Per-cycle upper bounds sqrt(C) * step_norm on the stationarity measure.

    C = 4*N*L^2 + 4*N*H_psi_max^2 + 2*H_F_max. Constants default to the
    ones recorded with the run; pass a dict with keys N, L, H_psi_max,
    H_F_max to override (e.g. for logs loaded from CSV).
    """
    consts = constants if constants is not None else run_log.constants
    missing = {"N", "L", "H_psi_max", "H_F_max"} - set(consts)
    if missing:
        raise ValueError(f"missing constants for stationarity bound: "
                         f"{sorted(missing)}")
    for key in ("N", "L", "H_psi_max", "H_F_max"):
        if not math.isfinite(consts[key]):
            raise ValueError(f"constant {key} must be finite, got {consts[key]}")
    C = (4.0 * consts["N"] * consts["L"] ** 2
         + 4.0 * consts["N"] * consts["H_psi_max"] ** 2
         + 2.0 * consts["H_F_max"])
    return math.sqrt(C) * run_log.step_norms


def fd_partial_gradient(problem, x, i, eps=1e-6) -> np.ndarray:
    """Central finite differences of f + psi along block i's coordinates."""
    P = problem.partition()
    idx = P.indices(i)
    x = np.array(x, dtype=float)

    def h(z):
        return problem.f_value(z) + problem.psi_value(z)

    g = np.empty(idx.size)
    for j, coord in enumerate(idx):
        xp = x.copy()
        xp[coord] += eps
        xm = x.copy()
        xm[coord] -= eps
        g[j] = (h(xp) - h(xm)) / (2.0 * eps)
    return g


class SeparableQuadratic(CompositeProblem):
    """Box-constrained diagonal quadratic: f(x) = 0.5 * sum w_j (x_j - b_j)^2.

    psi is identically zero, so every block has curvature pair (1, 0) and
    the adaptive step reduces to grad_norm / H_f. The unique minimizer over
    the box is the clamp of b, which makes the problem a convenient exact
    oracle for solver tests.
    """

    def __init__(self, b, weights=None, lower=0.0, upper=math.inf,
                 block_sizes=None):
        self.b = np.array(b, dtype=float).ravel()
        n = self.b.size
        if weights is None:
            self.w = np.ones(n)
        else:
            self.w = np.broadcast_to(np.asarray(weights, dtype=float), (n,)).copy()
        if np.any(self.w <= 0):
            raise ValueError("weights must be positive")
        self.lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        sizes = block_sizes if block_sizes is not None else [1] * n
        self._partition = make_partition(n, sizes)

    def partition(self):
        return self._partition

    def f_value(self, x):
        d = np.asarray(x) - self.b
        return 0.5 * float(np.dot(self.w * d, d))

    def psi_value(self, x):
        return 0.0

    def h_partial_grad(self, x, i):
        idx = self._partition.indices(i)
        return self.w[idx] * (np.asarray(x)[idx] - self.b[idx])

    def block_lipschitz(self, x, i):
        return float(self.w[self._partition.indices(i)].max())

    def hessian_growth(self, i):
        return 1, 0.0

    def project_block(self, v, i):
        idx = self._partition.indices(i)
        return np.clip(v, self.lower[idx], self.upper[idx])

    def feasible(self, x):
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def full_gradient_lipschitz(self):
        return float(self.w.max())

    def box_bounds(self):
        return self.lower, self.upper

    def minimizer(self) -> np.ndarray:
        return np.clip(self.b, self.lower, self.upper)

    def optimal_value(self) -> float:
        return self.f_value(self.minimizer())
