"""Convergence-rate tooling: recurrence simulation, bound checking and
KL-exponent fitting.

Sequences satisfying

    delta_k - delta_{k+1} >= c * delta_{k+1}^(alpha + 1)

admit regime-dependent decay bounds: sublinear for alpha in (0, 1),
geometric for alpha = 0, superlinear for alpha < 0. The simulator runs the
recurrence with equality, the checker verifies the bounds index by index,
and :func:`fit_kl_exponent` estimates the exponent q of the inequality
F - F_* <= sigma_q * S^q from a solver trace, where S is the logged
stationarity bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solver import RunLog

__all__ = [
    "RecurrenceSpec",
    "RateBoundReport",
    "RateFit",
    "simulate_recurrence",
    "check_rate_bounds",
    "rate_constant",
    "kl_rate_bound",
    "superlinear_contraction",
    "fit_kl_exponent",
    "rate_report_text",
]

# relative residual target for the implicit per-step solves
_STEP_TOL = 1e-14
# relative slack when judging a bound satisfied
_BOUND_SLACK = 1e-10
# log-space RMS residual above which a fit is inconclusive
_GOODNESS_MAX = 0.5
_MIN_FIT_POINTS = 8


@dataclass(frozen=True)
class RecurrenceSpec:
    """Equality recurrence delta_k - delta_{k+1} = c * delta_{k+1}^(alpha+1).

    alpha must exceed -1 so the implicit update delta + c * delta^(alpha+1)
    is strictly increasing and each step has a unique positive solution.
    """

    delta0: float
    c: float
    alpha: float
    K: int

    def __post_init__(self):
        if not (math.isfinite(self.delta0) and self.delta0 > 0):
            raise ValueError(f"delta0 must be positive, got {self.delta0}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"c must be positive, got {self.c}")
        if not math.isfinite(self.alpha) or self.alpha <= -1:
            raise ValueError(
                f"alpha must be > -1 for a monotone one-step map, got {self.alpha}")
        if self.K < 0:
            raise ValueError(f"horizon K must be >= 0, got {self.K}")


def _solve_step(prev: float, c: float, alpha: float) -> float:
    """Unique u in (0, prev] with u + c * u^(alpha+1) = prev."""
    if alpha == 0.0:
        return prev / (1.0 + c)
    q = alpha + 1.0
    # both terms are at most prev at the root, so the root is bounded by
    # min(prev, (prev/c)^(1/q)); computing the power bound in log space
    # avoids overflow when it is huge and detects underflow when the root
    # has no positive double representation
    log_pow = (math.log(prev) - math.log(c)) / q
    if log_pow >= math.log(prev):
        hi = prev
    elif log_pow < -744.0:
        raise RuntimeError(
            f"recurrence value underflows double precision "
            f"(prev={prev}, c={c}, alpha={alpha})")
    else:
        hi = math.exp(log_pow)
    lo = 0.0
    u = hi
    target = _STEP_TOL * prev
    for _ in range(100):
        r = u + c * u ** q - prev
        if abs(r) <= target:
            return u
        if r > 0.0:
            hi = u
        else:
            lo = u
        slope = 1.0 + c * q * u ** alpha
        step = u - r / slope
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        u = step
    raise RuntimeError(
        f"recurrence step solve stalled (prev={prev}, c={c}, alpha={alpha})")


def simulate_recurrence(spec: RecurrenceSpec) -> np.ndarray:
    """Sequence delta_0..delta_K of the equality recurrence.

    Strictly decreasing and positive; each term satisfies the recurrence
    to 1e-12 relative or better.
    """
    seq = np.empty(spec.K + 1)
    seq[0] = spec.delta0
    for k in range(spec.K):
        nxt = _solve_step(seq[k], spec.c, spec.alpha)
        if not nxt > 0.0:
            raise RuntimeError(
                f"recurrence value underflows double precision at step "
                f"{k + 1} (previous value {seq[k]})")
        seq[k + 1] = nxt
    return seq


@dataclass
class RateBoundReport:
    """Index-wise verdicts of a regime bound over a sequence."""

    regime: str
    bounds: np.ndarray
    holds: np.ndarray
    margin: np.ndarray

    @property
    def all_hold(self) -> bool:
        return bool(self.holds.all())


def check_rate_bounds(sequence, c: float, alpha: float) -> RateBoundReport:
    """Check the regime bound of (c, alpha) at every index of a sequence.

    alpha in (0,1): delta_k <= delta_0 / (1 + (alpha k/(1+alpha))
    ln(1 + c delta_0^alpha))^(1/alpha) (for c != 1 the sequence is brought
    to the c = 1 form by the rescaling delta -> c^(1/alpha) delta, which
    moves c inside the logarithm). alpha = 0: geometric decay with factor
    1/(1+c). alpha < 0: the implicit per-step contraction
    delta_{k+1} <= delta_k / (1 + c delta_{k+1}^alpha). alpha >= 1 is
    outside every regime and rejected.
    """
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 1 or seq.size < 1:
        raise ValueError("sequence must be a nonempty 1-D array")
    if np.any(seq <= 0) or not np.all(np.isfinite(seq)):
        raise ValueError("sequence must be positive and finite")
    if np.any(np.diff(seq) > 0):
        raise ValueError("sequence must be nonincreasing")
    if not (math.isfinite(c) and c > 0):
        raise ValueError(f"c must be positive, got {c}")
    if alpha >= 1.0:
        raise ValueError(
            f"alpha={alpha} is outside the covered regimes (needs alpha < 1)")

    k = np.arange(seq.size, dtype=float)
    if alpha > 0.0:
        regime = "sublinear"
        growth = (alpha / (1.0 + alpha)) * math.log1p(c * seq[0] ** alpha)
        bounds = seq[0] / (1.0 + k * growth) ** (1.0 / alpha)
    elif alpha == 0.0:
        regime = "linear"
        # log-space evaluation keeps long horizons with large c inside
        # double range (e.g. 3^-1000 underflows a direct power)
        bounds = np.exp(math.log(seq[0]) - k * math.log1p(c))
    else:
        regime = "superlinear"
        bounds = np.empty_like(seq)
        bounds[0] = seq[0]
        if seq.size > 1:
            bounds[1:] = seq[:-1] / (1.0 + c * seq[1:] ** alpha)
    holds = seq <= bounds * (1.0 + _BOUND_SLACK)
    margin = (bounds - seq) / bounds
    return RateBoundReport(regime=regime, bounds=bounds, holds=holds,
                           margin=margin)


def rate_constant(eta_min: float, N: int, L: float, H_psi_max: float,
                  H_F_max: float) -> float:
    """Rate constant eta_min / (2 * (4 N L^2 + 4 N H_psi_max^2 + 2 H_F_max))."""
    for name, val in (("eta_min", eta_min), ("L", L),
                      ("H_psi_max", H_psi_max), ("H_F_max", H_F_max)):
        if not math.isfinite(val) or val < 0:
            raise ValueError(f"{name} must be finite and >= 0, got {val}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    denom = 4.0 * N * L ** 2 + 4.0 * N * H_psi_max ** 2 + 2.0 * H_F_max
    if denom == 0.0:
        raise ValueError("stationarity constant is zero; need L or H_F_max > 0")
    return eta_min / (2.0 * denom)


def superlinear_contraction(q: float, sigma_q: float, D: float,
                            gap: float) -> float:
    """One-step factor 1 / (1 + D sigma_q^(-2/q) gap^((2-q)/q)) for q > 2."""
    if q <= 2.0:
        raise ValueError(f"superlinear factor needs q > 2, got {q}")
    _validate_rate_args(sigma_q, D, gap)
    return 1.0 / (1.0 + D * sigma_q ** (-2.0 / q) * gap ** ((2.0 - q) / q))


def _validate_rate_args(sigma_q, D, gap0):
    for name, val in (("sigma_q", sigma_q), ("D", D), ("gap0", gap0)):
        if not (math.isfinite(val) and val > 0):
            raise ValueError(f"{name} must be positive, got {val}")


def kl_rate_bound(q: float, sigma_q: float, D: float, gap0: float,
                   k: int) -> float:
    """KL-regime bound on the objective gap after k cycles.

    q in (1, 2): sublinear closed form. q = 2: geometric decay with factor
    sigma_q / (sigma_q + D). q > 2: the gap obeys the implicit contraction
    gap_k <= gap_{k-1} / (1 + D sigma_q^(-2/q) gap_k^((2-q)/q)); the bound
    is evaluated by running that recursion with equality (each step is a
    monotone scalar solve). All regimes return gap0 at k = 0. q <= 1 is
    outside the theory and rejected.
    """
    if not math.isfinite(q) or q <= 1.0:
        raise ValueError(f"KL exponent must satisfy q > 1, got {q}")
    _validate_rate_args(sigma_q, D, gap0)
    if k < 0:
        raise ValueError(f"cycle index must be >= 0, got {k}")
    if k == 0:
        return gap0
    if q < 2.0:
        growth = 0.5 * (2.0 - q) * math.log1p(
            D * sigma_q ** (-2.0 / q) * gap0 ** ((2.0 - q) / q))
        return gap0 / (1.0 + k * growth) ** (q / (2.0 - q))
    if q == 2.0:
        return gap0 * (sigma_q / (sigma_q + D)) ** k
    # q > 2: gap_{j-1} - gap_j = beta * gap_j^(2/q) with beta = D sigma^(-2/q)
    beta = D * sigma_q ** (-2.0 / q)
    gap = gap0
    for _ in range(k):
        gap = _solve_step(gap, beta, (2.0 - q) / q)
    return gap


@dataclass
class RateFit:
    """Fitted KL exponent and constants from a solver trace."""

    q: float
    sigma_q: float
    regime: str
    D: float
    goodness: float
    f_star: float
    n_points: int


def fit_kl_exponent(run_log: RunLog, tail_fraction: float = 0.5,
                    extrapolate: bool = False) -> RateFit:
    """Estimate the exponent of gap <= sigma * S^q from a run log.

    Regresses log(F_k - F_*) on log(stat_bound_k) over the trailing
    tail_fraction of cycles. F_* defaults to the final logged F;
    extrapolate=True applies Aitken acceleration to the last three F
    values instead. Gaps at or below the numerical floor are dropped.
    Classification: |q - 2| <= 0.15 is linear, otherwise q in (1, 2) is
    sublinear and q > 2 superlinear; too few usable points or a poor
    regression yields 'inconclusive'.
    """
    if len(run_log) < 20:
        raise ValueError(
            f"rate fitting needs at least 20 cycles, got {len(run_log)}")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    F = run_log.F_values
    S = run_log.stat_bounds
    f_star = float(F[-1])
    if extrapolate:
        d1, d2 = F[-1] - F[-2], F[-2] - F[-3]
        denom = d1 - d2
        if denom != 0.0:
            candidate = float(F[-1] - d1 * d1 / denom)
            if candidate <= F[-1]:
                f_star = candidate
    D = _rate_constant_from(run_log.constants)

    tail = int(math.ceil(tail_fraction * len(run_log)))
    Ft, St = F[-tail:], S[-tail:]
    gaps = Ft - f_star
    floor = 1e-12 * (1.0 + abs(f_star))
    mask = (gaps > floor) & (St > 0) & np.isfinite(gaps) & np.isfinite(St)
    n_pts = int(mask.sum())

    def inconclusive():
        return RateFit(q=math.nan, sigma_q=math.nan, regime="inconclusive",
                       D=D, goodness=math.nan, f_star=f_star, n_points=n_pts)

    if n_pts < _MIN_FIT_POINTS:
        return inconclusive()
    logS = np.log(St[mask])
    logG = np.log(gaps[mask])
    if np.ptp(logS) < 1e-12:
        return inconclusive()
    q, intercept = np.polyfit(logS, logG, 1)
    resid = logG - (q * logS + intercept)
    goodness = float(np.sqrt(np.mean(resid ** 2)))
    if goodness > _GOODNESS_MAX:
        return inconclusive()
    if abs(q - 2.0) <= 0.15:
        regime = "linear"
    elif 1.0 < q < 2.0:
        regime = "sublinear"
    elif q > 2.0:
        regime = "superlinear"
    else:
        return inconclusive()
    return RateFit(q=float(q), sigma_q=float(np.exp(intercept)), regime=regime,
                   D=D, goodness=goodness, f_star=f_star, n_points=n_pts)


def _rate_constant_from(constants: dict) -> float:
    needed = ("eta_min", "N", "L", "H_psi_max", "H_F_max")
    if not all(k in constants for k in needed):
        return math.nan
    try:
        return rate_constant(constants["eta_min"], constants["N"], constants["L"],
                         constants["H_psi_max"], constants["H_F_max"])
    except ValueError:
        return math.nan


def rate_report_text(fit: RateFit) -> str:
    """Key: value report of a fit, one line per field."""
    lines = [
        f"regime: {fit.regime}",
        f"q: {fit.q:.17g}",
        f"sigma_q: {fit.sigma_q:.17g}",
        f"D: {fit.D:.17g}",
        f"goodness: {fit.goodness:.17g}",
        f"f_star: {fit.f_star:.17g}",
        f"n_points: {fit.n_points}",
    ]
    return "\n".join(lines) + "\n"
