"""Adaptive per-block stepsize machinery.

Each block update solves the scalar equation

    2^(p-1) * H_psi * a^(p+1) + (2^(p-1) * H_psi * x_norm^p + H_f) * a
        = grad_norm

for its unique nonnegative root ``a`` (the pre-projection step length) and
assembles the stepsize constant

    H_F = 2^(p-1) * H_psi * x_norm^p + 2^(p-1) * H_psi * a^p + H_f,

so that ``a * H_F = grad_norm`` holds identically. The left side is
strictly increasing in ``a``, which makes the root unique and bracketed by
``[0, grad_norm / H_f]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "StepsizePolyParams",
    "StepsizeResult",
    "solve_stepsize_poly",
    "stepsize_HF",
    "adaptive_stepsize",
    "cubic_root_closed_form",
]

# grad norms below this are treated as exactly zero to keep Newton out of
# denormal arithmetic
_GRAD_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class StepsizePolyParams:
    """Coefficients of the stepsize polynomial for one block visit.

    p is the integer exponent (>= 1) of the curvature-growth bound, H_psi
    its constant (>= 0), x_norm the norm the growth term is evaluated at,
    H_f the base constant (> 0, chosen above half the block Lipschitz
    constant), and grad_norm the norm of the block partial gradient.
    """

    p: int
    H_psi: float
    x_norm: float
    H_f: float
    grad_norm: float

    def __post_init__(self):
        if not isinstance(self.p, int) or isinstance(self.p, bool):
            raise ValueError(f"p must be an integer >= 1, got {self.p!r}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        for name in ("H_psi", "x_norm", "H_f", "grad_norm"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val}")
        if self.H_psi < 0:
            raise ValueError(f"H_psi must be >= 0, got {self.H_psi}")
        if self.x_norm < 0:
            raise ValueError(f"x_norm must be >= 0, got {self.x_norm}")
        if self.H_f <= 0:
            raise ValueError(f"H_f must be > 0, got {self.H_f}")
        if self.grad_norm < 0:
            raise ValueError(f"grad_norm must be >= 0, got {self.grad_norm}")


@dataclass(frozen=True)
class StepsizeResult:
    """Root, assembled stepsize constant and residual for one block visit."""

    alpha: float
    H_F: float
    residual: float


def _poly_coeffs(params: StepsizePolyParams):
    """(leading coefficient, linear coefficient) of the stepsize polynomial."""
    scale = 2.0 ** (params.p - 1) * params.H_psi
    return scale, scale * params.x_norm ** params.p + params.H_f


def poly_residual(params: StepsizePolyParams, alpha: float) -> float:
    """Value of the stepsize polynomial minus its right-hand side."""
    lead, lin = _poly_coeffs(params)
    return lead * alpha ** (params.p + 1) + lin * alpha - params.grad_norm


def solve_stepsize_poly(params: StepsizePolyParams, tol: float = 1e-12,
                        max_iter: int = 100) -> float:
    """Unique nonnegative root of the stepsize polynomial.

    Safeguarded Newton within the bracket [0, grad_norm / H_f]; falls back
    to bisection whenever a Newton step leaves the bracket. Terminates when
    the polynomial residual is below ``tol * max(1, grad_norm)``.
    """
    g = params.grad_norm
    if g < _GRAD_UNDERFLOW:
        return 0.0
    lead, lin = _poly_coeffs(params)
    if lead == 0.0:
        return g / lin
    # the linearized root g/lin overshoots (dropping the nonnegative
    # power term can only enlarge the root), so start from the upper side
    lo, hi = 0.0, g / params.H_f
    alpha = min(g / lin, hi)
    target = tol * max(1.0, g)
    p = params.p
    for _ in range(max_iter):
        r = lead * alpha ** (p + 1) + lin * alpha - g
        if abs(r) <= target:
            return alpha
        if r > 0.0:
            hi = alpha
        else:
            lo = alpha
        slope = (p + 1) * lead * alpha ** p + lin
        step = alpha - r / slope
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        alpha = step
    raise RuntimeError(
        f"stepsize root solve did not reach residual {target:.3e} in "
        f"{max_iter} iterations (params={params})")


def stepsize_HF(params: StepsizePolyParams, alpha: float) -> float:
    """Stepsize constant assembled from the root ``alpha``."""
    if not math.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be finite and >= 0, got {alpha}")
    scale = 2.0 ** (params.p - 1) * params.H_psi
    return scale * params.x_norm ** params.p + scale * alpha ** params.p + params.H_f


def adaptive_stepsize(params: StepsizePolyParams, tol: float = 1e-12) -> StepsizeResult:
    """Solve for the root and assemble H_F in one call."""
    alpha = solve_stepsize_poly(params, tol=tol)
    return StepsizeResult(
        alpha=alpha,
        H_F=stepsize_HF(params, alpha),
        residual=abs(poly_residual(params, alpha)),
    )


def cubic_root_closed_form(a: float, c: float, g: float) -> float:
    """Nonnegative root of the depressed cubic ``a*t^3 + c*t = g``.

    Requires a > 0, c > 0, g >= 0. The cubic has exactly one real root;
    the hyperbolic-sine form below evaluates it without the cancellation
    that the plain Cardano radicals suffer for small g.
    """
    for name, val in (("a", a), ("c", c), ("g", g)):
        if not math.isfinite(val):
            raise ValueError(f"{name} must be finite, got {val}")
    if a <= 0:
        raise ValueError(f"cubic coefficient must be > 0, got {a}")
    if c <= 0:
        raise ValueError(f"linear coefficient must be > 0, got {c}")
    if g < 0:
        raise ValueError(f"right-hand side must be >= 0, got {g}")
    if g == 0.0:
        return 0.0
    # t^3 + P t = Q with P, Q > 0
    P = c / a
    Q = g / a
    s = math.sqrt(P / 3.0)
    arg = 1.5 * Q / (P * s)
    return 2.0 * s * math.sinh(math.asinh(arg) / 3.0)
