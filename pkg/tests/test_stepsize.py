import math

import numpy as np
import pytest

from cpgd.stepsize import (StepsizePolyParams, adaptive_stepsize,
                           cubic_root_closed_form, poly_residual,
                           solve_stepsize_poly, stepsize_HF)


def bisect_root(fn, lo, hi, iters=200):
    """Independent bisection oracle; fn(lo) <= 0 <= fn(hi)."""
    flo = fn(lo)
    if flo == 0.0:
        return lo
    assert flo < 0 and fn(hi) >= 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def poly_fn(params):
    def g(a):
        scale = 2.0 ** (params.p - 1) * params.H_psi
        return (scale * a ** (params.p + 1)
                + (scale * params.x_norm ** params.p + params.H_f) * a
                - params.grad_norm)
    return g


def test_unit_root_example():
    # 2*1^3 + (2+1)*1 = 5
    params = StepsizePolyParams(p=2, H_psi=1.0, x_norm=1.0, H_f=1.0, grad_norm=5.0)
    alpha = solve_stepsize_poly(params)
    assert alpha == pytest.approx(1.0, rel=1e-12)
    oracle = bisect_root(poly_fn(params), 0.0, params.grad_norm / params.H_f)
    assert alpha == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_zero_gradient_gives_zero_root(p):
    params = StepsizePolyParams(p=p, H_psi=2.0, x_norm=3.0, H_f=1.0, grad_norm=0.0)
    assert solve_stepsize_poly(params) == 0.0


def test_underflow_gradient_gives_zero_root():
    params = StepsizePolyParams(p=2, H_psi=1.0, x_norm=1.0, H_f=1.0,
                                grad_norm=1e-308)
    assert solve_stepsize_poly(params) == 0.0


def test_psi_free_case_is_linear():
    params = StepsizePolyParams(p=1, H_psi=0.0, x_norm=5.0, H_f=2.0, grad_norm=6.0)
    assert solve_stepsize_poly(params) == pytest.approx(3.0, rel=1e-14)


def test_HF_direct_substitution():
    params = StepsizePolyParams(p=2, H_psi=1.0, x_norm=1.0, H_f=1.0, grad_norm=5.0)
    assert stepsize_HF(params, 1.0) == pytest.approx(5.0, rel=1e-14)
    params = StepsizePolyParams(p=3, H_psi=0.0, x_norm=9.0, H_f=7.0, grad_norm=1.0)
    assert stepsize_HF(params, 123.4) == pytest.approx(7.0)
    params = StepsizePolyParams(p=1, H_psi=3.0, x_norm=2.0, H_f=1.0, grad_norm=1.0)
    assert stepsize_HF(params, 0.5) == pytest.approx(8.5, rel=1e-14)


def test_invalid_params_rejected():
    with pytest.raises(ValueError, match="H_f"):
        StepsizePolyParams(p=1, H_psi=1.0, x_norm=1.0, H_f=0.0, grad_norm=1.0)
    with pytest.raises(ValueError, match="p must be"):
        StepsizePolyParams(p=0, H_psi=1.0, x_norm=1.0, H_f=1.0, grad_norm=1.0)
    with pytest.raises(ValueError, match="p must be"):
        StepsizePolyParams(p=1.5, H_psi=1.0, x_norm=1.0, H_f=1.0, grad_norm=1.0)
    with pytest.raises(ValueError, match="finite"):
        StepsizePolyParams(p=1, H_psi=math.inf, x_norm=1.0, H_f=1.0, grad_norm=1.0)
    with pytest.raises(ValueError, match="grad_norm"):
        StepsizePolyParams(p=1, H_psi=1.0, x_norm=1.0, H_f=1.0, grad_norm=-1.0)


def draw_params(rng, p=None):
    return StepsizePolyParams(
        p=int(p if p is not None else rng.integers(1, 4)),
        H_psi=float(rng.uniform(0.0, 10.0)),
        x_norm=float(rng.uniform(0.0, 10.0)),
        H_f=float(rng.uniform(0.1, 10.0)),
        grad_norm=float(rng.uniform(0.0, 100.0)),
    )


def test_random_draws_residual_bracket_oracle_and_identity():
    rng = np.random.default_rng(20240811)
    for _ in range(400):
        params = draw_params(rng)
        res = adaptive_stepsize(params)
        bracket_hi = params.grad_norm / params.H_f
        assert 0.0 <= res.alpha <= bracket_hi * (1 + 1e-12)
        assert res.residual <= 1e-12 * max(1.0, params.grad_norm)
        assert res.H_F >= params.H_f
        if params.grad_norm > 0:
            # the chain identity alpha * H_F = grad_norm
            assert res.alpha * res.H_F == pytest.approx(
                params.grad_norm, rel=1e-10)
            oracle = bisect_root(poly_fn(params), 0.0, bracket_hi)
            assert res.alpha == pytest.approx(oracle, rel=1e-10)


def test_monotonicity_in_each_parameter():
    rng = np.random.default_rng(5)
    for _ in range(50):
        base = draw_params(rng)
        if base.grad_norm == 0.0:
            continue
        a0 = solve_stepsize_poly(base)
        up = StepsizePolyParams(base.p, base.H_psi, base.x_norm, base.H_f,
                                base.grad_norm * 1.7)
        assert solve_stepsize_poly(up) >= a0 - 1e-14
        for attr in ("H_psi", "x_norm", "H_f"):
            kwargs = dict(p=base.p, H_psi=base.H_psi, x_norm=base.x_norm,
                          H_f=base.H_f, grad_norm=base.grad_norm)
            kwargs[attr] = kwargs[attr] * 1.9 + 0.3
            assert solve_stepsize_poly(StepsizePolyParams(**kwargs)) \
                <= a0 * (1 + 1e-12)


def test_cubic_factorized_example():
    # 2a^3 + 3a - 5 = (a - 1)(2a^2 + 2a + 5)
    root = cubic_root_closed_form(2.0, 3.0, 5.0)
    assert root == pytest.approx(1.0, rel=1e-14)
    oracle = bisect_root(lambda a: 2 * a ** 3 + 3 * a - 5, 0.0, 5.0 / 3.0)
    assert root == pytest.approx(oracle, rel=1e-10)


def test_cubic_zero_rhs():
    assert cubic_root_closed_form(1.0, 1.0, 0.0) == 0.0


def test_cubic_rejects_bad_coefficients():
    with pytest.raises(ValueError):
        cubic_root_closed_form(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        cubic_root_closed_form(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        cubic_root_closed_form(1.0, 1.0, -1.0)


def test_cubic_agrees_with_generic_solver_including_large_scale():
    # includes the orthogonality-penalty coefficient scale a = 12 * 1000
    rng = np.random.default_rng(99)
    for k in range(300):
        if k % 3 == 0:
            H_psi = 6000.0  # lam = 1000
            x_norm = float(rng.uniform(0.0, 10.0))
            H_f = float(rng.uniform(0.5, 5000.0))
            grad = float(rng.uniform(0.0, 1e4))
        else:
            H_psi = float(rng.uniform(0.01, 10.0))
            x_norm = float(rng.uniform(0.0, 10.0))
            H_f = float(rng.uniform(0.1, 10.0))
            grad = float(rng.uniform(0.0, 100.0))
        params = StepsizePolyParams(p=2, H_psi=H_psi, x_norm=x_norm, H_f=H_f,
                                    grad_norm=grad)
        generic = solve_stepsize_poly(params)
        closed = cubic_root_closed_form(
            2.0 * H_psi, 2.0 * H_psi * x_norm ** 2 + H_f, grad)
        assert closed == pytest.approx(generic, rel=1e-10, abs=1e-300)


def test_residual_helper_consistency():
    params = StepsizePolyParams(p=2, H_psi=1.0, x_norm=1.0, H_f=1.0, grad_norm=5.0)
    assert poly_residual(params, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert poly_residual(params, 0.0) == -5.0
