"""Poke at the scalar stepsize equation behind every block update.

Each block visit solves
    2^(p-1) H_psi a^(p+1) + (2^(p-1) H_psi |x|^p + H_f) a = |g|
for its unique nonnegative root. The left side is strictly increasing, so
the root responds monotonically to each coefficient, sits inside
[0, |g|/H_f], and satisfies a * H_F = |g| once the stepsize constant is
assembled. For p = 2 the equation is a depressed cubic with an explicit
root; both paths must agree to high accuracy.
"""

import numpy as np

from cpgd import (StepsizePolyParams, adaptive_stepsize,
                  cubic_root_closed_form, solve_stepsize_poly)

base = dict(p=2, H_psi=1.0, x_norm=1.0, H_f=1.0)

print("root grows with the gradient norm:")
for g in (0.0, 0.5, 2.0, 5.0, 50.0):
    res = adaptive_stepsize(StepsizePolyParams(grad_norm=g, **base))
    ident = res.alpha * res.H_F
    print(f"  |g| = {g:>5.1f}  ->  alpha = {res.alpha:.6f}, "
          f"H_F = {res.H_F:.4f}, alpha*H_F = {ident:.6f}")

print("\nand shrinks as the curvature constant grows:")
for H_psi in (0.0, 0.5, 2.0, 10.0):
    params = StepsizePolyParams(p=2, H_psi=H_psi, x_norm=1.0, H_f=1.0,
                                grad_norm=5.0)
    print(f"  H_psi = {H_psi:>4.1f}  ->  alpha = {solve_stepsize_poly(params):.6f}")

print("\nclosed-form cubic vs the generic safeguarded Newton solver:")
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(2000):
    H_psi = float(rng.uniform(1e-3, 6000.0))
    x_norm = float(rng.uniform(0.0, 10.0))
    H_f = float(rng.uniform(0.1, 100.0))
    g = float(rng.uniform(1e-9, 1e4))
    generic = solve_stepsize_poly(
        StepsizePolyParams(p=2, H_psi=H_psi, x_norm=x_norm, H_f=H_f,
                           grad_norm=g))
    closed = cubic_root_closed_form(2 * H_psi, 2 * H_psi * x_norm ** 2 + H_f, g)
    worst = max(worst, abs(generic - closed) / closed)
print(f"  worst relative disagreement over 2000 draws: {worst:.2e}")
