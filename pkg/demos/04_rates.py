"""Rate machinery: recurrence regimes, their bounds, and KL fitting.

Sequences obeying delta_k - delta_{k+1} >= c * delta_{k+1}^(alpha+1) decay
sublinearly (alpha in (0,1)), geometrically (alpha = 0) or superlinearly
(alpha < 0). Simulating the recurrence with equality gives the slowest
admissible sequence, which must still satisfy each regime's closed-form
bound. A solver trace on a strongly convex problem then shows the
exponent-fitting side: geometric decay is recognized as the q = 2 regime.
"""

import numpy as np

from cpgd import (RecurrenceSpec, SeparableQuadratic, SolverConfig,
                  check_rate_bounds, rate_constant, fit_kl_exponent,
                  simulate_recurrence, kl_rate_bound)
from cpgd.solver import run_cpgd

print("equality-simulated sequences vs their regime bounds")
for c, alpha, delta0, label in [
    (1.0, 0.5, 1.0, "sublinear"),
    (1.0, 0.0, 1.0, "geometric"),
    (1.0, -0.5, 1e7, "superlinear"),
]:
    seq = simulate_recurrence(RecurrenceSpec(delta0=delta0, c=c, alpha=alpha,
                                             K=1000))
    rep = check_rate_bounds(seq, c=c, alpha=alpha)
    print(f"  {label:<12} all {len(seq)} indices inside bound: {rep.all_hold}, "
        f"min margin = {rep.margin.min():.2e}")

print("\nthe alpha = 0, c = 1 sequence is exact halving:",
      bool(np.array_equal(
          simulate_recurrence(RecurrenceSpec(1.0, 1.0, 0.0, 12)),
          0.5 ** np.arange(13))))

print("\nobjective-gap bound per KL exponent (sigma = 1, D = 1/12, gap0 = 1):")
D = rate_constant(eta_min=1.0, N=1, L=1.0, H_psi_max=0.0, H_F_max=1.0)
# the q = 3 bound contracts superexponentially and leaves double range
# around k ~ 60, so it gets a shorter horizon
for q, ks in [(1.5, (0, 1, 10, 100)), (2.0, (0, 1, 10, 100)),
              (3.0, (0, 1, 10, 40))]:
    vals = [kl_rate_bound(q, 1.0, D, 1.0, k) for k in ks]
    print(f"  q = {q}: " + ", ".join(f"k={k}: {v:.4e}"
                                     for k, v in zip(ks, vals)))

# fit the exponent from an actual solver run
prob = SeparableQuadratic([2.0, -3.0, 1.5], weights=[1.0, 0.7, 1.3],
                          block_sizes=[1, 1, 1])
log = run_cpgd(prob, np.zeros(3), SolverConfig(max_cycles=900))
fit = fit_kl_exponent(log)
print(f"\nstrongly convex quadratic run: fitted q = {fit.q:.3f} "
      f"({fit.regime}), sigma_q = {fit.sigma_q:.3f}, D = {fit.D:.3e}")
