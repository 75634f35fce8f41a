"""Sensitivity of the design tuned for lam = omega = 1.

R compares the trend criterion of one equidistant design at the standard
parameters with its value at other (lam, omega). Near lam = 0 it decays
like lam^2, near omega = 0 like a constant minus omega^2.
"""
import numpy as np

from coudesign.efficiency import efficiency_ratio, efficiency_surface, taylor_limit_checks

rep = taylor_limit_checks(1000)
d = rep.d
print(f"standard spacing d* = {d:.6f}")
for lam in (1e-1, 1e-2, 1e-3):
    print(f"lam={lam:g}: R/lam^2 at n=10000 = {efficiency_ratio(d, lam, 1.0, 10_000) / lam**2:.5f}")
print(f"n -> inf limit of R/lam^2: {rep.lambda_limit:.5f}")
print(f"omega expansion at n=10:      R ~ {rep.at(10)[1]:.4f} - {rep.at(10)[2]:.4f} omega^2")
print(f"omega expansion as n -> inf:  R ~ {rep.omega_intercept_limit:.4f} - "
      f"{rep.omega_slope_limit:.4f} omega^2")

grid = efficiency_surface("lambda", np.linspace(0.5, 5, 10), [0.5, 1.0, 2.0], 10)
print(grid.to_csv()[:400])
