"""Optimal spacings for each criterion, and the one that has none."""
from coudesign import OUParams
from coudesign.solver import (
    optimal_cov_joint_spacing,
    optimal_omega_spacing,
    optimal_trend_spacing,
    optimize_all_params,
    reject_lambda_design,
)

p = OUParams(lam=1.0, omega=1.0)
print("trend:      d* =", optimal_trend_spacing(p).spacing)
print("omega:      d  =", optimal_omega_spacing(p).spacing)
print("lam+omega:  d  =", optimal_cov_joint_spacing(p).spacing)
print("lambda:    ", reject_lambda_design(p, n=5).as_dict())

# the four-parameter optimum is checked over free spacings, not assumed equidistant
for n in (3, 5, 8):
    eq = optimize_all_params(OUParams(1.0, 4.0), n)
    free = optimize_all_params(OUParams(1.0, 4.0), n, mode="free")
    print(f"all params, n={n}: equidistant d={eq.spacing:.8f}, "
          f"free spread={free.spread:.1e}, objective gap={free.objective - eq.objective:.1e}")

# faster rotation: shorter optimal spacing, and n matters less
for om in (0.5, 2.0, 8.0):
    ds = [optimize_all_params(OUParams(1.0, om), n).spacing for n in (2, 10)]
    print(f"omega={om:4.1f}: trend d*={optimal_trend_spacing(OUParams(1.0, om)).spacing:.4f}, "
          f"all-params d(n=2)={ds[0]:.4f}, d(n=10)={ds[1]:.4f}")
