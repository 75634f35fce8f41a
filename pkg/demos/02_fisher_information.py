"""Fisher information for the trend and covariance parameters.

For a constant trend the trend block is ``Q I_2`` with ``Q = 1 + sum g(d_j)``;
the (lambda, omega) block is diagonal. Both closed forms are compared
with the dense trace formula.
"""
import numpy as np

from coudesign import CHANDLER, CONSTANT, Design, OUParams
from coudesign.fisher import fisher_blocks, oracle_full_fim

p = OUParams(lam=1.0, omega=1.0)
dz = Design.equidistant(6, 0.35)

for trend in (CONSTANT, CHANDLER):
    fb = fisher_blocks(p, dz, trend)
    dense = oracle_full_fim(p, dz, trend)
    print(f"{trend.name:9s} Q={fb.q_n:.6f}  I_lambda={fb.i_lambda:.6f}  "
          f"I_omega={fb.i_omega:.6f}  det={fb.det:.6f}")
    print("          max deviation from dense oracle:", np.abs(fb.matrix - dense).max())

# with omega = 0 the trend information keeps growing with the spacing
for d in (1.0, 5.0, 25.0):
    print(f"omega=0, d={d:5.1f}: Q={fisher_blocks(OUParams(1.0, 0.0), Design.equidistant(3, d), CONSTANT).q_n:.6f}")
