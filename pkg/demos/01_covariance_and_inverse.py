"""Covariance of the complex OU process at an irregular design.

The real/imaginary pair is a damped rotation, so the covariance between
two observations is ``exp(-lam tau)`` times a 2x2 rotation by ``omega tau``.
Its inverse is block tridiagonal, which is what keeps everything else O(n).
"""
import numpy as np

from coudesign import Design, OUParams
from coudesign.kernel import covariance_inverse_closed, covariance_matrix

p = OUParams(lam=0.8, omega=2.5)
dz = Design([0.0, 0.3, 1.1, 1.2, 2.6])

c = covariance_matrix(p, dz)
c_inv = covariance_inverse_closed(p, dz)
print("covariance block between t0 and t1:\n", c[2:4, 0:2].round(4))
print("max |C C^-1 - I| =", np.abs(c @ c_inv - np.eye(c.shape[0])).max())

# blocks further than one step apart vanish in the inverse
n = dz.n
far = max(np.abs(c_inv[2 * i:2 * i + 2, 2 * j:2 * j + 2]).max()
          for i in range(n) for j in range(n) if abs(i - j) > 1)
print("largest entry outside the tridiagonal band:", far)
