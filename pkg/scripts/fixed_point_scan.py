#!/usr/bin/env python3
"""Radial fixed-point residual against quadrature resolution.

Prints the least-squares amplitude c* and the normalized residual for a
doubling ladder of quadrature orders, so one can see what is converged
(c*) and what is not (the residual itself, which saturates near 1 --
the single-mode ansatz does not close; the acceptance suite documents
this as an expected failure).
"""

from nsblowup.theory import FixedPointParams, fixed_point_residual

for resolution in (8, 16, 32, 64, 128):
    res = fixed_point_residual(FixedPointParams(resolution=resolution))
    print(f"resolution {resolution:4d}:  c* = {res.c_star:.9f}   "
          f"residual = {res.residual:.6f}   lhs scale = {res.lhs_scale:.4e}")
