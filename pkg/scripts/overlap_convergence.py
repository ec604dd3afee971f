#!/usr/bin/env python3
# Convergence of the lobe-overlap integrals toward their closed forms.
#
# Diagonal: p^(1/2) * I_{p,0} * (4 pi)^(3/2) * a^4 -> 1 as p grows.
# Off-diagonal: I_{p,j} / I_{p,0} -> exp(-(j a / (2 sqrt(p)))^2) while the
# separation s_j = j / sqrt(p) stays order one.  Both are checked by the
# acceptance suite at fixed points; this prints the whole approach.

import math

from nsblowup.theory import TailSeriesParams, overlap_integral

A = 20.0
params = TailSeriesParams(a=A, kappa=1.0, tau=1.0, p0=10, p_max=2000)

print("diagonal normalization:")
for p in (25, 50, 100, 200, 400, 800):
    i0 = overlap_integral(p, 0, params)
    norm = math.sqrt(p) * i0 * (4.0 * math.pi) ** 1.5 * A**4
    print(f"  p={p:4d}  sqrt(p) I_p0 (4pi)^1.5 a^4 = {norm:.6f}  (dev {norm - 1.0:+.2e})")

print("off-diagonal ratios (want exp(-s_j^2 a^2 / 4)):")
for p, j in ((200, 1), (200, 2), (200, 3), (1000, 5), (1000, 7), (2000, 10)):
    ratio = overlap_integral(p, j, params) / overlap_integral(p, 0, params)
    s_j = j / math.sqrt(p)
    want = math.exp(-((s_j * A) ** 2) / 4.0)
    print(f"  p={p:4d} j={j:2d}  s_j={s_j:.3f}  ratio={ratio:.6e}  "
          f"closed form {want:.6e}  rel dev {ratio / want - 1.0:+.2e}")
