#!/usr/bin/env python3
# Divergence exponents of the closed-form tail energies, both families.
#
# For each family the energy E(t) and enstrophy S(t) are evaluated on a
# log-spaced ladder of distances delta = tau - t, and the exponents come
# from a straight log-log fit.  Type I should sit near E ~ delta^-1 with
# an S/E gap of 2; the type II gap is flattened by the lobe-sign
# cancellations (see the acceptance suite, criterion 6, which fails that
# clause on purpose).

import numpy as np
from scipy import stats

from nsblowup.theory import TailSeriesParams, tail_energy_enstrophy

A = 20.0
KAPPA = 1.0
TAU = 1.0
P0 = 10
P_MAX = 2000
DELTAS = np.logspace(np.log10(1.5e-3), np.log10(1.5e-2), 8)


def exponents(sol_type):
    params = TailSeriesParams(a=A, kappa=KAPPA, tau=TAU, p0=P0, p_max=P_MAX,
                              sol_type=sol_type)
    es, ss = [], []
    for d in DELTAS:
        e, s = tail_energy_enstrophy(TAU - d, params)
        es.append(e)
        ss.append(s)
    log_d = np.log(DELTAS)
    beta_e = -stats.linregress(log_d, np.log(es)).slope
    beta_s = -stats.linregress(log_d, np.log(ss)).slope
    return beta_e, beta_s, es, ss


def main():
    print(f"a={A} kappa={KAPPA} tau={TAU} p0={P0} p_max={P_MAX}")
    print(f"{'family':>6} {'beta_E':>8} {'beta_S':>8} {'gap':>8}")
    for sol in ("I", "II"):
        be, bs, es, ss = exponents(sol)
        print(f"{sol:>6} {be:8.4f} {bs:8.4f} {bs - be:8.4f}")
        for d, e, s in zip(DELTAS, es, ss):
            print(f"        delta={d:.4e}  E={e:.6e}  S={s:.6e}")


if __name__ == "__main__":
    main()
