"""Closed-form references the simulator is checked against.

Four independent pieces, all pure functions of their inputs:

* the asymptotic tail series for the spectral velocity near the critical
  time, built from Gaussian lobes marching up the k3-axis
  (``tail_eval`` / ``tail_energy_enstrophy``);
* the lobe-overlap integrals controlling the energy growth rates
  (``overlap_integral``), with their large-index asymptotics;
* the residual of the radial ansatz in the 2-D integral fixed-point
  equation for the lobe profile (``fixed_point_residual``);
* a power-series oracle that integrates the first terms of the Duhamel
  iteration by direct quadrature and direct convolution sums, with no FFTs
  and no time stepper (``SeriesOracle``) -- the solver is validated
  against it at small times.

None of this imports the solver; agreement between the two routes is
checked in the test suite, never assumed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .diagnostics import PLANCHEREL
from .errors import ConfigError, NumericError
from .grid import GridSpec, SpectralField

__all__ = [
    "TailSeriesParams",
    "tail_eval",
    "tail_truncation_bound",
    "TailQuadrature",
    "tail_energy_enstrophy",
    "overlap_integral",
    "overlap_asymptotic",
    "FixedPointParams",
    "FixedPointResult",
    "fixed_point_residual",
    "SeriesOracleSpec",
    "SeriesOracle",
    "direct_bilinear",
]

_GAUSS3_NORM = (2.0 * np.pi) ** -1.5


def _gauss3(ysq: np.ndarray) -> np.ndarray:
    """Standard 3-D Gaussian density as a function of |Y|^2."""
    return _GAUSS3_NORM * np.exp(-0.5 * ysq)


# -- tail series ----------------------------------------------------------


@dataclass(frozen=True)
class TailSeriesParams:
    """Parameters of the asymptotic lobe series.

    ``a`` is the lobe spacing along k3 (lobe p is a Gaussian of width
    sqrt(p) centered at (0, 0, p*a)); ``kappa`` the exponential rate by
    which lobe p drains as the critical time ``tau`` is approached;
    ``p0`` the first lobe retained; ``p_max`` the numerical truncation.
    ``sol_type`` "I" gives all lobes the same sign, "II" alternates them.
    ``const`` is an overall amplitude.
    """

    a: float = 20.0
    kappa: float = 1.0
    tau: float = 1.0
    p0: int = 10
    sol_type: str = "I"
    const: float = 1.0
    p_max: int = 2000

    def __post_init__(self):
        if not (self.a > 0 and self.kappa > 0):
            raise ConfigError("tail series needs a > 0 and kappa > 0")
        if self.p0 < 1:
            raise ConfigError("first retained lobe p0 must be >= 1")
        if self.p_max < self.p0:
            raise ConfigError("p_max must be >= p0")
        if self.sol_type not in ("I", "II"):
            raise ConfigError(f"sol_type must be 'I' or 'II', got {self.sol_type!r}")

    def signs(self, p: np.ndarray) -> np.ndarray:
        if self.sol_type == "I":
            return np.ones_like(p, dtype=float)
        return np.where(p % 2 == 0, 1.0, -1.0)


def _lobe_scalar(
    ksq: np.ndarray, kz: np.ndarray, delta: float, params: TailSeriesParams,
    p_lo: int, p_hi: int,
) -> np.ndarray:
    """sum_p sign_p sqrt(p) e^{-kappa p delta} g3(|Y^p|^2) / (|k|^2 + kappa p).

    The transverse-vector series equals k_perp times this scalar, since the
    transverse part of Y^p is k_perp / sqrt(p).  Vectorized over mesh
    points; loops over lobes in blocks to bound memory.
    """
    flat_ksq = ksq.reshape(-1)
    flat_kz = kz.reshape(-1)
    kperp_sq = flat_ksq - flat_kz**2
    out = np.zeros_like(flat_ksq)
    block = 256
    for start in range(p_lo, p_hi + 1, block):
        p = np.arange(start, min(start + block, p_hi + 1), dtype=float)[:, None]
        ysq = ((flat_kz[None, :] - p * params.a) ** 2 + kperp_sq[None, :]) / p
        amp = params.signs(p) * np.sqrt(p) * np.exp(-params.kappa * p * delta)
        out += np.sum(amp * _gauss3(ysq) / (flat_ksq[None, :] + params.kappa * p), axis=0)
    return out.reshape(ksq.shape)


def tail_eval(k: np.ndarray, t: float, params: TailSeriesParams) -> np.ndarray:
    """Asymptotic tail velocity at wavevectors ``k`` (shape (..., 3))."""
    if t >= params.tau:
        raise ConfigError("tail series is defined for t < tau only")
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != 3:
        raise ValueError("k must have a trailing axis of length 3")
    delta = params.tau - t
    ksq = np.sum(k**2, axis=-1)
    scalar = _lobe_scalar(ksq, k[..., 2], delta, params, params.p0, params.p_max)
    out = np.zeros_like(k)
    out[..., 0] = k[..., 0] * scalar
    out[..., 1] = k[..., 1] * scalar
    return params.const * out


def tail_truncation_bound(k: np.ndarray, t: float, params: TailSeriesParams) -> np.ndarray:
    """Certified bound on the lobes dropped beyond p_max, per point.

    For p past both p_max and 2 k3 / a, lobe p is bounded by
    |k_perp| sqrt(p) e^{-kappa p delta} exp(-(p a - k3)^2 / 2p) / (|k|^2 +
    kappa p), and consecutive bounds shrink by at least sqrt(2) e^{-a^2/4};
    the dropped sum is dominated by the first term times the geometric
    factor.  Points where p_max has not cleared 2 k3 / a get +inf.
    """
    if t >= params.tau:
        raise ConfigError("tail series is defined for t < tau only")
    k = np.asarray(k, dtype=float)
    delta = params.tau - t
    ksq = np.sum(k**2, axis=-1)
    kz = k[..., 2]
    kperp = np.sqrt(np.maximum(ksq - kz**2, 0.0))
    p1 = float(params.p_max + 1)
    ratio = math.sqrt(2.0) * math.exp(-0.25 * params.a**2) * math.exp(-params.kappa * delta)
    if ratio >= 1.0:
        return np.full(np.shape(ksq), np.inf)
    first = (
        np.sqrt(p1)
        * np.exp(-params.kappa * p1 * delta)
        * np.exp(-((p1 * params.a - kz) ** 2) / (2.0 * p1))
        / (ksq + params.kappa * p1)
    )
    bound = abs(params.const) * kperp * _GAUSS3_NORM * first / (1.0 - ratio)
    return np.where(p1 >= 2.0 * np.maximum(kz, 0.0) / params.a, bound, np.inf)


@dataclass(frozen=True)
class TailQuadrature:
    """Uniform midpoint mesh in cylindrical (rho, z) for the tail energies.

    Step 1 resolves the narrowest lobe (width sqrt(p0) >= 1 for any sane
    p0); the box extends ``sigmas`` lobe widths past the live support.
    """

    dz: float = 1.0
    drho: float = 1.0
    sigmas: float = 8.0
    chunk_rows: int = 4096

    def refine(self) -> "TailQuadrature":
        return replace(self, dz=0.5 * self.dz, drho=0.5 * self.drho)


# Lobes damped below e^{-70} of the strongest retained one contribute
# nothing at double precision and are skipped.
_LOBE_CUTOFF_LOG = 70.0

_EDGE_CELLS = 2
_EDGE_MASS_TOL = 1e-6


def tail_energy_enstrophy(
    t: float, params: TailSeriesParams, quad: TailQuadrature | None = None
) -> tuple[float, float]:
    """Energy and enstrophy of the tail field by cylindrical quadrature.

    The field is axisymmetric (k_perp times a scalar in (rho, z)), so the
    3-D integrals reduce to weighted 2-D mesh sums, streamed over z-chunks
    to keep memory flat.  Raises if a non-negligible fraction of the
    enstrophy density sits in the outermost mesh cells (support escaping
    the box).
    """
    if t >= params.tau:
        raise ConfigError("tail series is defined for t < tau only")
    quad = quad or TailQuadrature()
    delta = params.tau - t
    a, kappa = params.a, params.kappa
    p_hi = min(
        params.p_max,
        params.p0 + int(math.ceil(_LOBE_CUTOFF_LOG / (kappa * delta))),
    )
    z_lo = max(0.0, params.p0 * a - quad.sigmas * math.sqrt(params.p0))
    z_hi = p_hi * a + quad.sigmas * math.sqrt(p_hi)
    rho_max = quad.sigmas * math.sqrt(p_hi)
    n_z = int(math.ceil((z_hi - z_lo) / quad.dz))
    n_rho = int(math.ceil(rho_max / quad.drho))
    rho = (np.arange(n_rho) + 0.5) * quad.drho
    rho_w = rho**3  # |k_perp|^2 * (cylindrical rho) weight

    e_sum = 0.0
    s_sum = 0.0
    edge = 0.0
    amp_scale = math.exp(-kappa * params.p0 * delta)  # strongest lobe
    for row0 in range(0, n_z, quad.chunk_rows):
        rows = min(quad.chunk_rows, n_z - row0)
        z = z_lo + (np.arange(row0, row0 + rows) + 0.5) * quad.dz
        zcol = z[:, None]
        ksq = zcol**2 + rho[None, :] ** 2
        f = np.zeros((rows, n_rho))
        # lobes whose +-sigmas window intersects this chunk
        p_a = max(params.p0, int(math.floor((z[0] - quad.sigmas * math.sqrt(p_hi)) / a)))
        p_b = min(p_hi, int(math.ceil((z[-1] + quad.sigmas * math.sqrt(p_hi)) / a)))
        for p in range(p_a, p_b + 1):
            damp = math.exp(-kappa * (p - params.p0) * delta)
            if damp * math.sqrt(p / params.p0) < 1e-30:
                break
            width = quad.sigmas * math.sqrt(p)
            i0 = max(0, int(math.floor((p * a - width - z[0]) / quad.dz)))
            i1 = min(rows, int(math.ceil((p * a + width - z[0]) / quad.dz)) + 1)
            if i0 >= i1:
                continue
            ysq = ((zcol[i0:i1] - p * a) ** 2 + rho[None, :] ** 2) / p
            sign = 1.0 if params.sol_type == "I" or p % 2 == 0 else -1.0
            f[i0:i1] += (
                sign
                * math.sqrt(p)
                * (amp_scale * damp)
                * _gauss3(ysq)
                / (ksq[i0:i1] + kappa * p)
            )
        fsq = f**2
        e_sum += float(np.sum(rho_w * fsq))
        s_density = rho_w * ksq * fsq
        s_sum += float(np.sum(s_density))
        edge += float(np.sum(s_density[:, -_EDGE_CELLS:]))
        if row0 + rows == n_z:
            edge += float(np.sum(s_density[-_EDGE_CELLS:, :-_EDGE_CELLS]))
    if s_sum > 0.0 and edge / s_sum > _EDGE_MASS_TOL:
        raise NumericError(
            f"tail support escapes the quadrature box "
            f"(edge mass fraction {edge / s_sum:.2e})"
        )
    cell = 2.0 * np.pi * quad.dz * quad.drho * params.const**2
    return 0.5 * PLANCHEREL * cell * e_sum, PLANCHEREL * cell * s_sum


# -- overlap integrals ----------------------------------------------------


def overlap_integral(
    p: int,
    j: int,
    params: TailSeriesParams,
    rtol: float = 1e-9,
    n_start: int = 32,
    max_doublings: int = 8,
) -> float:
    """Integral of |k_perp|^2 R_p R_{p+j} over all of k-space.

    R_p(k) = sqrt(p) g3(Y^p) / (|k|^2 + kappa p).  The product of the two
    Gaussians is completed to a single Gaussian: the cross term contributes
    the exact factor exp(-j^2 a^2 / (2(2p+j))), and what is left is a
    well-conditioned positive integral around k* = (0, 0, 2p(p+j)a/(2p+j)),
    evaluated by tensor Gauss-Legendre in cylindrical coordinates with
    resolution doubling.
    """
    if p < 1 or j < 0:
        raise ConfigError("overlap indices need p >= 1, j >= 0")
    a, kappa = params.a, params.kappa
    q = p + j
    # exp(-(|Y^p|^2 + |Y^q|^2)/2) = exp(-j^2 a^2/(2(2p+j))) exp(-c2 |k-k*|^2)
    c2 = (2 * p + j) / (2.0 * p * q)
    z_star = 2.0 * p * q * a / (2 * p + j)
    sigma = 1.0 / math.sqrt(2.0 * c2)
    half = 8.0 * sigma
    pref = math.sqrt(p * q) / (2.0 * np.pi) ** 3 * math.exp(-(j * a) ** 2 / (2.0 * (2 * p + j)))

    def box_integral(n: int) -> float:
        x, w = leggauss(n)
        rho = 0.5 * half * (x + 1.0)
        w_rho = 0.5 * half * w
        z = z_star + half * x
        w_z = half * w
        rr = rho[None, :]
        zz = z[:, None]
        ksq = rr**2 + zz**2
        integrand = (
            rr**3
            * np.exp(-c2 * (rr**2 + (zz - z_star) ** 2))
            / ((ksq + kappa * p) * (ksq + kappa * q))
        )
        return float(w_z @ integrand @ w_rho)

    n = n_start
    prev = box_integral(n)
    for _ in range(max_doublings):
        n *= 2
        cur = box_integral(n)
        if abs(cur - prev) <= rtol * abs(cur):
            return 2.0 * np.pi * pref * cur
        prev = cur
    raise NumericError(f"overlap quadrature did not converge (last n = {n})")


def overlap_asymptotic(p: int, j: int, params: TailSeriesParams) -> float:
    """Large-p limit of the overlap integral: e^{-s_j^2 a^2/4} with
    s_j = j/sqrt(p), over sqrt(p) (4 pi)^{3/2} a^4."""
    s_j = j / math.sqrt(p)
    return math.exp(-0.25 * (s_j * params.a) ** 2) / (
        math.sqrt(p) * (4.0 * np.pi) ** 1.5 * params.a**4
    )


# -- radial fixed point ---------------------------------------------------


@dataclass(frozen=True)
class FixedPointParams:
    """Quadrature and test-set sizes for the radial fixed-point residual.

    ``resolution`` sets both the Gauss-Hermite order per transverse
    dimension and the Gauss-Legendre order in the mixing variable.
    ``c`` evaluates the residual at a prescribed amplitude instead of the
    least-squares optimum.
    """

    resolution: int = 32
    c: float | None = None
    r_max: float = 4.0
    n_test: int = 24

    def __post_init__(self):
        if self.resolution < 4:
            raise ConfigError("fixed-point quadrature resolution must be >= 4")
        if self.n_test < 2 or self.r_max <= 0:
            raise ConfigError("fixed-point test set is degenerate")


@dataclass(frozen=True)
class FixedPointResult:
    c_star: float
    residual: float
    lhs_scale: float


def _radial_rhs_profile(radii: np.ndarray, resolution: int) -> np.ndarray:
    """Radial component of the quadratic side at H = c Y_perp, per unit c^2.

    The two-Gaussian product in the mixing integral is rewritten as the
    standard Gaussian at Y times a normal distribution in the inner
    variable; the expectation over that normal is done by tensor
    Gauss-Hermite (the integrand is polynomial in the normalized inner
    variable, so this is exact), and the mixing variable by Gauss-Legendre
    on (0, 1).
    """
    xi, wi = hermegauss(resolution)
    wi = wi / math.sqrt(2.0 * np.pi)
    x1 = xi[:, None]
    x2 = xi[None, :]
    w2 = wi[:, None] * wi[None, :]
    xg, wg = leggauss(resolution)
    gammas = 0.5 * (xg + 1.0)
    gweights = 0.5 * wg

    out = np.zeros_like(radii)
    for gamma, gw in zip(gammas, gweights):
        om = 1.0 - gamma
        root = math.sqrt(gamma * om)
        for i, r in enumerate(radii):
            # inner variable: Yp = (1-gamma) Y + sqrt(gamma(1-gamma)) xi
            yp1 = om * r + root * x1
            yp2 = root * x2
            yp_sq = yp1**2 + yp2**2
            diff_sq_over_gamma = (
                gamma * r**2 - 2.0 * root * r * x1 + om * (x1**2 + x2**2)
            )
            kernel = -(om**1.5) * diff_sq_over_gamma + math.sqrt(gamma) * yp_sq
            out[i] += gw * float(np.sum(w2 * kernel * yp1)) / math.sqrt(om)
    gauss2 = np.exp(-0.5 * radii**2) / (2.0 * np.pi)
    return gauss2 * out


def fixed_point_residual(params: FixedPointParams | None = None) -> FixedPointResult:
    """Best-fit amplitude and residual of the radial ansatz.

    The linear side is c g2(Y) Y, the mixing side c^2 times a fixed radial
    profile; the amplitude equating them in least squares over a radial
    test set is c* = <l, q> / <q, q>, and the reported residual
    ||l - c* q|| / ||l|| is scale-invariant.  At a prescribed c = 0 both
    sides vanish identically and the residual is 0 by convention.
    """
    params = params or FixedPointParams()
    if params.c == 0.0:
        return FixedPointResult(0.0, 0.0, 0.0)
    x, _ = leggauss(params.n_test)
    radii = 0.5 * params.r_max * (x + 1.0)
    if not np.any(radii > 0):
        raise NumericError("degenerate fixed-point test set: all radii at the origin")
    lhs = np.exp(-0.5 * radii**2) / (2.0 * np.pi) * radii
    rhs = _radial_rhs_profile(radii, params.resolution)
    denom = float(rhs @ rhs)
    if denom == 0.0:
        raise NumericError("degenerate least squares: quadratic side vanishes")
    c_star = float(lhs @ rhs) / denom
    c = c_star if params.c is None else params.c
    lhs_norm = float(np.linalg.norm(c * lhs))
    resid = float(np.linalg.norm(c * lhs - c**2 * rhs))
    return FixedPointResult(c_star, resid / lhs_norm if lhs_norm else 0.0, lhs_norm)


# -- power-series oracle --------------------------------------------------


@dataclass(frozen=True)
class SeriesOracleSpec:
    """Settings for the direct-quadrature Duhamel series."""

    p_top: int = 3
    s_nodes: int = 8  # starting Gauss-Legendre order for time integrals
    rtol: float = 1e-9
    max_doublings: int = 6

    def __post_init__(self):
        if not 2 <= self.p_top <= 3:
            raise ConfigError("series oracle supports orders 2 and 3 only")
        if self.s_nodes < 2:
            raise ConfigError("need at least 2 time-quadrature nodes")


_ORACLE_NODE_LIMIT = 40_000


def _support(data: np.ndarray) -> tuple[np.ndarray, ...]:
    """Indices of nodes where any component is nonzero."""
    return np.nonzero(np.any(data != 0.0, axis=0))


def direct_bilinear(
    u: np.ndarray, w: np.ndarray, grid: GridSpec, out_dtype=None
) -> np.ndarray:
    """h^3 sum_{k'} <u(k - k'), k> P_k w(k'), by explicit pair summation.

    Quadratic in the support sizes; intended for small grids and as an
    FFT-free cross-check.  Pairs falling outside the grid are dropped,
    matching the truncated-mesh convention of the stepper, and the k = 0
    output is zero (its coupling coefficient vanishes).
    """
    iu = _support(u)
    iw = _support(w)
    if len(iu[0]) == 0 or len(iw[0]) == 0:
        return np.zeros_like(u, dtype=out_dtype or u.dtype)
    lo = np.asarray(grid.lo_units)
    ku_units = np.stack(iu, axis=1) + lo  # (mu, 3) integer wavevectors / h
    kw_units = np.stack(iw, axis=1) + lo
    uv = np.stack([u[c][iu] for c in range(3)], axis=1)  # (mu, 3)
    wv = np.stack([w[c][iw] for c in range(3)], axis=1)
    out = np.zeros_like(u, dtype=out_dtype or np.result_type(u, w))
    n = np.asarray(grid.shape)
    for b in range(len(kw_units)):
        k_units = ku_units + kw_units[b]  # output wavevectors for this k'
        idx = k_units - lo
        ok = np.all((idx >= 0) & (idx < n), axis=1)
        if not np.any(ok):
            continue
        k = k_units[ok] * grid.h  # (m, 3)
        coef = np.einsum("mc,mc->m", uv[ok], k)  # <u(k-k'), k>; 0 at k = 0
        ksq = np.einsum("mc,mc->m", k, k)
        coupling = (k @ wv[b]) / np.where(ksq > 0, ksq, 1.0)
        proj = wv[b][None, :] - coupling[:, None] * k
        contrib = coef[:, None] * proj
        flat = np.ravel_multi_index(tuple(idx[ok].T), tuple(n))
        for c in range(3):
            np.add.at(out[c].reshape(-1), flat, contrib[:, c])
    return out * grid.h**3


def _gl_nodes(t: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    return 0.5 * t * (x + 1.0), 0.5 * t * w


class SeriesOracle:
    """First terms of the Duhamel iteration by direct quadrature.

    Term 1 is the decayed initial data; term p > 1 is the time integral of
    the decay kernel against all bilinear pairings of lower terms.  Time
    integrals use Gauss-Legendre with order doubling; convolutions use
    ``direct_bilinear``.  Everything is evaluated per requested time --
    nothing is stepped, so the result is an independent reference for the
    solver at small times.
    """

    def __init__(self, v0: SpectralField, spec: SeriesOracleSpec | None = None):
        self.spec = spec or SeriesOracleSpec()
        if v0.grid.n_nodes > _ORACLE_NODE_LIMIT:
            raise ConfigError(
                f"series oracle is quadratic in support size; grid has "
                f"{v0.grid.n_nodes} nodes (limit {_ORACLE_NODE_LIMIT})"
            )
        self.v0 = v0
        self.grid = v0.grid
        self._ksq = v0.grid.ksq()

    def _decay(self, dt: float) -> np.ndarray:
        return np.exp(-dt * self._ksq)

    def term1(self, t: float) -> np.ndarray:
        return self.v0.data * self._decay(t)

    def _pair_term(self, s: float, order: int) -> np.ndarray:
        """Integrand of term `order` at inner time s (before outer decay)."""
        if order == 2:
            g1 = self.term1(s)
            return direct_bilinear(g1, g1, self.grid)
        g1 = self.term1(s)
        g2 = self.term2(s)
        return direct_bilinear(g1, g2, self.grid) + direct_bilinear(g2, g1, self.grid)

    def _time_integral(self, t: float, order: int) -> np.ndarray:
        def quadrature(n: int) -> np.ndarray:
            nodes, weights = _gl_nodes(t, n)
            acc = np.zeros_like(self.v0.data)
            for s, w in zip(nodes, weights):
                acc += w * self._decay(t - s) * self._pair_term(s, order)
            return acc

        n = self.spec.s_nodes
        prev = quadrature(n)
        scale = float(np.max(np.abs(prev)))
        for _ in range(self.spec.max_doublings):
            n *= 2
            cur = quadrature(n)
            if float(np.max(np.abs(cur - prev))) <= self.spec.rtol * max(
                scale, float(np.max(np.abs(cur)))
            ):
                return cur
            prev = cur
        raise NumericError(f"series time quadrature did not converge (order {order})")

    def term2(self, t: float) -> np.ndarray:
        if t == 0.0:
            return np.zeros_like(self.v0.data)
        return self._time_integral(t, 2)

    def term3(self, t: float) -> np.ndarray:
        if t == 0.0:
            return np.zeros_like(self.v0.data)
        return self._time_integral(t, 3)

    def term(self, p: int, t: float) -> np.ndarray:
        if p == 1:
            return self.term1(t)
        if p == 2:
            return self.term2(t)
        if p == 3:
            return self.term3(t)
        raise ConfigError(f"series oracle has no term of order {p}")

    def partial_sum(self, t: float, p_top: int | None = None) -> SpectralField:
        p_top = p_top or self.spec.p_top
        data = self.term1(t)
        for p in range(2, p_top + 1):
            data = data + self.term(p, t)
        return SpectralField(self.grid, data, t)
