"""Observables: energies, marginals, physical-space probes, per-tick records.

Spectral conventions.  With the modified transform used throughout,
``u(x) = -i h^3 sum_k v(k) exp(-i<k, x>)``, Parseval fixes the spectral
energy and enstrophy as

    E = (2 pi)^3 int e dk,   e = |v|^2 / 2,
    S = (2 pi)^3 int s dk,   s = |k|^2 |v|^2,

with integrals realised as rectangle-rule mesh sums.  Because the solutions
of interest are complex in x-space, |u|^2-based quantities are not conserved;
the genuinely conserved pair is the unconjugated quadratic form

    E_q = (1/2) int u . u dx,    S_q = int (grad u) : (grad u) dx,

which in k-space pairs v(k) with v(-k) and therefore vanishes identically
while the support stays inside a half-space.

The physical mesh is the periodicity cell of side 2 pi / h per axis; sampled
transforms are exact Nystrom sums as long as the mesh has at least as many
points as the live grid and resolves the largest wavevector (Nyquist).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft
from scipy.fft import next_fast_len

from .errors import ConfigError
from .grid import GridSpec, SpectralField

__all__ = [
    "PLANCHEREL",
    "densities",
    "total_energy_enstrophy",
    "quadratic_invariants",
    "MarginalProfile",
    "spectral_marginal",
    "XMesh",
    "default_xmesh",
    "PhysicalField",
    "to_physical",
    "physical_marginal",
    "vorticity_and_stretching",
    "transverse_slice",
    "TimeSeriesRecord",
    "make_record",
]

PLANCHEREL = (2.0 * np.pi) ** 3


def densities(field: SpectralField) -> tuple[np.ndarray, np.ndarray]:
    """Node-wise energy and enstrophy densities (e, s)."""
    vsq = np.sum(np.abs(field.data) ** 2, axis=0)
    return 0.5 * vsq, field.grid.ksq() * vsq


def total_energy_enstrophy(field: SpectralField) -> tuple[float, float]:
    e, s = densities(field)
    w = PLANCHEREL * field.grid.weight
    return w * float(np.sum(e)), w * float(np.sum(s))


def _mirror_overlap(grid: GridSpec):
    """Slices of the region whose mirror -k is also on the mesh, plus the
    matching reversed slices."""
    fwd, rev = [], []
    for ax in range(3):
        n, o = grid.shape[ax], grid.origin[ax]
        i_lo = max(0, 2 * o - (n - 1))
        i_hi = min(n - 1, 2 * o)
        if i_lo > i_hi:
            return None, None
        fwd.append(slice(i_lo, i_hi + 1))
        rev.append(slice(2 * o - i_hi, 2 * o - i_lo + 1))
    return tuple(fwd), tuple(rev)


def quadratic_invariants(field: SpectralField) -> tuple[float, float]:
    """Unconjugated quadratic energy/enstrophy pair (E_q, S_q).

    E_q = -(2 pi)^3/2 h^3 sum <v(k), v(-k)>, S_q the |k|^2-weighted variant.
    Only wavevectors whose mirror lies on the mesh contribute.
    """
    fwd, rev = _mirror_overlap(field.grid)
    if fwd is None:
        return 0.0, 0.0
    a = field.data[(slice(None),) + fwd]
    b = field.data[(slice(None),) + rev][:, ::-1, ::-1, ::-1]
    dot = np.sum(a * b, axis=0)
    k1, k2, k3 = field.grid.broadcast_axes()
    ksq = (k1**2 + k2**2 + k3**2)[fwd]
    w = PLANCHEREL * field.grid.weight
    e_q = -0.5 * w * np.sum(dot)
    s_q = -w * np.sum(ksq * dot)
    return float(np.real(e_q)), float(np.real(s_q))


@dataclass
class MarginalProfile:
    """1-D marginal of a density along one axis.

    ``abscissa`` holds wavevector components (spectral space) or coordinates
    (physical space); ``values`` the line density, so that
    ``step * sum(values)`` recovers the corresponding plain mesh integral.
    """

    quantity: str  # "energy" | "enstrophy" | "stretching"
    space: str  # "spectral" | "physical"
    axis: int
    abscissa: np.ndarray
    values: np.ndarray
    t: float

    @property
    def step(self) -> float:
        return float(self.abscissa[1] - self.abscissa[0])

    def integral(self) -> float:
        return self.step * float(np.sum(self.values))


def spectral_marginal(field: SpectralField, quantity: str, axis: int) -> MarginalProfile:
    """Marginal density over one wavevector axis (h^2-weighted plane sums)."""
    e, s = densities(field)
    if quantity == "energy":
        den = e
    elif quantity == "enstrophy":
        den = s
    else:
        raise ValueError(f"unknown spectral quantity {quantity!r}")
    other = tuple(ax for ax in range(3) if ax != axis)
    values = field.grid.h**2 * np.sum(den, axis=other)
    return MarginalProfile(quantity, "spectral", axis, field.grid.axis(axis), values, field.t)


# -- physical space -------------------------------------------------------


@dataclass(frozen=True)
class XMesh:
    """Uniform mesh over the periodicity cell, centred on the origin.

    Axis ``ax`` has ``shape[ax]`` points spaced ``2 pi / (h * shape[ax])``;
    the origin is at index ``shape[ax] // 2``.
    """

    shape: tuple[int, int, int]
    h: float

    def spacing(self, ax: int) -> float:
        return 2.0 * np.pi / (self.h * self.shape[ax])

    def coords(self, ax: int) -> np.ndarray:
        m = self.shape[ax]
        return (np.arange(m) - m // 2) * self.spacing(ax)

    def cell_volume(self) -> float:
        return self.spacing(0) * self.spacing(1) * self.spacing(2)


def _axis_coords(h: float, m: int) -> np.ndarray:
    return (np.arange(m) - m // 2) * (2.0 * np.pi / (h * m))


def default_xmesh(grid: GridSpec) -> XMesh:
    """Smallest fast-sized mesh that embeds the grid and satisfies Nyquist."""
    shape = []
    for ax in range(3):
        n = grid.shape[ax]
        m_abs = max(abs(grid.lo_units[ax]), grid.lo_units[ax] + n - 1)
        shape.append(next_fast_len(max(n, 2 * m_abs + 1)))
    return XMesh(tuple(shape), grid.h)


def _check_mesh(grid: GridSpec, mesh: XMesh) -> None:
    if mesh.h != grid.h:
        raise ConfigError("x-mesh step does not match the grid")
    for ax in range(3):
        n = grid.shape[ax]
        m_abs = max(abs(grid.lo_units[ax]), grid.lo_units[ax] + n - 1)
        needed = max(n, 2 * m_abs + 1)
        if mesh.shape[ax] < needed:
            raise ConfigError(
                f"x-mesh axis {ax} has {mesh.shape[ax]} points, "
                f"needs >= {needed} (Nyquist / embedding)"
            )


@dataclass
class PhysicalField:
    mesh: XMesh
    data: np.ndarray  # (3, M1, M2, M3) complex
    t: float


def _axis_phase(grid: GridSpec, mesh: XMesh, ax: int) -> np.ndarray:
    k_min = grid.lo_units[ax] * grid.h
    return np.exp(-1j * k_min * mesh.coords(ax))


def _transform_scalar(grid: GridSpec, mesh: XMesh, comp: np.ndarray) -> np.ndarray:
    """h^3 sum_k f(k) exp(-i<k, x>) sampled on the mesh (no -i factor)."""
    m1, m2, m3 = mesh.shape
    buf = np.zeros((m1, m2, m3), dtype=complex)
    n1, n2, n3 = comp.shape
    buf[:n1, :n2, :n3] = comp
    out = _fft.fftn(buf, overwrite_x=True)
    out = np.roll(out, (m1 // 2, m2 // 2, m3 // 2), axis=(0, 1, 2))
    out *= _axis_phase(grid, mesh, 0)[:, None, None]
    out *= _axis_phase(grid, mesh, 1)[None, :, None]
    out *= _axis_phase(grid, mesh, 2)[None, None, :]
    out *= grid.h**3
    return out


def to_physical(field: SpectralField, mesh: XMesh | None = None) -> PhysicalField:
    """Sample u(x) = -i h^3 sum_k v(k) exp(-i<k, x>) on a physical mesh."""
    mesh = mesh or default_xmesh(field.grid)
    _check_mesh(field.grid, mesh)
    data = np.empty((3,) + mesh.shape, dtype=complex)
    for c in range(3):
        data[c] = -1j * _transform_scalar(field.grid, mesh, field.data[c])
    return PhysicalField(mesh, data, field.t)


def _partial_transform(grid: GridSpec, comp: np.ndarray, axis: int, m: int) -> np.ndarray:
    """h * sum_{k_axis} f exp(-i k_axis x) along one axis, other axes in k."""
    moved = np.moveaxis(comp, axis, -1)
    buf = np.zeros(moved.shape[:-1] + (m,), dtype=complex)
    buf[..., : moved.shape[-1]] = moved
    out = _fft.fft(buf, axis=-1, overwrite_x=True)
    out = np.roll(out, m // 2, axis=-1)
    k_min = grid.lo_units[axis] * grid.h
    out *= np.exp(-1j * k_min * _axis_coords(grid.h, m))
    out *= grid.h
    return out  # (..., m) with the transformed axis last


def physical_marginal(
    field: SpectralField, quantity: str, axis: int, m: int | None = None
) -> MarginalProfile:
    """x-space marginal of |u|^2/2 or |grad u|^2 along one axis.

    Uses Parseval in the two untransformed directions, so only 1-D
    transforms along ``axis`` are needed -- no full 3-D sample.
    """
    grid = field.grid
    n = grid.shape[axis]
    m_abs = max(abs(grid.lo_units[axis]), grid.lo_units[axis] + n - 1)
    m = m or next_fast_len(max(n, 2 * m_abs + 1))
    if m < max(n, 2 * m_abs + 1):
        raise ConfigError(f"marginal mesh too coarse on axis {axis}")
    # transverse Parseval factor: (2 pi)^2 h^2 per remaining k-plane sum
    plane = (2.0 * np.pi) ** 2 * grid.h**2
    others = tuple(ax for ax in range(3) if ax != axis)
    if quantity == "energy":
        acc = 0.0
        for c in range(3):
            psi = _partial_transform(grid, field.data[c], axis, m)
            acc = acc + np.sum(np.abs(psi) ** 2, axis=(0, 1))
        values = 0.5 * plane * acc
    elif quantity == "enstrophy":
        kA = [grid.axis(ax) for ax in range(3)]
        ko = np.add.outer(kA[others[0]] ** 2, kA[others[1]] ** 2)  # transverse |k|^2
        k_along = kA[axis]
        acc = 0.0
        for c in range(3):
            psi = _partial_transform(grid, field.data[c], axis, m)
            acc = acc + np.sum(ko[..., None] * np.abs(psi) ** 2, axis=(0, 1))
            dpsi = _partial_transform(
                grid,
                field.data[c] * np.expand_dims(k_along, tuple(o for o in others)),
                axis,
                m,
            )
            acc = acc + np.sum(np.abs(dpsi) ** 2, axis=(0, 1))
        values = plane * acc
    else:
        raise ValueError(f"unknown physical quantity {quantity!r}")
    return MarginalProfile(quantity, "physical", axis, _axis_coords(grid.h, m), values, field.t)


def vorticity_and_stretching(
    field: SpectralField, mesh: XMesh | None = None, e0: float = 1.0
) -> tuple[PhysicalField, PhysicalField, MarginalProfile]:
    """Vorticity, stretching vector w = (omega . grad) u, and W3 profile.

    W3(x3) = int |w|^2 dx1 dx2 / e0; the e0 division keeps the profile
    comparable across runs with different initial energies.
    """
    grid = field.grid
    mesh = mesh or default_xmesh(grid)
    _check_mesh(grid, mesh)
    k1, k2, k3 = grid.broadcast_axes()
    kvec = (k1, k2, k3)
    # omega_c = -T[(k x v)_c]
    cross = (
        k2 * field.data[2] - k3 * field.data[1],
        k3 * field.data[0] - k1 * field.data[2],
        k1 * field.data[1] - k2 * field.data[0],
    )
    omega = np.empty((3,) + mesh.shape, dtype=complex)
    for c in range(3):
        omega[c] = -_transform_scalar(grid, mesh, cross[c])
    del cross
    # w_c = sum_d omega_d * du_c/dx_d, with du_c/dx_d = -T[k_d v_c]
    w = np.zeros((3,) + mesh.shape, dtype=complex)
    for c in range(3):
        for d in range(3):
            w[c] -= omega[d] * _transform_scalar(grid, mesh, kvec[d] * field.data[c])
    wsq = np.sum(np.abs(w) ** 2, axis=0)
    values = mesh.spacing(0) * mesh.spacing(1) * np.sum(wsq, axis=(0, 1)) / e0
    profile = MarginalProfile("stretching", "physical", 2, mesh.coords(2), values, field.t)
    return (
        PhysicalField(mesh, omega, field.t),
        PhysicalField(mesh, w, field.t),
        profile,
    )


def transverse_slice(field: SpectralField, k3_value: float):
    """Raw (k1, k2, v1, v2, |v|) arrays of one transverse plane, for export."""
    i3 = field.grid.index_of((0.0, 0.0, k3_value))[2]
    k1, k2 = np.meshgrid(field.grid.axis(0), field.grid.axis(1), indexing="ij")
    v1 = field.data[0, :, :, i3]
    v2 = field.data[1, :, :, i3]
    vmag = np.sqrt(np.sum(np.abs(field.data[:, :, :, i3]) ** 2, axis=0))
    return k1, k2, v1, v2, vmag


# -- per-tick record ------------------------------------------------------


@dataclass(frozen=True)
class TimeSeriesRecord:
    """One cadence tick of the scalar time series."""

    step: int
    t: float
    energy: float
    enstrophy: float
    quad_energy: float
    quad_enstrophy: float
    divergence: float
    max_s3_location: float
    edge_fraction: float

    CSV_FIELDS = (
        "step",
        "t",
        "t_mag",
        "energy",
        "enstrophy",
        "quad_energy",
        "quad_enstrophy",
        "divergence",
        "max_s3_location",
        "edge_fraction",
    )

    def csv_row(self) -> list:
        return [
            self.step,
            self.t,
            self.t * 1e7,  # blow-up times are O(1e-4); 1e-7 units read better
            self.energy,
            self.enstrophy,
            self.quad_energy,
            self.quad_enstrophy,
            self.divergence,
            self.max_s3_location,
            self.edge_fraction,
        ]


def solenoidal_defect(field: SpectralField) -> float:
    """Max |<v(k), k>| over the mesh, normalized by the field/mesh scale.

    The scale is max over nodes of |v(k)| |k|, so a perfectly projected
    field reports pure rounding noise regardless of amplitude.
    """
    k1, k2, k3 = field.grid.broadcast_axes()
    dot = field.data[0] * k1 + field.data[1] * k2 + field.data[2] * k3
    num = float(np.max(np.abs(dot)))
    kmag = np.sqrt(field.grid.ksq())
    den = float(np.max(np.sqrt(np.sum(np.abs(field.data) ** 2, axis=0)) * kmag))
    return num / den if den > 0.0 else 0.0


def make_record(field: SpectralField, step: int) -> TimeSeriesRecord:
    e_tot, s_tot = total_energy_enstrophy(field)
    e_q, s_q = quadratic_invariants(field)
    div = solenoidal_defect(field)
    margs = [spectral_marginal(field, "enstrophy", ax) for ax in range(3)]
    s3 = margs[2]
    loc = float(s3.abscissa[int(np.argmax(s3.values))])
    # enstrophy within two cells of a spectral box face (worst axis), as a
    # fraction of the total: once this is non-negligible the truncated
    # mesh is lossy
    total = float(np.sum(s3.values))
    if total == 0.0:
        frac = 0.0
    else:
        frac = max(
            float(np.sum(m.values[:2]) + np.sum(m.values[-2:])) / total for m in margs
        )
    return TimeSeriesRecord(step, field.t, e_tot, s_tot, e_q, s_q, div, loc, frac)
