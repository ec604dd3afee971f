"""Truncated uniform wavevector mesh, field container, checkpoint format.

The integral equation is discretised by the Nystrom method on a finite box of
uniformly spaced wavevectors ``k = (m1*h, m2*h, m3*h)`` with rectangle-rule
weight ``h**3`` per node.  Mesh bounds must be integer multiples of ``h`` and
the box must contain the origin, so that the difference ``k - k'`` of two mesh
nodes lands on the same lattice and the quadratic interaction reduces to a
discrete linear (non-periodic) convolution.

Fields are stored component-major, ``data[c, i1, i2, i3]``, with the
longitudinal axis (axis 3 of the physics, last array axis) contiguous.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.fft import next_fast_len

from .errors import CheckpointError, ConfigError

__all__ = [
    "GridSpec",
    "make_grid",
    "SpectralField",
    "PaddedExtent",
    "padded_extent",
    "write_checkpoint",
    "read_checkpoint",
    "CHECKPOINT_MAGIC",
]

# relative slack when deciding whether a bound is an integer multiple of h
_COMMENSURATE_RTOL = 1e-9


def _units_of(value: float, h: float, what: str) -> int:
    """Express ``value`` as an integer number of mesh steps, or complain."""
    m = value / h
    m_int = round(m)
    if abs(m - m_int) > _COMMENSURATE_RTOL * max(1.0, abs(m)):
        raise ConfigError(f"{what} = {value} is not an integer multiple of h = {h}")
    return int(m_int)


@dataclass(frozen=True)
class GridSpec:
    """Uniform truncation box in wavevector space.

    Parameters
    ----------
    k1_min, k1_max, k2_min, k2_max : float
        Transverse bounds, integer multiples of ``h`` with min <= 0 <= max.
    k3_min, k3_max : float
        Longitudinal bounds, same constraints.  The box is usually strongly
        one-sided in this direction because the excited modes march toward
        large positive k3.
    h : float
        Mesh step, identical on all axes.

    Notes
    -----
    Bounds are canonicalised to exact float products ``m * h`` so that a grid
    rebuilt from its integer description is bit-identical (checkpoints rely
    on this).
    """

    k1_min: float
    k1_max: float
    k2_min: float
    k2_max: float
    k3_min: float
    k3_max: float
    h: float

    # filled in __post_init__
    shape: tuple[int, int, int] = dc_field(init=False, repr=False)
    origin: tuple[int, int, int] = dc_field(init=False, repr=False)
    lo_units: tuple[int, int, int] = dc_field(init=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise ConfigError(f"mesh step h must be positive, got {self.h}")
        los, his, origins, shape = [], [], [], []
        for ax, (lo, hi) in enumerate(self.bounds, start=1):
            m_lo = _units_of(lo, self.h, f"k{ax}_min")
            m_hi = _units_of(hi, self.h, f"k{ax}_max")
            if m_lo >= m_hi:
                raise ConfigError(f"empty axis {ax}: k{ax}_min >= k{ax}_max")
            if m_lo > 0 or m_hi < 0:
                raise ConfigError(f"axis {ax} bounds [{lo}, {hi}] do not contain 0")
            los.append(m_lo)
            his.append(m_hi)
            origins.append(-m_lo)
            shape.append(m_hi - m_lo + 1)
        # canonicalise bounds to exact multiples of h
        names = ("k1_min", "k1_max", "k2_min", "k2_max", "k3_min", "k3_max")
        for name, m in zip(names, (los[0], his[0], los[1], his[1], los[2], his[2])):
            object.__setattr__(self, name, m * self.h)
        object.__setattr__(self, "shape", tuple(shape))
        object.__setattr__(self, "origin", tuple(origins))
        object.__setattr__(self, "lo_units", tuple(los))

    # -- bookkeeping ------------------------------------------------------

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return (
            (self.k1_min, self.k1_max),
            (self.k2_min, self.k2_max),
            (self.k3_min, self.k3_max),
        )

    @property
    def n_nodes(self) -> int:
        n1, n2, n3 = self.shape
        return n1 * n2 * n3

    @property
    def weight(self) -> float:
        """Rectangle-rule quadrature weight of a single node."""
        return self.h**3

    def axis(self, ax: int) -> np.ndarray:
        """1-D array of wavevector components along ``ax`` (0, 1 or 2)."""
        lo = self.lo_units[ax]
        return (lo + np.arange(self.shape[ax])) * self.h

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.axis(0), self.axis(1), self.axis(2)

    def broadcast_axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Axes shaped for broadcasting against ``(n1, n2, n3)`` arrays."""
        k1, k2, k3 = self.axes()
        return k1[:, None, None], k2[None, :, None], k3[None, None, :]

    def ksq(self) -> np.ndarray:
        """Full ``|k|**2`` array, shape ``(n1, n2, n3)``.  Allocates."""
        k1, k2, k3 = self.broadcast_axes()
        return k1**2 + k2**2 + k3**2

    def wavevector(self, i1: int, i2: int, i3: int) -> np.ndarray:
        for ax, i in enumerate((i1, i2, i3)):
            if not 0 <= i < self.shape[ax]:
                raise IndexError(f"index {i} out of range on axis {ax}")
        return np.array(
            [
                (self.lo_units[0] + i1) * self.h,
                (self.lo_units[1] + i2) * self.h,
                (self.lo_units[2] + i3) * self.h,
            ]
        )

    def index_of(self, k) -> tuple[int, int, int]:
        """Mesh index of wavevector ``k``; raises if off-mesh."""
        out = []
        for ax, comp in enumerate(k):
            m = _units_of(float(comp), self.h, f"wavevector component {ax}")
            i = m - self.lo_units[ax]
            if not 0 <= i < self.shape[ax]:
                raise IndexError(f"wavevector {tuple(k)} outside the mesh box")
            out.append(i)
        return tuple(out)


def make_grid(bounds, h: float = 1.0) -> GridSpec:
    """Build a validated :class:`GridSpec` from ``((k1_min, k1_max), ...)``."""
    (a1, b1), (a2, b2), (a3, b3) = bounds
    return GridSpec(a1, b1, a2, b2, a3, b3, h)


@dataclass
class SpectralField:
    """A 3-vector field sampled on the truncation box at one instant.

    ``data`` has shape ``(3, n1, n2, n3)``.  The solver state is real
    (float64); a complex dtype is accepted so the test-only complex code path
    can verify that imaginary parts stay at round-off.
    """

    grid: GridSpec
    data: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        expected = (3,) + self.grid.shape
        if self.data.shape != expected:
            raise ValueError(f"field shape {self.data.shape} != {expected}")

    @classmethod
    def zeros(cls, grid: GridSpec, t: float = 0.0, dtype=np.float64) -> "SpectralField":
        return cls(grid, np.zeros((3,) + grid.shape, dtype=dtype), t)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.data.copy(), self.t)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.data)

    def zero_mode(self) -> np.ndarray:
        o1, o2, o3 = self.grid.origin
        return self.data[:, o1, o2, o3]


@dataclass(frozen=True)
class PaddedExtent:
    """Transform sizes and crop window for the zero-padded linear convolution.

    Each axis is padded to at least twice its live extent (fast-length
    rounded), which makes the circular transform convolution exact for the
    linear one.  The convolution of two arrays indexed by ``i`` is read off
    at padded index ``i + origin``; ``crop`` holds the corresponding slices.
    """

    padded: tuple[int, int, int]
    crop: tuple[slice, slice, slice]

    @property
    def padded_nodes(self) -> int:
        p1, p2, p3 = self.padded
        return p1 * p2 * p3


def padded_extent(grid: GridSpec) -> PaddedExtent:
    padded = []
    crop = []
    for ax in range(3):
        n = grid.shape[ax]
        o = grid.origin[ax]
        p = next_fast_len(2 * n, real=True)
        padded.append(p)
        crop.append(slice(o, o + n))
    return PaddedExtent(tuple(padded), tuple(crop))


# -- checkpoint wire format -----------------------------------------------
#
# magic "LSNS1", then a little-endian header
#   6 x int64   grid bounds in units of h (m1_lo, m1_hi, m2_lo, ..., m3_hi)
#   float64     h
#   float64     t
#   int64       solver step counter
# followed by the raw field as little-endian float64 triples, axis-major
# (i1 slowest, component fastest).  Length is checked on read.

CHECKPOINT_MAGIC = b"LSNS1"
_HEADER = struct.Struct("<6q d d q")


def write_checkpoint(field: SpectralField, step: int, path) -> None:
    """Serialise ``field`` and the solver step counter to ``path``."""
    if not field.is_real:
        raise ValueError("checkpoints hold the real solver state only")
    g = field.grid
    lo1, lo2, lo3 = g.lo_units
    n1, n2, n3 = g.shape
    header = _HEADER.pack(
        lo1, lo1 + n1 - 1, lo2, lo2 + n2 - 1, lo3, lo3 + n3 - 1, g.h, field.t, step
    )
    payload = np.ascontiguousarray(
        np.moveaxis(field.data, 0, -1), dtype="<f8"
    ).tobytes()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header)
        fh.write(payload)


def read_checkpoint(path) -> tuple[SpectralField, int]:
    """Load a checkpoint written by :func:`write_checkpoint`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    off = len(CHECKPOINT_MAGIC)
    try:
        m1_lo, m1_hi, m2_lo, m2_hi, m3_lo, m3_hi, h, t, step = _HEADER.unpack_from(
            blob, off
        )
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated header") from exc
    try:
        grid = make_grid(
            ((m1_lo * h, m1_hi * h), (m2_lo * h, m2_hi * h), (m3_lo * h, m3_hi * h)), h
        )
    except ConfigError as exc:
        raise CheckpointError(f"{path}: inconsistent header ({exc})") from exc
    raw = blob[off + _HEADER.size :]
    expected = grid.n_nodes * 3 * 8
    if len(raw) != expected:
        raise CheckpointError(
            f"{path}: payload is {len(raw)} bytes, expected {expected}"
        )
    flat = np.frombuffer(raw, dtype="<f8").reshape(grid.shape + (3,))
    data = np.ascontiguousarray(np.moveaxis(flat, -1, 0))
    return SpectralField(grid, data, t=float(t)), int(step)
