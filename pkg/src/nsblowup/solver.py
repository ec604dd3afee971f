"""Time integration of the wavevector-space integral equation.

State advances through the mild (Duhamel) form

    v(k, t+dt) = exp(-dt |k|^2) v(k, t)
               + int_t^{t+dt} exp(-(t + dt - s)|k|^2) B[v(s)](k) ds

where the bilinear interaction is

    B[v](k) = h^3 sum_{k'} <v(k - k'), k> P_k v(k'),
    P_k w   = w - (<w, k> / |k|^2) k .

The time integral is treated with an integrating-factor predictor-corrector
(explicit Euler predictor, trapezoidal corrector iterated to a max-norm
tolerance), so the viscous factor is exact and only the interaction term is
approximated.  The interaction itself is evaluated through zero-padded fast
transforms: three scalar-by-vector linear convolutions, contracted with k and
projected node-wise.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .errors import ConfigError, CorrectorDivergence, NonFiniteState
from .grid import GridSpec, PaddedExtent, SpectralField, padded_extent

__all__ = [
    "SolverConfig",
    "StepReport",
    "RunSchedule",
    "RunResult",
    "ConvolutionWorkspace",
    "Stepper",
    "solenoidal_project",
    "max_divergence",
    "run",
]

# worker count for the fast transforms; results do not depend on it
_WORKERS = int(os.environ.get("NSBLOWUP_WORKERS", "1") or 1)


@dataclass(frozen=True)
class SolverConfig:
    """Stepping parameters.

    dt : fixed time step
    tol : corrector convergence threshold, max-norm over nodes and components
    max_corrector_iters : iteration cap before declaring divergence
    t_end : integration horizon
    nonlinear_enabled : disable to integrate the bare heat flow (test mode)
    """

    dt: float
    t_end: float
    tol: float = 1e-8
    max_corrector_iters: int = 50
    nonlinear_enabled: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_corrector_iters < 1:
            raise ConfigError("max_corrector_iters must be at least 1")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be non-negative, got {self.t_end}")


@dataclass(frozen=True)
class StepReport:
    iterations: int
    residual: float
    wall_time: float


@dataclass(frozen=True)
class RunSchedule:
    """Output cadence in steps.  checkpoint_every = 0 disables checkpoints."""

    cadence: int = 1
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.cadence < 1:
            raise ConfigError("cadence must be at least 1 step")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")


@dataclass
class RunResult:
    field: SpectralField
    steps: int
    reason: str  # "t_end" | "corrector_divergence" | "nonfinite"
    last_report: StepReport | None = None


class ConvolutionWorkspace:
    """Padded-transform evaluation of the interaction term on one grid.

    Caches the broadcast wavevector axes, |k|^2, and the padded transform
    geometry.  Transform sizes are fast lengths of at least twice the live
    extent per axis, so the circular product equals the linear convolution on
    the cropped window (no aliasing).
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.extent: PaddedExtent = padded_extent(grid)
        k1, k2, k3 = grid.broadcast_axes()
        self.kb = (k1, k2, k3)
        self.ksq = grid.ksq()
        inv = np.zeros_like(self.ksq)
        nz = self.ksq > 0
        inv[nz] = 1.0 / self.ksq[nz]
        self.inv_ksq = inv  # zero at the origin node
        self.origin = grid.origin

    # -- padded transforms, chained per axis so intermediates stay small --

    def _forward(self, x: np.ndarray) -> np.ndarray:
        p1, p2, p3 = self.extent.padded
        if np.iscomplexobj(x):
            s = _fft.fft(x, n=p3, axis=2, workers=_WORKERS)
        else:
            s = _fft.rfft(x, n=p3, axis=2, workers=_WORKERS)
        s = _fft.fft(s, n=p2, axis=1, workers=_WORKERS, overwrite_x=True)
        s = _fft.fft(s, n=p1, axis=0, workers=_WORKERS, overwrite_x=True)
        return s

    def _inverse(self, spec: np.ndarray, real: bool) -> np.ndarray:
        p3 = self.extent.padded[2]
        c1, c2, c3 = self.extent.crop
        x = _fft.ifft(spec, axis=0, workers=_WORKERS, overwrite_x=True)[c1]
        x = _fft.ifft(x, axis=1, workers=_WORKERS, overwrite_x=True)[:, c2]
        if real:
            x = _fft.irfft(x, n=p3, axis=2, workers=_WORKERS, overwrite_x=True)
        else:
            x = _fft.ifft(x, n=p3, axis=2, workers=_WORKERS, overwrite_x=True)
        return np.ascontiguousarray(x[:, :, c3])

    def interaction(self, data: np.ndarray) -> np.ndarray:
        """B[v] for field data of shape (3, n1, n2, n3); same shape out."""
        real = not np.iscomplexobj(data)
        spectra = [self._forward(data[c]) for c in range(3)]
        pair = {}
        for a in range(3):
            for b in range(a, 3):
                pair[(a, b)] = self._inverse(spectra[a] * spectra[b], real)
        del spectra
        k1, k2, k3 = self.kb
        out = np.empty_like(data)
        out[0] = k1 * pair[(0, 0)] + k2 * pair[(0, 1)] + k3 * pair[(0, 2)]
        out[1] = k1 * pair[(0, 1)] + k2 * pair[(1, 1)] + k3 * pair[(1, 2)]
        out[2] = k1 * pair[(0, 2)] + k2 * pair[(1, 2)] + k3 * pair[(2, 2)]
        out *= self.grid.weight
        solenoidal_project(out, self.kb, self.inv_ksq)
        out[(slice(None),) + self.origin] = 0.0
        if not np.all(np.isfinite(out if real else out.view(np.float64))):
            raise NonFiniteState("interaction term left the finite range")
        return out


def solenoidal_project(data: np.ndarray, kb, inv_ksq) -> None:
    """In-place node-wise projection onto the plane orthogonal to k.

    The origin node (|k|^2 = 0) is left untouched; callers pin it to zero.
    """
    k1, k2, k3 = kb
    coef = (data[0] * k1 + data[1] * k2 + data[2] * k3) * inv_ksq
    data[0] -= coef * k1
    data[1] -= coef * k2
    data[2] -= coef * k3


def max_divergence(field: SpectralField) -> float:
    """max_k |<v, k>| / (|v| |k|) over nodes with v != 0 -- solenoidality probe."""
    k1, k2, k3 = field.grid.broadcast_axes()
    dot = np.abs(field.data[0] * k1 + field.data[1] * k2 + field.data[2] * k3)
    vmag = np.sqrt(np.sum(np.abs(field.data) ** 2, axis=0))
    kmag = np.sqrt(field.grid.ksq())
    denom = vmag * kmag
    mask = denom > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(dot[mask] / denom[mask]))


class Stepper:
    """Integrating-factor predictor-corrector on a fixed grid and step size."""

    def __init__(self, grid: GridSpec, cfg: SolverConfig, workspace: ConvolutionWorkspace | None = None):
        self.grid = grid
        self.cfg = cfg
        self.ws = workspace or ConvolutionWorkspace(grid)
        self.decay = np.exp(-cfg.dt * self.ws.ksq)

    def step(self, field: SpectralField) -> tuple[SpectralField, StepReport]:
        """One step of size dt; returns the new field and a report.

        Raises CorrectorDivergence when the fixed-point iteration fails to
        meet tol within max_corrector_iters, and NonFiniteState when the
        state degenerates.  The input field is left untouched.
        """
        t0 = time.perf_counter()
        cfg = self.cfg
        v = field.data
        if not cfg.nonlinear_enabled:
            new = SpectralField(self.grid, self.decay * v, field.t + cfg.dt)
            return new, StepReport(0, 0.0, time.perf_counter() - t0)

        Bv = self.ws.interaction(v)
        decayed = self.decay * v
        half = 0.5 * cfg.dt * (self.decay * Bv)
        current = decayed + 2.0 * half  # predictor: exp(-dt k^2)(v + dt B[v])
        base = decayed + half
        del Bv, decayed, half

        residual = np.inf
        iterations = 0
        for iterations in range(1, cfg.max_corrector_iters + 1):
            candidate = base + (0.5 * cfg.dt) * self.ws.interaction(current)
            residual = float(np.max(np.abs(candidate - current)))
            current = candidate
            if not np.isfinite(residual):
                raise NonFiniteState(f"corrector residual became {residual}")
            if residual <= cfg.tol:
                break
        else:
            raise CorrectorDivergence(residual, cfg.max_corrector_iters)

        solenoidal_project(current, self.ws.kb, self.ws.inv_ksq)
        current[(slice(None),) + self.grid.origin] = 0.0
        new = SpectralField(self.grid, current, field.t + cfg.dt)
        return new, StepReport(iterations, residual, time.perf_counter() - t0)


class NullSink:
    """Default output consumer: ignores everything."""

    def on_tick(self, field: SpectralField, step: int, report: StepReport | None) -> None:
        pass

    def on_checkpoint(self, field: SpectralField, step: int) -> None:
        pass

    def on_finish(self, result: "RunResult") -> None:
        pass


def run(
    v0: SpectralField,
    cfg: SolverConfig,
    schedule: RunSchedule = RunSchedule(),
    sink=None,
    start_step: int = 0,
) -> RunResult:
    """Integrate from ``v0`` until t_end or the reliability horizon.

    The sink receives a tick for the initial state (unless resuming), one per
    cadence interval, and one for the final accepted state; checkpoints are
    emitted every ``checkpoint_every`` steps.  Everything is deterministic
    given the inputs -- there is no adaptivity and no randomness.
    """
    sink = sink or NullSink()
    stepper = Stepper(v0.grid, cfg)
    field = v0
    step_no = start_step
    last_tick = -1
    last_report: StepReport | None = None
    if start_step == 0:
        sink.on_tick(field, step_no, None)
        last_tick = step_no
        if schedule.checkpoint_every:
            sink.on_checkpoint(field, step_no)
    reason = "t_end"
    # half-step slack so accumulated float drift cannot drop the last step
    while field.t < cfg.t_end - 0.5 * cfg.dt:
        try:
            field, last_report = stepper.step(field)
        except CorrectorDivergence:
            reason = "corrector_divergence"
            break
        except NonFiniteState:
            reason = "nonfinite"
            break
        step_no += 1
        if step_no % schedule.cadence == 0:
            sink.on_tick(field, step_no, last_report)
            last_tick = step_no
        if schedule.checkpoint_every and step_no % schedule.checkpoint_every == 0:
            sink.on_checkpoint(field, step_no)
    if step_no != last_tick:  # make sure the last accepted state is recorded
        sink.on_tick(field, step_no, last_report)
    result = RunResult(field, step_no, reason, last_report)
    sink.on_finish(result)
    return result
