"""Closed-loop time-domain simulation, cost metric, and trajectory summaries.

The simulated state stacks the plant chain, an optional LTI disturbance
generator, and the observer: s = [x; chi; x_hat; d_hat].  In CONTINUOUS
mode the control and the measurement are wired into the vector field;
in SAMPLED mode both are held between sample instants (zero-order hold)
and the observer integrates its own dynamics driven by the held values.

A compiled integration kernel is used when available; a pure-Python
propagator with identical semantics is the fallback.
"""

from __future__ import annotations

import io
import math

import numpy as np

from .plant import CanonicalPlant

try:
    from . import _simcore
    _HAVE_COMPILED = True
except ImportError:
    _simcore = None
    _HAVE_COMPILED = False
from . import _simpy

__all__ = [
    "CONTINUOUS",
    "UnstableBlowup",
    "DisturbanceModel",
    "SimConfig",
    "Trajectory",
    "CostBreakdown",
    "SummaryMetrics",
    "simulate",
    "cost",
    "summarize",
    "default_backend",
]

# sentinel for "no sampling": observer and control run inside the ODE
CONTINUOUS = "continuous"

BLOWUP_LIMIT = 1e9


class UnstableBlowup(RuntimeError):
    """The simulated state exceeded the blowup limit."""

    def __init__(self, time: float):
        super().__init__(
            f"state norm exceeded {BLOWUP_LIMIT:g} at t = {time:.6g}"
        )
        self.time = float(time)


def default_backend() -> str:
    """Name of the integration backend used when none is requested."""
    return "compiled" if _HAVE_COMPILED else "python"


def _integrator_class(backend):
    if backend is None:
        backend = default_backend()
    if backend == "compiled":
        if not _HAVE_COMPILED:
            raise ValueError("compiled backend is not available")
        return _simcore.Integrator, "compiled"
    if backend == "python":
        return _simpy.Integrator, "python"
    raise ValueError(f"unknown backend {backend!r}")


class DisturbanceModel:
    """Constant disturbance plus an optional LTI generator.

    d(t) = d_ss + C_d chi(t), with chi' = A_d chi from chi(0) = chi0.
    Omitting the generator gives the constant disturbance d_ss.
    """

    __slots__ = ("d_ss", "A_d", "C_d", "chi0")

    def __init__(self, d_ss: float = 0.0, A_d=None, C_d=None, chi0=None):
        self.d_ss = float(d_ss)
        given = [A_d is not None, C_d is not None, chi0 is not None]
        if any(given) and not all(given):
            raise ValueError("A_d, C_d, chi0 must be given together")
        if A_d is None:
            self.A_d = None
            self.C_d = None
            self.chi0 = None
            return
        A_d = np.asarray(A_d, dtype=float)
        if A_d.ndim != 2 or A_d.shape[0] != A_d.shape[1]:
            raise ValueError("A_d must be square")
        m = A_d.shape[0]
        C_d = np.asarray(C_d, dtype=float).reshape(-1)
        chi0 = np.asarray(chi0, dtype=float).reshape(-1)
        if C_d.size != m or chi0.size != m:
            raise ValueError("C_d and chi0 must match the order of A_d")
        self.A_d = A_d.copy()
        self.C_d = C_d.copy()
        self.chi0 = chi0.copy()

    @property
    def order(self) -> int:
        return 0 if self.A_d is None else self.A_d.shape[0]


class SimConfig:
    """Simulation settings: grid, sampling, noise, cost weight, initial state."""

    __slots__ = ("dt", "T", "sample_period", "noise_variance", "seed",
                 "lam", "x0", "xhat0", "dhat0")

    def __init__(self, T: float, dt: float = 1e-3,
                 sample_period=CONTINUOUS, noise_variance: float = 0.0,
                 seed: int = 0, lam: float = 0.1,
                 x0=None, xhat0=None, dhat0: float = 0.0):
        dt = float(dt)
        T = float(T)
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if T <= 0.0:
            raise ValueError("T must be positive")
        self.dt = dt
        self.T = T
        self.noise_variance = float(noise_variance)
        if self.noise_variance < 0.0:
            raise ValueError("noise_variance must be non-negative")
        if sample_period != CONTINUOUS:
            sp = float(sample_period)
            if sp < dt:
                raise ValueError("sample_period must be at least dt")
            stride = round(sp / dt)
            if abs(stride * dt - sp) > 1e-9 * max(sp, dt):
                raise ValueError("sample_period must be an integer multiple "
                                 "of dt")
            sample_period = sp
        elif self.noise_variance > 0.0:
            raise ValueError("output noise requires a sampling period")
        self.sample_period = sample_period
        self.seed = int(seed)
        self.lam = float(lam)
        if self.lam < 0.0:
            raise ValueError("lam must be non-negative")
        self.x0 = None if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
        self.xhat0 = (None if xhat0 is None
                      else np.asarray(xhat0, dtype=float).reshape(-1))
        self.dhat0 = float(dhat0)

    @property
    def nsteps(self) -> int:
        # guarded floor so exact multiples are not lost to rounding
        return int(math.floor(self.T / self.dt + 1e-9))

    @property
    def is_sampled(self) -> bool:
        return self.sample_period != CONTINUOUS


class Trajectory:
    """Time series of one closed-loop run."""

    __slots__ = ("t", "x", "xhat", "dhat", "u", "y", "d")

    def __init__(self, t, x, xhat, dhat, u, y, d):
        self.t = t
        self.x = x
        self.xhat = xhat
        self.dhat = dhat
        self.u = u
        self.y = y
        self.d = d

    def to_csv(self, path_or_file) -> None:
        """Write the trajectory: t,x1..,xhat1..,dhat,u,y,d per grid point."""
        rho = self.x.shape[1]
        header = (["t"]
                  + [f"x{i+1}" for i in range(rho)]
                  + [f"xhat{i+1}" for i in range(rho)]
                  + ["dhat", "u", "y", "d"])
        data = np.column_stack([self.t, self.x, self.xhat,
                                self.dhat, self.u, self.y, self.d])
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file,
                                                             "__fspath__"):
            with open(path_or_file, "w", encoding="utf-8") as fh:
                self._write_csv(fh, header, data)
        else:
            self._write_csv(path_or_file, header, data)

    @staticmethod
    def _write_csv(fh: io.TextIOBase, header, data) -> None:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


class CostBreakdown:
    """Quadratic cost C = C_y + lam * C_u and its two parts."""

    __slots__ = ("C", "C_y", "C_u")

    def __init__(self, C, C_y, C_u):
        self.C = float(C)
        self.C_y = float(C_y)
        self.C_u = float(C_u)

    def __repr__(self):
        return f"CostBreakdown(C={self.C!r}, C_y={self.C_y!r}, C_u={self.C_u!r})"


class SummaryMetrics:
    """Headline numbers of a trajectory."""

    __slots__ = ("peak_u", "peak_u_time", "final_amplitude", "settling_time")

    def __init__(self, peak_u, peak_u_time, final_amplitude, settling_time):
        self.peak_u = float(peak_u)
        self.peak_u_time = float(peak_u_time)
        self.final_amplitude = float(final_amplitude)
        self.settling_time = (None if settling_time is None
                              else float(settling_time))


def _build_field(plant: CanonicalPlant, gains, dist: DisturbanceModel):
    """Open-loop field pieces over s = [x; chi; x_hat; d_hat].

    Returns (F, Bu, By, w_off, Cu, Cy): ds/dt = F s + Bu u + By y_meas
    + w_off d_ss, control readout u = Cu s, measurement y = Cy s.  The
    observer correction column -G (x_hat_1 - y_meas) is split between F
    (the x_hat_1 part) and By (the measurement part).
    """
    a = plant.a
    b = plant.b
    rho = plant.rho
    K = np.asarray(gains.K, dtype=float)
    G = np.asarray(gains.G, dtype=float)
    b_hat = float(gains.b_hat)
    if K.size != rho or G.size != rho + 1:
        raise ValueError("gain dimensions do not match the plant order")
    m = dist.order
    n = rho + m + rho + 1
    F = np.zeros((n, n))
    ih = rho + m
    idh = rho + m + rho
    for i in range(rho - 1):
        F[i, i + 1] = 1.0
    F[rho - 1, :rho] = a
    if m:
        F[rho - 1, rho:rho + m] = dist.C_d
        F[rho:rho + m, rho:rho + m] = dist.A_d
    for i in range(rho - 1):
        F[ih + i, ih + i + 1] = 1.0
    F[ih + rho - 1, idh] = 1.0
    for i in range(rho):
        F[ih + i, ih] += -G[i]
    F[idh, ih] = -G[rho]
    Bu = np.zeros(n)
    Bu[rho - 1] = b
    Bu[ih + rho - 1] += b_hat
    By = np.zeros(n)
    for i in range(rho + 1):
        By[ih + i] = G[i]
    w_off = np.zeros(n)
    w_off[rho - 1] = 1.0
    Cu = np.zeros(n)
    Cu[ih:ih + rho] = -K / b_hat
    Cu[idh] = -1.0 / b_hat
    Cy = np.zeros(n)
    Cy[0] = 1.0
    return F, Bu, By, w_off, Cu, Cy


def simulate(plant: CanonicalPlant, gains, dist: DisturbanceModel,
             cfg: SimConfig, backend=None) -> Trajectory:
    """Integrate the closed loop and return the full trajectory.

    CONTINUOUS mode folds the control law and the measurement into the
    vector field.  SAMPLED mode, at each sample instant, draws the
    measurement noise, reads y_meas = y + w, recomputes u from the
    current estimates, and holds both while integrating to the next
    instant.  Deterministic given the seed.  Raises UnstableBlowup with
    the first crossing time if the state exceeds the blowup limit.
    """
    rho = plant.rho
    cls, _ = _integrator_class(backend)
    F, Bu, By, w_off, Cu, Cy = _build_field(plant, gains, dist)
    n = F.shape[0]
    m = dist.order
    nsteps = cfg.nsteps
    ngrid = nsteps + 1

    s = np.zeros(n)
    x0 = np.zeros(rho) if cfg.x0 is None else cfg.x0
    xhat0 = np.zeros(rho) if cfg.xhat0 is None else cfg.xhat0
    if x0.size != rho or xhat0.size != rho:
        raise ValueError("x0 and xhat0 must have the plant order")
    s[:rho] = x0
    if m:
        s[rho:rho + m] = dist.chi0
    s[rho + m:rho + m + rho] = xhat0
    s[rho + m + rho] = cfg.dhat0

    out = np.empty((ngrid, n))
    out[0] = s
    us = np.empty(ngrid)
    status = -1

    if not cfg.is_sampled:
        Fc = F + np.outer(Bu, Cu) + np.outer(By, Cy)
        integ = cls(Fc, cfg.dt)
        status = integ.run(w_off * dist.d_ss, s, out, 0, nsteps)
        grid_end = nsteps if status == -1 else status
        us[:grid_end + 1] = out[:grid_end + 1] @ Cu
    else:
        integ = cls(F, cfg.dt)
        stride = round(cfg.sample_period / cfg.dt)
        nsamp = nsteps // stride + 1
        if cfg.noise_variance > 0.0:
            rng = np.random.Generator(np.random.Philox(cfg.seed))
            noise = rng.normal(0.0, math.sqrt(cfg.noise_variance), nsamp)
        else:
            noise = np.zeros(nsamp)
        for idx, k0 in enumerate(range(0, nsteps + 1, stride)):
            y_meas = float(Cy @ s) + noise[idx]
            u = float(Cu @ s)
            seg = min(stride, nsteps - k0)
            us[k0:k0 + seg + 1] = u
            if seg > 0:
                g = Bu * u + By * y_meas + w_off * dist.d_ss
                status = integ.run(g, s, out, k0, seg)
                if status != -1:
                    break

    if status != -1:
        raise UnstableBlowup(status * cfg.dt)

    t = np.arange(ngrid) * cfg.dt
    x = out[:, :rho].copy()
    xhat = out[:, rho + m:rho + m + rho].copy()
    dhat = out[:, rho + m + rho].copy()
    y = x[:, 0].copy()
    if m:
        d = dist.d_ss + out[:, rho:rho + m] @ dist.C_d
    else:
        d = np.full(ngrid, dist.d_ss)
    return Trajectory(t, x, xhat, dhat, us, y, d)


def cost(traj: Trajectory, lam: float) -> CostBreakdown:
    """Trapezoidal output and input energies: C = C_y + lam * C_u."""
    lam = float(lam)
    C_y = float(np.trapezoid(traj.y * traj.y, traj.t))
    C_u = float(np.trapezoid(traj.u * traj.u, traj.t))
    return CostBreakdown(C_y + lam * C_u, C_y, C_u)


def summarize(traj: Trajectory) -> SummaryMetrics:
    """Peak input, its time, late-window output amplitude, settling estimate.

    The final amplitude is max |y| over the last fifth of the horizon.
    The settling estimate is the earliest grid time after which |y|
    stays within 2 percent of its overall peak (None if never).
    """
    iu = int(np.argmax(np.abs(traj.u)))
    window = traj.y[int(0.8 * traj.y.size):]
    final_amp = float(np.abs(window).max()) if window.size else 0.0
    ymax = float(np.abs(traj.y).max())
    settling = None
    if ymax > 0.0:
        over = np.abs(traj.y) > 0.02 * ymax
        last = int(np.flatnonzero(over)[-1]) if over.any() else -1
        if last + 1 < traj.t.size:
            settling = traj.t[last + 1]
    else:
        settling = traj.t[0]
    return SummaryMetrics(abs(traj.u[iu]), traj.t[iu], final_amp, settling)
