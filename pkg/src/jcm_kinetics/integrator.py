"""Time stepping of the coupled (state, memory) system."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import dynamics as dyn
from .dynamics import DEFAULT_OPTIONS, DynamicsError, MemoryState, RhsOptions
from .model import GaussianState, ModelParams, Observables, observables

MODES = ("meanfield", "collisional")
METHODS = ("rk4-fixed", "rk45-adaptive")


class IntegrationError(DynamicsError):
    """The stepper could not advance (adaptive step-size underflow)."""


@dataclass(frozen=True)
class IntegratorOptions:
    dt: float = 1e-3
    t_max: float = 20.0
    method: str = "rk4-fixed"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    renormalize: bool = True
    record_every: int = 10

    def __post_init__(self):
        if not self.dt > 0 or not self.dt < self.t_max:
            raise ValueError(f"need 0 < dt < t_max (dt={self.dt}, t_max={self.t_max})")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


@dataclass(frozen=True)
class Sample:
    time: float
    state: GaussianState
    mem: MemoryState
    obs: Observables


@dataclass
class Trajectory:
    params: ModelParams
    mode: str
    samples: list = field(default_factory=list)
    failure: str | None = None

    def __len__(self):
        return len(self.samples)

    @property
    def times(self):
        return np.array([s.time for s in self.samples])

    def observable(self, name):
        return np.array([getattr(s.obs, name) for s in self.samples])

    def states(self):
        return [s.state for s in self.samples]


def project(z, ntot, gauge="transport"):
    """Restore the constraints x^2 - |y|^2 = 1, |u|^2 + |v|^2 = 1, nu >= 0, 0 <= p <= 1."""
    z = z.copy()
    y = z[dyn.Y]
    z[dyn.X] = math.sqrt(1.0 + abs(y) ** 2)
    u, v = z[dyn.U], z[dyn.V]
    if gauge == "real":
        av = abs(v)
        if av > 1.0:
            z[dyn.V] = v / av
            av = 1.0
        z[dyn.U] = math.sqrt(1.0 - av * av)
    else:
        norm = math.sqrt(abs(u) ** 2 + abs(v) ** 2)
        z[dyn.U], z[dyn.V] = u / norm, v / norm
    z[dyn.NU] = max(z[dyn.NU].real, 0.0)
    smax = min(ntot, 2.0 - ntot)
    z[dyn.S] = min(max(z[dyn.S].real, -smax), smax)
    for k in (dyn.PHIB, dyn.PHIA):
        z[k] = z[k].real
    return z


def record_times(opts: IntegratorOptions):
    """The sample times :func:`integrate` records for ``opts`` (bit-identical floats)."""
    times = [0.0]
    if opts.method == "rk4-fixed":
        nsteps = max(1, math.ceil(opts.t_max / opts.dt - 1e-9))
        for k in range(1, nsteps + 1):
            if k % opts.record_every == 0 or k == nsteps:
                times.append(min(k * opts.dt, opts.t_max))
    else:
        nrec = max(1, math.ceil(opts.t_max / (opts.dt * opts.record_every) - 1e-9))
        times += [min(k * opts.record_every * opts.dt, opts.t_max) for k in range(1, nrec + 1)]
    return np.array(times)


def _check_crossing(s_old, s_new, t, rhs_opts):
    # a finite step can jump straight over the guard band around s = 0
    if s_old * s_new < 0 and not rhs_opts.clamp:
        raise dyn.DepolarizationError(
            f"p1 - pm1 changed sign within a step ({s_old:.3e} -> {s_new:.3e})", t)


def _record(traj, z, ntot, t, params):
    state, mem = dyn.unpack(z, ntot, t)
    traj.samples.append(Sample(t, state, mem, observables(state, params, check=False)))


def integrate(initial: GaussianState, params: ModelParams, mode="collisional",
              opts: IntegratorOptions = IntegratorOptions(),
              rhs_opts: RhsOptions = DEFAULT_OPTIONS) -> Trajectory:
    """Propagate ``initial`` (memory starts at zero) up to ``opts.t_max``.

    Dynamics errors are re-raised with ``.time`` and the partial ``.trajectory`` attached.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    initial.check()
    collisional = mode == "collisional"
    z, ntot = dyn.pack(initial, MemoryState())
    traj = Trajectory(params, mode)
    _record(traj, z, ntot, 0.0, params)

    def f(t, zz):
        return dyn.derivative_vector(zz, ntot, params, collisional, rhs_opts, t)

    t = 0.0
    try:
        if opts.method == "rk4-fixed":
            nsteps = max(1, math.ceil(opts.t_max / opts.dt - 1e-9))
            for k in range(1, nsteps + 1):
                t_next = min(k * opts.dt, opts.t_max)
                h = t_next - t
                k1 = f(t, z)
                k2 = f(t + 0.5 * h, z + 0.5 * h * k1)
                k3 = f(t + 0.5 * h, z + 0.5 * h * k2)
                k4 = f(t_next, z + h * k3)
                z_new = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                _check_crossing(z[dyn.S].real, z_new[dyn.S].real, t_next, rhs_opts)
                z = z_new
                if opts.renormalize:
                    z = project(z, ntot, rhs_opts.gauge)
                t = t_next
                if k % opts.record_every == 0 or k == nsteps:
                    _record(traj, z, ntot, t, params)
        else:
            # projection is applied at record boundaries only
            nrec = max(1, math.ceil(opts.t_max / (opts.dt * opts.record_every) - 1e-9))
            for k in range(1, nrec + 1):
                # same expression as the fixed-step grid, so both methods share sample times
                t_next = min(k * opts.record_every * opts.dt, opts.t_max)
                sol = solve_ivp(f, (t, t_next), z, method="RK45",
                                rtol=opts.rel_tol, atol=opts.abs_tol)
                if sol.status < 0:
                    raise IntegrationError(f"adaptive integration failed: {sol.message}", t)
                _check_crossing(z[dyn.S].real, sol.y[dyn.S, -1].real, t_next, rhs_opts)
                z = sol.y[:, -1]
                if opts.renormalize:
                    z = project(z, ntot, rhs_opts.gauge)
                t = t_next
                _record(traj, z, ntot, t, params)
    except DynamicsError as err:
        if err.time is None:
            err.time = t
        traj.failure = f"{type(err).__name__} at t={err.time:.6g}: {err}"
        err.trajectory = traj
        raise
    return traj


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    value: float
    error: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    reference: float

    @property
    def ratios(self):
        return [a.error / b.error if b.error > 0 else math.inf
                for a, b in zip(self.rows, self.rows[1:])]

    @property
    def orders(self):
        out = []
        for a, b in zip(self.rows, self.rows[1:]):
            if a.error > 0 and b.error > 0:
                out.append(math.log(a.error / b.error) / math.log(a.dt / b.dt))
            else:
                out.append(math.nan)
        return out


def convergence_probe(initial, params, mode, dt_list, t_max=10.0, observable="sigma3",
                      method="rk4-fixed", renormalize=True, rhs_opts=DEFAULT_OPTIONS):
    """Error at ``t_max`` for each step size against the finest one (last in ``dt_list``)."""
    dts = list(dt_list)
    if any(a <= b for a, b in zip(dts, dts[1:])):
        raise ValueError("dt_list must be strictly descending")
    values = []
    for dt in dts:
        opts = IntegratorOptions(dt=dt, t_max=t_max, method=method, renormalize=renormalize,
                                 record_every=10**9)
        traj = integrate(initial, params, mode, opts, rhs_opts)
        values.append(getattr(traj.samples[-1].obs, observable))
    ref = values[-1]
    rows = tuple(ConvergenceRow(dt, val, abs(val - ref)) for dt, val in zip(dts[:-1], values[:-1]))
    return ConvergenceTable(rows, ref)
