"""Equations of motion for the double mean-field and collisional dynamics.

The full system is carried as a flat complex vector (see :func:`pack`)::

    [B, nu, x, y, u, v, s, K1, K2, K3, PhiBeta, PhiAlpha]

with ``s = p1 - pm1``; the total fermion occupation ``p1 + pm1`` is a constant
of motion and is passed alongside the vector.

Collision terms are second order in the coupling.  The memory integrals are

    I1(t) = int_0^t h1(t') exp(+i (PhiBeta(t) - PhiBeta(t'))) dt'
    I2(t) = int_0^t h2(t') exp(+i (2 dPhiAlpha + dPhiBeta)) dt'
    I3(t) = int_0^t h3(t') exp(+i (dPhiBeta - 2 dPhiAlpha)) dt'

(``dPhi = Phi(t) - Phi(t')``), which factorize as ``I = e^{i theta(t)} K`` with
``dK/dt = h e^{-i theta(t)}``.  The coefficients of I1..I3 in the rate
equations were checked term by term against the second-order Born kernel
``-<[[O, V(t)], V(t')]>`` computed with explicit operators (tests/test_kernel.py).

The opposite-sign factorization ``I1 = e^{-i PhiBeta} K1`` disagrees with that kernel
beyond second order in t; it is kept as ``i1_phase="flipped"`` for comparison runs.

Fermion gauge: the default ``"transport"`` gauge keeps ``conj(u) du + conj(v) dv = 0``
and is regular everywhere.  ``"real"`` keeps ``u`` real and is singular where
``u`` vanishes, which happens at every full Rabi inversion.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .model import BosonSector, FermionSector, GaussianState, ModelParams

NVAR = 12
B_, NU, X, Y, U, V, S, K1, K2, K3, PHIB, PHIA = range(NVAR)


class DynamicsError(RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DepolarizationError(DynamicsError):
    """|p1 - pm1| fell below the depolarization guard."""


class GaugeSingularityError(DynamicsError):
    """u fell below the gauge guard in the real-u gauge."""


class ConsistencyError(DynamicsError):
    """A quantity that must be real acquired an imaginary part."""


@dataclass(frozen=True)
class RhsOptions:
    depolarization_guard: float = 1e-8
    gauge_guard: float = 1e-8
    clamp: bool = False
    gauge: str = "transport"
    reality_tol: float = 1e-10
    i1_phase: str = "derived"

    def __post_init__(self):
        if self.gauge not in ("transport", "real"):
            raise ValueError(f"unknown fermion gauge {self.gauge!r}")
        if self.i1_phase not in ("derived", "flipped"):
            raise ValueError(f"unknown I1 phase convention {self.i1_phase!r}")

    @property
    def i1_sign(self):
        return 1.0 if self.i1_phase == "derived" else -1.0


DEFAULT_OPTIONS = RhsOptions()


@dataclass(frozen=True)
class MemoryState:
    K1: complex = 0j
    K2: complex = 0j
    K3: complex = 0j
    PhiBeta: float = 0.0
    PhiAlpha: float = 0.0


@dataclass(frozen=True)
class StateDerivative:
    dB: complex
    dnu: float
    dy: complex
    dx: float
    dv: complex
    du: complex
    ds: float
    dK1: complex = 0j
    dK2: complex = 0j
    dK3: complex = 0j
    dPhiBeta: float = 0.0
    dPhiAlpha: float = 0.0


def pack(state: GaussianState, mem: MemoryState | None = None):
    """Flatten ``(state, mem)``; returns ``(z, total_occupation)``."""
    mem = mem or MemoryState()
    bo, fe = state.boson, state.fermion
    z = np.array([bo.B, bo.nu, bo.x, bo.y, fe.u, fe.v, fe.s,
                  mem.K1, mem.K2, mem.K3, mem.PhiBeta, mem.PhiAlpha], dtype=complex)
    return z, fe.p1 + fe.pm1


def unpack(z, ntot, t=0.0):
    s = z[S].real
    state = GaussianState(
        BosonSector(B=complex(z[B_]), nu=float(z[NU].real), x=float(z[X].real), y=complex(z[Y])),
        FermionSector(u=complex(z[U]), v=complex(z[V]), p1=0.5 * (ntot + s), pm1=0.5 * (ntot - s)),
        t=float(t),
    )
    mem = MemoryState(complex(z[K1]), complex(z[K2]), complex(z[K3]),
                      float(z[PHIB].real), float(z[PHIA].real))
    return state, mem


def collision_integrals(mem: MemoryState, opts: RhsOptions = DEFAULT_OPTIONS):
    """Reconstruct (I1, I2, I3) from the accumulators."""
    pb, pa = mem.PhiBeta, mem.PhiAlpha
    return (
        mem.K1 * cmath.exp(1j * opts.i1_sign * pb),
        mem.K2 * cmath.exp(1j * (2 * pa + pb)),
        mem.K3 * cmath.exp(1j * (pb - 2 * pa)),
    )


def source_terms(u, v, x, y, p1, pm1, nu):
    """Integrands h1, h2, h3 of the memory integrals at one instant."""
    cu, cv = u.conjugate(), v.conjugate()
    h1 = (u * cv * y - cu * v * x) * (p1 * (1 - p1) + pm1 * (1 - pm1))
    h2 = (u * u * y + v * v * x) * (pm1 * (1 - p1) + (pm1 - p1) * nu)
    h3 = (cu * cu * x + cv * cv * y) * (p1 * (1 - pm1) + (p1 - pm1) * nu)
    return h1, h2, h3


def derivative_vector(z, ntot, params: ModelParams, collisional: bool,
                      opts: RhsOptions = DEFAULT_OPTIONS, t=None):
    """Time derivative of the packed vector.  Hot path; plain complex arithmetic."""
    eps, om, lam = params.epsilon, params.omega, params.coupling
    B = complex(z[B_])
    nu = z[NU].real
    x = z[X].real
    y, u, v = complex(z[Y]), complex(z[U]), complex(z[V])
    s = z[S].real
    cu, cv, cy, cB = u.conjugate(), v.conjugate(), y.conjugate(), B.conjugate()
    p1, pm1 = 0.5 * (ntot + s), 0.5 * (ntot - s)

    sdiv = s
    if abs(s) <= opts.depolarization_guard:
        if not opts.clamp:
            raise DepolarizationError(f"|p1 - pm1| = {abs(s):.3e} below guard", t)
        sdiv = opts.depolarization_guard if s >= 0 else -opts.depolarization_guard

    dB = -1j * (om * B + lam * u * cv * (pm1 - p1))
    D = -1j * (eps * u * v + lam * (u * u * cB - v * v * B))
    C = 2j * om * x * cy
    dnu = ds = 0.0
    dK1 = dK2 = dK3 = 0j
    FB = FA = 0.0

    if collisional:
        l2 = lam * lam
        pb, pa = z[PHIB].real, z[PHIA].real
        sg = opts.i1_sign
        I1 = z[K1] * cmath.exp(1j * sg * pb)
        I2 = z[K2] * cmath.exp(1j * (2 * pa + pb))
        I3 = z[K3] * cmath.exp(1j * (pb - 2 * pa))
        cI1, cI2, cI3 = I1.conjugate(), I2.conjugate(), I3.conjugate()
        g1 = cu * v * cy - u * cv * x
        g2 = cu * cu * cy + cv * cv * x
        g3 = u * u * x + v * v * cy

        a = l2 * (g1 * I1 + g2 * I2 + g3 * I3)
        dnu_c = a + a.conjugate()
        a = 2 * l2 * (g2 * I2 - g3.conjugate() * cI3)
        ds_c = a + a.conjugate()
        if abs(dnu_c.imag) > opts.reality_tol or abs(ds_c.imag) > opts.reality_tol:
            raise ConsistencyError(
                f"occupation rates not real: Im(dnu)={dnu_c.imag:.3e}, Im(ds)={ds_c.imag:.3e}", t)
        dnu, ds = dnu_c.real, ds_c.real

        D += l2 * (-2 * (cu * v * x - u * cv * y) * cI3
                   - 2 * (u * cv * x - cu * v * cy) * I2
                   + (u * u * y + v * v * x) * cI1
                   + (u * u * x + v * v * cy) * I1) / sdiv
        C += 2 * l2 * (-g1 * cI1 + g2 * cI3 + g3 * cI2) / (1 + 2 * nu)

    dx = -(C * y).real
    dy = (dx * y - C.conjugate()) / x
    if opts.gauge == "transport":
        du = cv * D
        dv = -cu * D
    else:
        ur = u.real
        if ur <= opts.gauge_guard:
            if not opts.clamp:
                raise GaugeSingularityError(f"u = {ur:.3e} below gauge guard", t)
            ur = opts.gauge_guard
        du = (D * cv).real
        dv = (du * v - D) / ur

    if collisional:
        conn_b = 1j * (dx * x - dy.conjugate() * y)
        conn_a = 1j * (du.conjugate() * u + dv.conjugate() * v)
        # off the constraint surface (inside a Runge-Kutta stage) the imaginary
        # parts pick up (residual) * (rate); allow for that
        res_b = abs(x * x - abs(y) ** 2 - 1.0)
        res_a = abs(abs(u) ** 2 + abs(v) ** 2 - 1.0)
        scale_b = (1.0 + abs(dx) * x + abs(dy) * abs(y)) * (1.0 + res_b / opts.reality_tol)
        scale_a = (1.0 + abs(du) * abs(u) + abs(dv) * abs(v)) * (1.0 + res_a / opts.reality_tol)
        if abs(conn_b.imag) > opts.reality_tol * scale_b or abs(conn_a.imag) > opts.reality_tol * scale_a:
            raise ConsistencyError("quasi-particle phase rates not real", t)
        FB = conn_b.real + om * (x * x + abs(y) ** 2)
        FA = 0.5 * eps * (abs(u) ** 2 - abs(v) ** 2) - 2 * lam * (cu * v * B).real + conn_a.real
        h1, h2, h3 = source_terms(u, v, x, y, p1, pm1, nu)
        dK1 = h1 * cmath.exp(-1j * sg * pb)
        dK2 = h2 * cmath.exp(-1j * (2 * pa + pb))
        dK3 = h3 * cmath.exp(-1j * (pb - 2 * pa))

    return np.array([dB, dnu, dx, dy, du, dv, ds, dK1, dK2, dK3, FB, FA], dtype=complex)


def _as_derivative(dz) -> StateDerivative:
    return StateDerivative(
        dB=complex(dz[B_]), dnu=float(dz[NU].real), dy=complex(dz[Y]), dx=float(dz[X].real),
        dv=complex(dz[V]), du=complex(dz[U]), ds=float(dz[S].real),
        dK1=complex(dz[K1]), dK2=complex(dz[K2]), dK3=complex(dz[K3]),
        dPhiBeta=float(dz[PHIB].real), dPhiAlpha=float(dz[PHIA].real),
    )


def meanfield_rhs(state: GaussianState, params: ModelParams, opts: RhsOptions = DEFAULT_OPTIONS):
    """Double mean-field derivative: occupations frozen, no memory."""
    z, ntot = pack(state)
    return _as_derivative(derivative_vector(z, ntot, params, False, opts, state.t))


def collisional_rhs(state: GaussianState, mem: MemoryState, params: ModelParams,
                    opts: RhsOptions = DEFAULT_OPTIONS):
    """Mean-field flow plus the second-order collision terms."""
    z, ntot = pack(state, mem)
    return _as_derivative(derivative_vector(z, ntot, params, True, opts, state.t))
