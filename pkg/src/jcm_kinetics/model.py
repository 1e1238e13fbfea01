"""Domain types for the atom/field Gaussian description and the Bogoliubov
diagonalization utilities that connect extended densities to quasi-particle
variables.

Conventions
-----------
Boson quasi-particles: ``beta = conj(x) d + conj(y) d^+`` with ``d = b - B``,
so that ``d = x beta - conj(y) beta^+``.

Fermion quasi-particles (level index +1 is the excited atomic level)::

    a_1  =  u alpha_1 + conj(v) alpha_-1
    a_-1 = -v alpha_1 + conj(u) alpha_-1

``u`` is allowed to be complex; :func:`fermion_diagonalize` returns the
representative with ``u`` real and nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TOL = 1e-9
# eigenvalue gap / overlap difference treated as an exact tie (rounding level)
TIE = 1e-13


class PhysicalityError(ValueError):
    """A density or Gaussian state violates a physical constraint."""


@dataclass(frozen=True)
class ModelParams:
    """Hamiltonian constants: level splitting, mode frequency, coupling."""

    epsilon: float = 1.0
    omega: float = 1.0
    coupling: float = 0.5

    def __post_init__(self):
        for name in ("epsilon", "omega", "coupling"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def detuning(self) -> float:
        return self.epsilon - self.omega


@dataclass(frozen=True)
class BosonSector:
    B: complex = 0j
    nu: float = 0.0
    x: float = 1.0
    y: complex = 0j

    def check(self, tol=TOL):
        if abs(self.x**2 - abs(self.y) ** 2 - 1.0) > tol:
            raise PhysicalityError(
                f"boson canonicity violated: x^2-|y|^2-1 = {self.x**2 - abs(self.y)**2 - 1:.3e}")
        if self.nu < -tol:
            raise PhysicalityError(f"negative quasi-boson occupation nu={self.nu}")
        if self.x < 1.0 - tol:
            raise PhysicalityError(f"x={self.x} below 1")


@dataclass(frozen=True)
class FermionSector:
    u: complex = 1.0
    v: complex = 0j
    p1: float = 1.0
    pm1: float = 0.0

    @property
    def s(self) -> float:
        """Occupation difference p1 - pm1."""
        return self.p1 - self.pm1

    def check(self, tol=TOL):
        norm = abs(self.u) ** 2 + abs(self.v) ** 2
        if abs(norm - 1.0) > tol:
            raise PhysicalityError(f"fermion unitarity violated: |u|^2+|v|^2-1 = {norm - 1:.3e}")
        for name in ("p1", "pm1"):
            p = getattr(self, name)
            if p < -tol or p > 1.0 + tol:
                raise PhysicalityError(f"occupation {name}={p} outside [0, 1]")


@dataclass(frozen=True)
class GaussianState:
    boson: BosonSector = BosonSector()
    fermion: FermionSector = FermionSector()
    t: float = 0.0

    @classmethod
    def coherent_excited(cls, alpha=5.0):
        """Excited atom times a coherent field of amplitude ``alpha``."""
        return cls(BosonSector(B=complex(alpha)), FermionSector())

    def check(self, tol=TOL):
        self.boson.check(tol)
        self.fermion.check(tol)
        return self

    def rephased(self, chi):
        """Apply the U(1) symmetry (B, v, y) -> (e^{-i chi} B, e^{i chi} v, e^{2 i chi} y)."""
        ph = np.exp(1j * chi)
        return replace(
            self,
            boson=replace(self.boson, B=self.boson.B / ph, y=self.boson.y * ph**2),
            fermion=replace(self.fermion, v=self.fermion.v * ph),
        )


@dataclass(frozen=True)
class ExtendedBosonDensity:
    """Fluctuation moments R = <d^+ d> and Pi = <d d>."""

    R: float
    Pi: complex


@dataclass(frozen=True)
class ExtendedFermionDensity:
    """One-fermion moments: R11 = <a_1^+ a_1>, Rmm = <a_-1^+ a_-1>, R1m = <a_-1^+ a_1>."""

    R11: float
    Rmm: float
    R1m: complex

    def matrix(self):
        # rho[i, j] = <a_j^+ a_i>, rows/cols ordered (+1, -1)
        return np.array([[self.R11, self.R1m], [np.conj(self.R1m), self.Rmm]], dtype=complex)


@dataclass(frozen=True)
class Observables:
    sigma3: float
    sigmaP: float
    photon: float
    energyMF: float
    time: float = 0.0


def boson_diagonalize(d: ExtendedBosonDensity, tol=TOL):
    """Return ``(nu, x, y)`` with x real, reproducing ``d``.

    Uses ``1 + 2 nu = sqrt((1 + 2R)^2 - 4|Pi|^2)``, ``<d^+d> = nu + |y|^2 (1 + 2nu)``
    and ``<dd> = -x conj(y) (1 + 2nu)``.
    """
    disc = (1.0 + 2.0 * d.R) ** 2 - 4.0 * abs(d.Pi) ** 2
    if d.R < -tol or disc < (1.0 - 2.0 * tol) ** 2:
        raise PhysicalityError(f"boson density implies negative occupation (R={d.R}, |Pi|={abs(d.Pi)})")
    w = math.sqrt(max(disc, 1.0))  # 1 + 2 nu
    nu = 0.5 * (w - 1.0)
    x = math.sqrt(max((1.0 + nu + d.R) / w, 1.0))
    y = -np.conj(d.Pi) / (x * w)
    return nu, x, complex(y)


def boson_reconstruct(nu, x, y, tol=TOL) -> ExtendedBosonDensity:
    BosonSector(nu=nu, x=x, y=y).check(tol)
    w = 1.0 + 2.0 * nu
    return ExtendedBosonDensity(R=nu + abs(y) ** 2 * w, Pi=complex(-x * np.conj(y) * w))


def fermion_diagonalize(d: ExtendedFermionDensity, tol=TOL):
    """Return ``(p1, pm1, u, v)`` with ``u`` real and nonnegative.

    ``p1`` is the eigenvalue whose eigenvector overlaps most with the excited
    level (larger eigenvalue on an exact tie); degenerate densities give u=1, v=0.
    """
    rho = d.matrix()
    w, vecs = np.linalg.eigh(rho)
    if w[0] < -tol or w[1] > 1.0 + tol:
        raise PhysicalityError(f"fermion density eigenvalues {w} outside [0, 1]")
    if abs(w[1] - w[0]) <= TIE:
        p = float(np.clip(0.5 * (w[0] + w[1]), 0.0, 1.0))
        return p, p, 1.0, 0j
    overlaps = np.abs(vecs[0, :])
    k = 1 if overlaps[1] >= overlaps[0] - TIE else 0
    e = vecs[:, k]
    e = e * np.exp(-1j * np.angle(e[0]))
    # first column of the quasi-particle transform is (u, -v)
    u, v = float(e[0].real), complex(-e[1])
    p1, pm1 = (float(np.clip(w[k], 0, 1)), float(np.clip(w[1 - k], 0, 1)))
    return p1, pm1, u, v


def fermion_reconstruct(p1, pm1, u, v) -> ExtendedFermionDensity:
    FermionSector(u=u, v=v, p1=p1, pm1=pm1).check()
    uu, vv = abs(u) ** 2, abs(v) ** 2
    return ExtendedFermionDensity(
        R11=uu * p1 + vv * pm1,
        Rmm=vv * p1 + uu * pm1,
        R1m=complex(u * np.conj(v) * (pm1 - p1)),
    )


def sigma_plus(f: FermionSector) -> complex:
    """<a_1^+ a_-1> in the Gaussian state."""
    return complex(np.conj(f.u) * f.v * (f.pm1 - f.p1))


def observables(state: GaussianState, params: ModelParams, check=True) -> Observables:
    if check:
        state.check()
    bo, fe = state.boson, state.fermion
    s = fe.s
    sigma3 = s * (abs(fe.u) ** 2 - abs(fe.v) ** 2)
    photon = abs(bo.B) ** 2 + bo.nu + abs(bo.y) ** 2 * (1.0 + 2.0 * bo.nu)
    inter = 2.0 * (sigma_plus(fe) * bo.B).real
    energy = 0.5 * params.epsilon * sigma3 + params.omega * photon + params.coupling * inter
    return Observables(sigma3=sigma3, sigmaP=s, photon=photon, energyMF=energy, time=state.t)
