"""Exact evolution in the truncated atom x Fock space.

The Hamiltonian conserves ``b^+ b + a_1^+ a_1``, so it is block diagonal over
the pairs ``{|up, n>, |down, n+1>}``.  Each block is propagated analytically.
``|down, 0>`` is a one-dimensional block, and so is ``|up, n_max>`` once the
space is truncated (its partner lies outside the basis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .model import ModelParams

TAIL_TOL = 1e-12
DENSE_MAX = 32

UP, DOWN = 0, 1


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class ExactState:
    """Amplitudes indexed ``[level, n]`` with level 0 = up, 1 = down."""

    amplitudes: np.ndarray

    @property
    def n_max(self):
        return self.amplitudes.shape[1] - 1

    @property
    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @classmethod
    def basis(cls, level, n, n_max):
        amp = np.zeros((2, n_max + 1), dtype=complex)
        amp[level, n] = 1.0
        return cls(amp)


@dataclass(frozen=True)
class ExactObservables:
    sigma3: float
    sigmaP: float
    photon: float
    energy: float
    B: complex
    sigma_plus: complex = 0j


def poisson_tail(alpha, n_max):
    """Probability mass of a coherent state above ``n_max``."""
    return float(poisson.sf(n_max, abs(alpha) ** 2))


def auto_n_max(alpha, tol=TAIL_TOL):
    n = max(1, int(abs(alpha) ** 2))
    while poisson_tail(alpha, n) >= tol:
        n += 1
    return n


def prepare_coherent_excited(alpha, n_max=None, atom=(1.0, 0.0), strict=True) -> ExactState:
    """Coherent field times a pure atom state ``atom = (c_up, c_down)`` (excited by default).

    With ``strict=False`` a truncation tail above the tolerance is accepted and
    the truncated state renormalized (for oracle comparisons in small spaces).
    """
    alpha = complex(alpha)
    c_up, c_dn = (complex(c) for c in atom)
    anorm = math.sqrt(abs(c_up) ** 2 + abs(c_dn) ** 2)
    if anorm == 0:
        raise ValueError("atom amplitudes vanish")
    if n_max is None:
        n_max = auto_n_max(alpha)
    tail = poisson_tail(alpha, n_max)
    if strict and tail >= TAIL_TOL:
        raise TruncationError(f"n_max={n_max} too small for |alpha|={abs(alpha):.4g}: tail {tail:.3e}")
    n = np.arange(n_max + 1)
    field = np.zeros(n_max + 1, dtype=complex)
    if alpha == 0:
        field[0] = 1.0
    else:
        logmag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        field = np.exp(logmag + 1j * n * np.angle(alpha))
    field /= np.linalg.norm(field)
    amp = np.stack([c_up / anorm * field, c_dn / anorm * field])
    return ExactState(amp)


def _block_coefficients(params: ModelParams, n_max, t):
    """Propagator entries of every 2x2 block; ``t`` may be an array (broadcast on axis 0)."""
    t = np.asarray(t, dtype=float)[..., None]
    n = np.arange(n_max)
    g = params.coupling * np.sqrt(n + 1.0)
    delta = params.detuning
    rabi = np.sqrt(delta**2 + 4.0 * g**2)
    phase = np.exp(-1j * params.omega * (n + 0.5) * t)
    cos = np.cos(0.5 * rabi * t)
    # 2 sin(rabi t / 2) / rabi, finite at rabi = 0
    sinc = t * np.sinc(rabi * t / (2.0 * np.pi))
    u_uu = phase * (cos - 0.5j * delta * sinc)
    u_dd = phase * (cos + 0.5j * delta * sinc)
    u_ud = phase * (-1j * g * sinc)
    return u_uu, u_dd, u_ud


def _evolve_amplitudes(amp, params, t):
    n_max = amp.shape[1] - 1
    t = np.asarray(t, dtype=float)
    u_uu, u_dd, u_ud = _block_coefficients(params, n_max, t)
    up, dn = amp[UP], amp[DOWN]
    out = np.zeros(t.shape + (2, n_max + 1), dtype=complex)
    a, b = up[:-1], dn[1:]
    out[..., UP, :-1] = u_uu * a + u_ud * b
    out[..., DOWN, 1:] = u_ud * a + u_dd * b
    out[..., DOWN, 0] = np.exp(0.5j * params.epsilon * t) * dn[0]
    e_top = 0.5 * params.epsilon + params.omega * n_max
    out[..., UP, n_max] = np.exp(-1j * e_top * t) * up[n_max]
    return out


def exact_evolve(state: ExactState, params: ModelParams, t) -> ExactState:
    return ExactState(_evolve_amplitudes(state.amplitudes, params, float(t)))


def hamiltonian_matrix(params: ModelParams, n_max):
    """Truncated Hamiltonian; index ``level * (n_max + 1) + n``."""
    dim = n_max + 1
    n = np.arange(dim)
    H = np.zeros((2 * dim, 2 * dim), dtype=complex)
    H[n, n] = 0.5 * params.epsilon + params.omega * n
    H[dim + n, dim + n] = -0.5 * params.epsilon + params.omega * n
    for k in range(n_max):
        H[dim + k + 1, k] = H[k, dim + k + 1] = params.coupling * math.sqrt(k + 1)
    return H


def dense_oracle_evolve(state: ExactState, params: ModelParams, t) -> ExactState:
    """Brute-force propagation through the matrix exponential of the full Hamiltonian."""
    n_max = state.n_max
    if n_max > DENSE_MAX:
        raise ValueError(f"dense oracle limited to n_max <= {DENSE_MAX}, got {n_max}")
    U = expm(-1j * t * hamiltonian_matrix(params, n_max))
    psi = U @ state.amplitudes.reshape(-1)
    return ExactState(psi.reshape(2, n_max + 1))


def _moments(amp):
    """Moments over the trailing two axes of ``amp`` (level, n)."""
    n = np.arange(amp.shape[-1])
    prob = np.abs(amp) ** 2
    p_up, p_dn = prob[..., UP, :].sum(-1), prob[..., DOWN, :].sum(-1)
    photon = (prob * n).sum((-1, -2))
    sq = np.sqrt(n[1:])
    b = (np.conj(amp[..., :, :-1]) * amp[..., :, 1:] * sq).sum((-1, -2))
    bb = (np.conj(amp[..., :, :-2]) * amp[..., :, 2:] * np.sqrt(n[2:] * n[1:-1])).sum((-1, -2))
    sp = (np.conj(amp[..., UP, :]) * amp[..., DOWN, :]).sum(-1)
    sp_b = (np.conj(amp[..., UP, :-1]) * amp[..., DOWN, 1:] * sq).sum(-1)
    return dict(p_up=p_up, p_dn=p_dn, photon=photon, b=b, bb=bb, sp=sp, sp_b=sp_b)


def _observables_from_moments(m, params):
    sigma3 = m["p_up"] - m["p_dn"]
    sigmaP = np.sqrt(sigma3**2 + 4.0 * np.abs(m["sp"]) ** 2)
    energy = (0.5 * params.epsilon * sigma3 + params.omega * m["photon"]
              + 2.0 * params.coupling * m["sp_b"].real)
    return sigma3, sigmaP, energy


def exact_observables(state: ExactState, params: ModelParams) -> ExactObservables:
    m = _moments(state.amplitudes)
    sigma3, sigmaP, energy = _observables_from_moments(m, params)
    return ExactObservables(float(sigma3), float(sigmaP), float(m["photon"]), float(energy),
                            complex(m["b"]), complex(m["sp"]))


def exact_series(state: ExactState, params: ModelParams, times, chunk=512):
    """Observables on a time grid as a dict of arrays.

    Includes the field moments ``bb`` (<b b>) and the atom coherence ``sp``
    (<a_1^+ a_-1>) needed to build the reduced Gaussian variables.
    """
    times = np.asarray(times, dtype=float)
    keys = ("sigma3", "sigmaP", "photon", "energy", "B", "bb", "sp", "p_up", "norm")
    out = {k: [] for k in keys}
    for i in range(0, len(times), chunk):
        amp = _evolve_amplitudes(state.amplitudes, params, times[i:i + chunk])
        m = _moments(amp)
        sigma3, sigmaP, energy = _observables_from_moments(m, params)
        for k, val in (("sigma3", sigma3), ("sigmaP", sigmaP), ("photon", m["photon"]),
                       ("energy", energy), ("B", m["b"]), ("bb", m["bb"]), ("sp", m["sp"]),
                       ("p_up", m["p_up"]), ("norm", (np.abs(amp) ** 2).sum((-1, -2)))):
            out[k].append(val)
    return {k: np.concatenate(v) if v else np.array([]) for k, v in out.items()}
