import math

import numpy as np
import pytest

from jcm_kinetics.exact import (
    DOWN, UP, ExactState, TruncationError, auto_n_max, dense_oracle_evolve, exact_evolve,
    exact_observables, exact_series, hamiltonian_matrix, poisson_tail, prepare_coherent_excited,
)
from jcm_kinetics.model import ModelParams

P = ModelParams()


def test_prepare_vacuum():
    st = prepare_coherent_excited(0.0, 4)
    assert st.amplitudes[UP, 0] == 1 and st.norm == 1.0


def test_prepare_alpha5_photon_number():
    obs = exact_observables(prepare_coherent_excited(5.0, 80), P)
    assert obs.photon == pytest.approx(25.0, abs=1e-10)
    assert obs.energy == pytest.approx(25.5, abs=1e-10)
    assert (obs.sigma3, obs.sigmaP) == pytest.approx((1.0, 1.0), abs=1e-14)


def test_truncation_guard():
    assert poisson_tail(1.0, 3) == pytest.approx(0.01899, abs=1e-5)
    with pytest.raises(TruncationError):
        prepare_coherent_excited(1.0, 3)


def test_auto_n_max_is_smallest_admissible():
    n = auto_n_max(5.0)
    assert poisson_tail(5.0, n) < 1e-12 <= poisson_tail(5.0, n - 1)
    assert n == 68


def test_prepare_atom_superposition():
    st = prepare_coherent_excited(1.0, 20, atom=(1.0, 1.0))
    obs = exact_observables(st, P)
    assert obs.sigma3 == pytest.approx(0.0, abs=1e-14)
    assert obs.sigmaP == pytest.approx(1.0, abs=1e-12)


def test_single_block_rabi_flop():
    st = ExactState.basis(UP, 0, 4)
    obs = exact_observables(exact_evolve(st, P, math.pi), P)
    assert obs.sigma3 == pytest.approx(-1.0, abs=1e-12)
    dense = dense_oracle_evolve(st, P, math.pi)
    assert exact_observables(dense, P).sigma3 == pytest.approx(-1.0, abs=1e-12)


def test_free_evolution_is_pure_phase():
    p0 = ModelParams(coupling=0.0)
    st = prepare_coherent_excited(1.0 + 0.5j, 20, atom=(0.6, 0.8))
    t = 2.7
    out = exact_evolve(st, p0, t).amplitudes
    n = np.arange(21)
    energies = np.stack([0.5 + n, -0.5 + n])
    assert np.allclose(out, st.amplitudes * np.exp(-1j * energies * t), atol=1e-14)
    assert np.allclose(dense_oracle_evolve(st, p0, t).amplitudes, out, atol=1e-12)


@pytest.mark.parametrize("params", [P, ModelParams(epsilon=1.3, omega=0.9, coupling=0.7)])
def test_matches_dense_oracle(params):
    st = prepare_coherent_excited(1.0, 8, strict=False) if params is P else ExactState(
        np.random.default_rng(3).normal(size=(2, 9)) + 1j * np.random.default_rng(4).normal(size=(2, 9)))
    if params is not P:
        st = ExactState(st.amplitudes / math.sqrt(st.norm))
    for t in np.linspace(0, 10, 11):
        diff = exact_evolve(st, params, t).amplitudes - dense_oracle_evolve(st, params, t).amplitudes
        assert np.max(np.abs(diff)) < 1e-10


def test_dense_cost_guard():
    with pytest.raises(ValueError):
        dense_oracle_evolve(prepare_coherent_excited(5.0), P, 1.0)


def test_semigroup():
    st = prepare_coherent_excited(5.0)
    for t in (0.3, 4.0, 37.5):
        half = exact_evolve(exact_evolve(st, P, t / 2), P, t / 2)
        assert np.max(np.abs(half.amplitudes - exact_evolve(st, P, t).amplitudes)) < 1e-12


def test_equal_superposition_across_blocks():
    amp = np.zeros((2, 5), dtype=complex)
    amp[UP, 0] = amp[DOWN, 1] = 1 / math.sqrt(2)
    obs = exact_observables(ExactState(amp), P)
    assert obs.sigma3 == pytest.approx(0.0, abs=1e-15)
    assert obs.sigma_plus == 0 and obs.sigmaP == pytest.approx(0.0, abs=1e-15)


def test_hamiltonian_conserves_excitations():
    n_max = 6
    H = hamiltonian_matrix(P, n_max)
    n = np.arange(n_max + 1)
    N = np.diag(np.concatenate([n + 1.0, n.astype(float)]))
    assert np.allclose(H, H.conj().T)
    assert np.allclose(H @ N - N @ H, 0)


def test_dense_oracle_conserves_excitations():
    st = prepare_coherent_excited(1.0, 8, strict=False)
    obs0 = exact_observables(st, P)
    for t in (1.0, 5.0, 10.0):
        obs = exact_observables(dense_oracle_evolve(st, P, t), P)
        assert obs.photon + 0.5 * obs.sigma3 == pytest.approx(obs0.photon + 0.5 * obs0.sigma3, abs=1e-10)


def test_series_invariants():
    st = prepare_coherent_excited(5.0)
    s_t = np.linspace(0, 30, 301)
    s = exact_series(st, P, s_t)
    assert np.all(s["sigmaP"] <= 1 + 1e-12)
    assert np.all(np.abs(s["sigma3"]) <= s["sigmaP"] + 1e-12)
    for k in (0, 17, 150, 300):
        amp = exact_evolve(st, P, s_t[k]).amplitudes
        w = np.linalg.eigvalsh(amp @ amp.conj().T)  # reduced atom density
        assert s["sigmaP"][k] == pytest.approx(w[1] - w[0], abs=1e-10)
    # the series and the single-time path agree
    one = exact_observables(exact_evolve(st, P, 30.0), P)
    assert one.sigma3 == pytest.approx(s["sigma3"][-1], abs=1e-13)
    assert one.B == pytest.approx(s["B"][-1], abs=1e-12)
