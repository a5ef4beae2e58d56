import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kerrfeedback.fock import FockOperator, ModeSpace, SpaceMismatchError, annihilator, zero
from kerrfeedback.slh import (CircuitParams, QubitParams, SlhTriple, build_circuit, collective_lindblad,
                              controller_hamiltonian, direct_feedback, kerr_from_qubit,
                              rotating_frame_hamiltonian, series)

SPACE = ModeSpace((3, 3))


def random_op(rng, space=SPACE):
    n = space.total_dim
    return FockOperator(space, rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


def random_hermitian(rng, space=SPACE):
    x = random_op(rng, space)
    return 0.5 * (x + x.dag())


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_triple(rng, channels=1):
    S = random_unitary(rng, channels)
    return SlhTriple(S, tuple(random_op(rng) for _ in range(channels)), random_hermitian(rng))


def triples_close(G1, G2, atol=1e-12):
    return (np.allclose(G1.S, G2.S, atol=atol, rtol=0)
            and all(a.allclose(b, atol=atol * max(1, np.max(np.abs(b.matrix)))) for a, b in zip(G1.L, G2.L))
            and G1.H.allclose(G2.H, atol=atol * max(1, np.max(np.abs(G2.H.matrix)))))


def random_params(rng, **fixed):
    kw = dict(gamma=rng.uniform(0, 5), gamma_f=rng.uniform(0, 5), kappa=rng.uniform(0, 5),
              chi=rng.uniform(-20, 20), delta_s=rng.uniform(-100, 100), delta=rng.uniform(-50, 50),
              epsilon=rng.uniform(0, 3))
    kw.update(fixed)
    return CircuitParams(**kw)


# --- the triple itself -----------------------------------------------------

def test_triple_validates():
    a = annihilator(SPACE, 0)
    with pytest.raises(ValueError, match="unitary"):
        SlhTriple(np.array([[2.0]]), (a,), zero(SPACE))
    with pytest.raises(ValueError, match="Hermitian"):
        SlhTriple.single(a, a)
    with pytest.raises(ValueError):
        SlhTriple(np.eye(2), (a,), zero(SPACE))
    with pytest.raises(SpaceMismatchError):
        SlhTriple.single(a, zero(ModeSpace((2, 2))))


# --- series ----------------------------------------------------------------

def test_series_two_cavity_example():
    g, k, ws = 1.3, 0.7, 2.1
    a, c = annihilator(SPACE, 0), annihilator(SPACE, 1)
    Hc = 0.4 * (c.dag() @ c)
    G = series(SlhTriple.single(math.sqrt(g) * a, ws * (a.dag() @ a)), SlhTriple.single(math.sqrt(k) * c, Hc))
    assert G.L[0].allclose(math.sqrt(k) * c + math.sqrt(g) * a)
    expected = ws * (a.dag() @ a) + Hc + 0.5j * math.sqrt(g * k) * (a.dag() @ c - c.dag() @ a)
    assert G.H.allclose(expected)


def test_series_with_identity_component():
    rng = np.random.default_rng(0)
    G = random_triple(rng)
    unit = SlhTriple.single(zero(SPACE))
    assert triples_close(series(G, unit), G)
    assert triples_close(series(unit, G), G)


def test_series_rejects_mismatch():
    rng = np.random.default_rng(1)
    with pytest.raises(ValueError):
        series(random_triple(rng, 1), random_triple(rng, 2))
    other = SlhTriple.single(zero(ModeSpace((2, 2))))
    with pytest.raises(SpaceMismatchError):
        series(random_triple(rng), other)


@pytest.mark.parametrize("seed", range(50))
def test_series_associativity(seed):
    rng = np.random.default_rng(seed)
    channels = 1 + seed % 2
    G1, G2, G3 = (random_triple(rng, channels) for _ in range(3))
    assert triples_close(series(series(G1, G2), G3), series(G1, series(G2, G3)))


@pytest.mark.parametrize("seed", range(50))
def test_compositions_preserve_unitarity_and_hermiticity(seed):
    rng = np.random.default_rng(100 + seed)
    channels = 1 + seed % 3
    G1, G2 = random_triple(rng, channels), random_triple(rng, channels)
    for G in (series(G1, G2), direct_feedback(G1)):
        eye = np.eye(channels)
        assert np.allclose(G.S.conj().T @ G.S, eye, atol=1e-12, rtol=0)
        scale = max(1.0, np.max(np.abs(G.H.matrix)))
        assert G.H.is_hermitian(atol=1e-12 * scale)


def test_pure_scattering_component_only_rotates_L():
    rng = np.random.default_rng(3)
    G = random_triple(rng, 2)
    U = random_unitary(rng, 2)
    P = SlhTriple(U, (zero(SPACE), zero(SPACE)), zero(SPACE))
    out = series(G, P)
    assert out.H.allclose(G.H, atol=1e-12)
    for i in range(2):
        assert out.L[i].allclose(U[i, 0] * G.L[0] + U[i, 1] * G.L[1], atol=1e-12)


# --- feedback --------------------------------------------------------------

def test_feedback_with_unit_scattering_doubles_L():
    rng = np.random.default_rng(4)
    G = SlhTriple.single(random_op(rng), random_hermitian(rng))
    F = direct_feedback(G)
    assert np.allclose(F.S, 1)
    assert F.L[0].allclose(2 * G.L[0])
    assert F.H.allclose(G.H)


def test_feedback_with_phase_i():
    rng = np.random.default_rng(5)
    L, H = random_op(rng), random_hermitian(rng)
    F = direct_feedback(SlhTriple(np.array([[1j]]), (L,), H))
    assert np.allclose(F.S, -1)
    assert F.L[0].allclose((1 + 1j) * L, atol=1e-12)
    assert F.H.allclose(H + L.dag() @ L, atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_feedback_is_series_with_itself(seed):
    # closing the loop equals cascading G into a copy that shares its system,
    # with that system's Hamiltonian counted once
    rng = np.random.default_rng(200 + seed)
    G = random_triple(rng, 1 + seed % 2)
    copy = SlhTriple(G.S, G.L, zero(SPACE))
    assert triples_close(direct_feedback(G), series(G, copy), atol=1e-11)


# --- the circuit -------------------------------------------------------------

@pytest.mark.parametrize("seed", range(50))
def test_build_circuit_matches_closed_form(seed):
    rng = np.random.default_rng(300 + seed)
    p = random_params(rng)
    G = build_circuit(p, SPACE)
    assert np.allclose(G.S, 1, atol=1e-12)
    assert G.L[0].allclose(collective_lindblad(p, SPACE), atol=1e-12)
    Hc = rotating_frame_hamiltonian(p, SPACE)
    assert G.H.allclose(Hc, atol=1e-12 * max(1, np.max(np.abs(Hc.matrix))))


def test_circuit_L_explicit():
    p = CircuitParams(gamma=2.0, gamma_f=2.5, kappa=1.0, chi=10)
    a, c = annihilator(SPACE, 0), annihilator(SPACE, 1)
    L = build_circuit(p, SPACE).L[0]
    assert L.allclose(math.sqrt(1.0) * c + (math.sqrt(2.0) + math.sqrt(2.5)) * a)


def test_symmetric_feedback_cancels_coherent_coupling():
    p = CircuitParams(gamma=1.7, gamma_f=1.7, kappa=0.9, chi=3, delta_s=5, delta=1, epsilon=0.2)
    H = build_circuit(p, SPACE).H
    i10, i01 = SPACE.basis_index((1, 0)), SPACE.basis_index((0, 1))
    assert abs(H.matrix[i10, i01]) < 1e-14
    assert p.feedback_coupling == 0


def test_zero_kappa_decouples_controller():
    p = CircuitParams(gamma=1.0, gamma_f=4.0, kappa=0.0, chi=2.0, epsilon=0.5)
    a = annihilator(SPACE, 0)
    assert build_circuit(p, SPACE).L[0].allclose(3.0 * a)


def test_hamiltonian_all_couplings_off_is_diagonal():
    p = CircuitParams(gamma=1.0, gamma_f=1.0, kappa=1.0, delta_s=3.0, delta=-2.0)
    H = rotating_frame_hamiltonian(p, SPACE).matrix
    occ = SPACE.occupations()
    assert np.allclose(H, np.diag(3.0 * occ[:, 0] - 2.0 * occ[:, 1]))


def test_kerr_matrix_element():
    p = CircuitParams(gamma=0, gamma_f=0, kappa=0, chi=1.7)
    H = controller_hamiltonian(p, SPACE).matrix
    k = SPACE.basis_index((0, 2))
    assert H[k, k] == pytest.approx(-2 * 1.7)


def test_circuit_needs_two_modes():
    with pytest.raises(ValueError):
        build_circuit(CircuitParams(1, 1, 1), ModeSpace((3,)))


# --- parameters ------------------------------------------------------------

@pytest.mark.parametrize("field", ["gamma", "gamma_f", "kappa", "epsilon"])
def test_negative_rates_rejected(field):
    kw = dict(gamma=1.0, gamma_f=1.0, kappa=1.0)
    kw[field] = -0.1
    with pytest.raises(ValueError, match=field):
        CircuitParams(**kw)


def test_non_finite_rejected():
    with pytest.raises(ValueError, match="chi"):
        CircuitParams(1, 1, 1, chi=float("nan"))


def test_K_round_trip():
    p = CircuitParams(1, 1, 1, chi=10).with_K(1.5)
    assert p.delta == pytest.approx(5.0)
    assert p.K == pytest.approx(1.5)
    with pytest.raises(ZeroDivisionError):
        CircuitParams(1, 1, 1).K


# --- Kerr coefficient from the qubit ---------------------------------------

def test_kerr_from_qubit_examples():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert kerr_from_qubit(1.0, 0.5, 1.0).chi == pytest.approx(1.0)
        assert kerr_from_qubit(2.0, 0.5, 1.0).chi == pytest.approx(16.0)
        assert kerr_from_qubit(1.0, 0.5, 0.5).chi == pytest.approx(4.0)


def test_kerr_validity_flags():
    with pytest.warns(UserWarning):
        est = kerr_from_qubit(1.0, 0.5, 1.0)
    assert not est.valid
    good = kerr_from_qubit(2000.0, 4000.0, 25000.0)
    assert good.valid
    assert good.rabi_ratio == pytest.approx(0.04)
    assert good.dispersive_ratio == pytest.approx(0.08)


@pytest.mark.parametrize("Omega,delta", [(0, 1), (1, 0), (-1, 1)])
def test_kerr_rejects_nonpositive(Omega, delta):
    with pytest.raises(ValueError):
        kerr_from_qubit(1.0, Omega, delta)


def test_params_from_qubit():
    q = QubitParams(g=2000.0, Omega=4000.0, delta_qT=40000.0)
    p = CircuitParams.from_qubit(q, gamma=2, gamma_f=2.5, kappa=1)
    assert p.chi == pytest.approx(1.25)
    assert p.kerr_validity.valid
    assert p.as_dict()["qubit"]["delta_qT"] == 40000.0


@settings(max_examples=30, deadline=None)
@given(g=st.floats(0.1, 10), Omega=st.floats(0.1, 10), d=st.floats(0.1, 10))
def test_kerr_scaling(g, Omega, d):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = kerr_from_qubit(g, Omega, d).chi
        assert kerr_from_qubit(2 * g, Omega, d).chi == pytest.approx(16 * base)
        assert kerr_from_qubit(g, Omega, d / 2).chi == pytest.approx(4 * base)
