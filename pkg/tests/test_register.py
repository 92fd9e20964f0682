import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sicmem import constants as const
from sicmem.register import (NOISELESS, PAULIS, GateOp, NoiseModel, RegisterState, algorithmic_cool, apply_gate,
                             bell_circuit_ideal, bell_fidelity, calibrate_noise, concurrence, cooled_state, dephase,
                             depolarize, entangle_bell, linear_inversion, nuclear_init_fidelity, nuclear_polarization,
                             odmr_spectrum, optical_reinit_electron, partial_trace, pauli_expectations, ppt_min_eigenvalue,
                             project_psd, protocol_fidelities, qst, reduce_to_pair, state_fidelity, swap_electron_nucleus,
                             werner)

PHI_PLUS = np.array([1, 0, 0, 1]) / np.sqrt(2)


def random_rho(rng, d, rank=None):
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def trace_distance(a, b):
    return 0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum()


def is_physical(rho, tol=1e-10):
    return (np.allclose(rho, rho.conj().T, atol=tol) and abs(np.trace(rho) - 1) < 1e-12
            and np.linalg.eigvalsh(rho).min() > -1e-8)


# -- states and channels -------------------------------------------------------

def test_state_validation():
    with pytest.raises(ValueError):
        RegisterState(np.eye(2) / 2)
    with pytest.raises(ValueError, match="positive"):
        RegisterState(np.diag([1.5, -0.5, 0, 0])).check()
    s = RegisterState.pure([1, 0, 0, 1])
    assert s.purity == pytest.approx(1.0) and s.n_qubits == 2
    assert len(json.loads(s.to_json())) == 4


def test_partial_trace_matches_einsum():
    rho = random_rho(np.random.default_rng(0), 8)
    t = rho.reshape([2] * 6)
    assert np.allclose(partial_trace(rho, [0], 3), np.einsum("abcdbc->ad", t))
    assert np.allclose(partial_trace(rho, [0, 2], 3), np.einsum("abcdbf->acdf", t).reshape(4, 4))


def test_depolarize_matches_pauli_kraus():
    rng = np.random.default_rng(1)
    rho = random_rho(rng, 4)
    p = 0.3
    for q in (0, 1):
        ops = [np.kron(P, np.eye(2)) if q == 0 else np.kron(np.eye(2), P) for P in PAULIS.values()]
        kraus = (1 - 3 * p / 4) * rho + p / 4 * sum(o @ rho @ o for o in ops[1:])
        assert np.allclose(depolarize(rho, [q], p, 2), kraus, atol=1e-12)
    assert np.allclose(depolarize(rho, [0, 1], 1.0, 2), np.eye(4) / 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1), st.floats(0, 1),
       st.sampled_from(["CnROTe", "CeROTn", "e_rot", "n_rot", "SWAP", "identity"]), st.floats(0, 2 * np.pi))
def test_channels_preserve_trace_and_positivity(seed, p, q, kind, theta):
    rng = np.random.default_rng(seed)
    s = RegisterState(random_rho(rng, 8))
    out = apply_gate(s, GateOp(kind, theta, target=2), NoiseModel(p, q))
    assert is_physical(out.rho)
    assert is_physical(optical_reinit_electron(s, fidelity=q).rho)
    assert is_physical(dephase(s.rho, 1, p, 3))


@pytest.mark.parametrize("kind", ["CnROTe", "CeROTn", "e_rot", "n_rot", "SWAP", "identity"])
def test_ideal_gates_are_unitary(kind):
    for n in (2, 3):
        u = GateOp(kind, 0.7).unitary(n)
        assert np.allclose(u.conj().T @ u, np.eye(2**n), atol=1e-12)


def test_noiseless_gate_preserves_purity():
    s = RegisterState.pure(np.random.default_rng(2).normal(size=4))
    out = apply_gate(s, GateOp("CeROTn", 1.1))
    assert out.purity == pytest.approx(1.0, abs=1e-12)


def test_gate_examples():
    g = RegisterState.ground(2)
    assert np.allclose(apply_gate(g, GateOp("identity")).rho, g.rho)
    # electron in m_s = 0 does not satisfy the m_s = -1 control
    assert np.allclose(apply_gate(g, GateOp("CeROTn", np.pi, control=1)).rho, g.rho)
    s = RegisterState(random_rho(np.random.default_rng(3), 4))
    twice = apply_gate(apply_gate(s, GateOp("n_rot", np.pi)), GateOp("n_rot", np.pi))
    assert trace_distance(twice.rho, s.rho) < 1e-10
    with pytest.raises(ValueError, match="dimension mismatch"):
        apply_gate(g, GateOp("n_rot", target=2))
    with pytest.raises(ValueError):
        GateOp("CZ")


def test_swap_compilation_matches_swap_gate():
    s = RegisterState(random_rho(np.random.default_rng(4), 4))
    assert np.allclose(swap_electron_nucleus(s).rho, apply_gate(s, GateOp("SWAP")).rho, atol=1e-12)


def test_optical_reinit():
    s = RegisterState(random_rho(np.random.default_rng(5), 4))
    out = optical_reinit_electron(s)
    assert np.allclose(partial_trace(out.rho, [0], 2), np.diag([1, 0]))
    assert trace_distance(partial_trace(out.rho, [1], 2), partial_trace(s.rho, [1], 2)) < 1e-10
    mixed = optical_reinit_electron(RegisterState.mixed(2))
    assert np.allclose(mixed.rho, np.kron(np.diag([1, 0]), np.eye(2) / 2))


# -- cooling and entanglement ----------------------------------------------------

def test_cooling_noiseless():
    out = algorithmic_cool(RegisterState.mixed(2), 1)
    assert nuclear_polarization(out) == pytest.approx(1.0)
    three = algorithmic_cool(RegisterState.mixed(3), 1, target=2)
    assert nuclear_polarization(three, 2) == pytest.approx(1.0)
    assert nuclear_polarization(three, 1) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        algorithmic_cool(RegisterState.mixed(2), 0)


def test_noiseless_bell():
    bell = entangle_bell(algorithmic_cool(RegisterState.mixed(2), 1))
    rho = reduce_to_pair(bell)
    assert bell_fidelity(bell) == pytest.approx(1.0, abs=1e-12)
    assert ppt_min_eigenvalue(rho) == pytest.approx(-0.5, abs=1e-12)
    assert concurrence(rho) == pytest.approx(1.0, abs=1e-9)
    for q in (0, 1):
        assert np.allclose(partial_trace(rho, [q], 2), np.eye(2) / 2)
    # the ideal circuit output is a maximally entangled state
    overlaps = [abs(np.vdot(v, rho @ v)) for v in np.eye(4)]
    assert np.allclose(overlaps, [0.5, 0, 0, 0.5]) or np.allclose(overlaps, [0.5, 0, 0.5, 0]) \
        or np.allclose(overlaps, [0, 0.5, 0, 0.5]) or np.allclose(overlaps, [0.5, 0.5, 0, 0])


def test_bell_rejects_uninitialised_register():
    with pytest.raises(ValueError, match="not initialised"):
        entangle_bell(RegisterState.mixed(2))


def test_depolarised_input_stays_separable():
    out = entangle_bell(RegisterState.mixed(2), NoiseModel(p_gate=1.0))
    assert ppt_min_eigenvalue(reduce_to_pair(out)) >= -1e-8


def test_three_qubit_bell_ignores_spectator():
    bell = bell_circuit_ideal(3, target=2)
    assert ppt_min_eigenvalue(reduce_to_pair(bell, 2)) == pytest.approx(-0.5)
    assert bell_fidelity(bell, 2) == pytest.approx(1.0)


def test_calibration_reproduces_targets():
    noise = calibrate_noise(0.93, 0.81)
    init, bell = protocol_fidelities(noise)
    assert init == pytest.approx(0.93, abs=1e-9)
    assert bell == pytest.approx(0.81, abs=1e-9)
    # dephasing leaves the cooled populations alone
    a = nuclear_init_fidelity(cooled_state(noise))
    b = nuclear_init_fidelity(cooled_state(NoiseModel(noise.p_gate)))
    assert a == pytest.approx(b, abs=1e-12)


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseModel(p_gate=1.2)
    assert NOISELESS.is_noiseless and not NoiseModel(0.1).is_noiseless


# -- tomography and PPT ----------------------------------------------------------

def test_ppt_values():
    assert ppt_min_eigenvalue(np.outer(PHI_PLUS, PHI_PLUS)) == pytest.approx(-0.5)
    rng = np.random.default_rng(6)
    for _ in range(20):
        prod = np.kron(random_rho(rng, 2), random_rho(rng, 2))
        assert ppt_min_eigenvalue(prod) >= -1e-12
    with pytest.raises(ValueError):
        ppt_min_eigenvalue(np.eye(4))


def test_werner_crossing():
    p = np.linspace(0, 1, 1001)
    lam = np.array([ppt_min_eigenvalue(werner(x)) for x in p])
    assert np.allclose(lam, (1 - 3 * p) / 4, atol=1e-12)
    crossing = p[np.flatnonzero(lam < 0)[0]]
    assert abs(crossing - 1 / 3) < 0.01
    assert concurrence(werner(0.8)) == pytest.approx((3 * 0.8 - 1) / 2)


def test_exact_tomography_is_inverse():
    rng = np.random.default_rng(7)
    for _ in range(10):
        rho = random_rho(rng, 4)
        assert np.max(np.abs(qst(rho) - rho)) < 1e-10
        assert np.max(np.abs(linear_inversion(pauli_expectations(rho)) - rho)) < 1e-12


def test_psd_projection():
    rng = np.random.default_rng(8)
    rho = random_rho(rng, 4)
    assert np.allclose(project_psd(rho), rho, atol=1e-12)
    noisy = rho + 0.2 * (lambda h: h + h.conj().T)(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    noisy = noisy - (np.trace(noisy) - 1) * np.eye(4) / 4
    proj = project_psd(noisy)
    assert is_physical(proj)
    assert np.allclose(project_psd(proj), proj, atol=1e-12)
    for _ in range(200):
        other = random_rho(rng, 4, rank=rng.integers(1, 5))
        assert np.linalg.norm(proj - noisy) <= np.linalg.norm(other - noisy) + 1e-12


def test_shot_tomography_of_bell_state():
    bell = np.outer(PHI_PLUS, PHI_PLUS)
    fids = [state_fidelity(qst(bell, shots=10_000, seed=s, psd=True), bell) for s in range(100)]
    assert np.median(fids) > 0.98
    with pytest.raises(ValueError):
        qst(bell, shots=0)
    assert np.array_equal(qst(bell, shots=100, seed=3), qst(bell, shots=100, seed=3))


def test_state_fidelity():
    rng = np.random.default_rng(9)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    sigma = random_rho(rng, 4)
    assert state_fidelity(np.outer(psi, psi.conj()), sigma) == pytest.approx(np.real(psi.conj() @ sigma @ psi))
    assert state_fidelity(sigma, sigma) == pytest.approx(1.0)


# -- ODMR ------------------------------------------------------------------------

A_PAR = const.TWO_PI * 13.2e6
WIDTH = const.TWO_PI * 1e6


def test_odmr_lines():
    pol = odmr_spectrum([1.0, 0.0], A_PAR, WIDTH)
    assert len(pol.peaks()) == 1 and pol.inferred_fidelity == pytest.approx(1.0)
    mixed = odmr_spectrum(RegisterState.mixed(2), A_PAR, WIDTH)
    pk = mixed.peaks()
    assert len(pk) == 2 and np.allclose(pk, [-6.6, 6.6], atol=1e-9)
    assert mixed.inferred_fidelity == pytest.approx(0.5)
    part = odmr_spectrum([0.93, 0.07], A_PAR, WIDTH)
    assert part.inferred_fidelity == pytest.approx(0.93, abs=1e-9)
    assert pk[1] - pk[0] == pytest.approx(13.2)
    with pytest.raises(ValueError):
        odmr_spectrum([1.0, 0.0], A_PAR, 0.0)
    assert part.to_csv().splitlines()[0] == "detuning_MHz,contrast"
