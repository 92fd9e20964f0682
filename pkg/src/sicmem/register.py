"""Density-matrix model of the strongly coupled electron-nuclear register.

Qubit 0 is the electron pseudospin {m_s = 0 -> |0>, m_s = -1 -> |1>};
qubits 1.. are nuclear spins. Gates are ideal unitaries followed by
depolarising noise on the qubits they touch.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from functools import reduce

import numpy as np
from scipy.optimize import brentq

from . import constants as const

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def rx(theta):
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * X


@dataclass(frozen=True)
class NoiseModel:
    """Calibrated gate-count noise.

    p_gate: two-qubit (or single-qubit) depolarising probability after each gate.
    p_dephase: electron dephasing probability accrued during each slow RF gate.
    """

    p_gate: float = 0.0
    p_dephase: float = 0.0
    reinit_fidelity: float = 1.0
    readout_error: float = 0.0

    def __post_init__(self):
        for name in ("p_gate", "p_dephase", "reinit_fidelity", "readout_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def is_noiseless(self) -> bool:
        return self.p_gate == 0 and self.p_dephase == 0 and self.reinit_fidelity == 1


NOISELESS = NoiseModel()


@dataclass(frozen=True)
class RegisterState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        d = rho.shape[0]
        if rho.shape != (d, d) or d not in (4, 8):
            raise ValueError("register density matrix must be 4x4 or 8x8")
        object.__setattr__(self, "rho", rho)

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.rho.shape[0]))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def check(self, tol=1e-10, psd_tol=1e-8):
        if not np.allclose(self.rho, self.rho.conj().T, atol=tol):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(self.rho) - 1) > tol:
            raise ValueError("density matrix does not have unit trace")
        if np.linalg.eigvalsh(self.rho).min() < -psd_tol:
            raise ValueError("density matrix is not positive semidefinite")
        return self

    @classmethod
    def mixed(cls, n_qubits: int = 2) -> "RegisterState":
        d = 2**n_qubits
        return cls(np.eye(d) / d)

    @classmethod
    def ground(cls, n_qubits: int = 2) -> "RegisterState":
        d = 2**n_qubits
        rho = np.zeros((d, d))
        rho[0, 0] = 1
        return cls(rho)

    @classmethod
    def pure(cls, psi) -> "RegisterState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def to_json(self) -> str:
        return json.dumps([[[float(z.real), float(z.imag)] for z in row] for row in self.rho])


def _embed(op_by_qubit: dict[int, np.ndarray], n: int) -> np.ndarray:
    return reduce(np.kron, [op_by_qubit.get(q, I2) for q in range(n)])


def partial_trace(rho, keep, n):
    """Reduced density matrix on the qubits in ``keep`` (in order)."""
    keep = list(keep)
    t = rho.reshape([2] * (2 * n))
    trace_out = [q for q in range(n) if q not in keep]
    for k, q in enumerate(sorted(trace_out, reverse=True)):
        m = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + m)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def depolarize(rho, qubits, p, n):
    """(1-p) rho + p Tr_S(rho) (x) I_S / d_S on the qubit subset S."""
    if p == 0:
        return rho
    qubits = sorted(qubits)
    rest = [q for q in range(n) if q not in qubits]
    reduced = partial_trace(rho, rest, n) if rest else np.ones((1, 1))
    d_s = 2 ** len(qubits)
    # build reduced (x) I_S in the rest+S ordering then permute back
    full = np.kron(reduced, np.eye(d_s) / d_s)
    order = rest + qubits
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n))
    t = t.transpose(list(perm) + [n + i for i in perm])
    return (1 - p) * rho + p * t.reshape(rho.shape)


def dephase(rho, qubit, p, n):
    """(1-p) rho + p Z rho Z on one qubit."""
    if p == 0:
        return rho
    z = _embed({qubit: Z}, n)
    return (1 - p) * rho + p * z @ rho @ z


@dataclass(frozen=True)
class GateOp:
    """kind: 'CnROTe', 'CeROTn', 'e_rot', 'n_rot', 'SWAP', or 'identity'.

    ``target`` is the nuclear qubit involved (1-based register index);
    ``control`` is the control-qubit state that enables the rotation.
    ``p`` overrides the noise model's depolarising probability for this gate.
    """

    kind: str
    theta: float = np.pi
    control: int = 1
    target: int = 1
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("CnROTe", "CeROTn", "e_rot", "n_rot", "SWAP", "identity"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.control not in (0, 1):
            raise ValueError("control state must be 0 or 1")

    @property
    def is_rf(self) -> bool:
        return self.kind in ("CeROTn", "n_rot")

    def touched(self) -> list[int]:
        return {"e_rot": [0], "n_rot": [self.target], "identity": []}.get(self.kind, [0, self.target])

    def unitary(self, n: int) -> np.ndarray:
        proj = P1 if self.control == 1 else P0
        other = P0 if self.control == 1 else P1
        if self.kind == "identity":
            return np.eye(2**n, dtype=complex)
        if self.kind == "e_rot":
            return _embed({0: rx(self.theta)}, n)
        if self.kind == "n_rot":
            return _embed({self.target: rx(self.theta)}, n)
        if self.kind == "CeROTn":
            return _embed({0: proj, self.target: rx(self.theta)}, n) + _embed({0: other}, n)
        if self.kind == "CnROTe":
            return _embed({self.target: proj, 0: rx(self.theta)}, n) + _embed({self.target: other}, n)
        swap = sum(_embed({0: PAULIS[p], self.target: PAULIS[p]}, n) for p in "IXYZ") / 2
        return swap


def _cnot(control, target, n):
    return _embed({control: P0}, n) + _embed({control: P1, target: X}, n)


def apply_gate(state: RegisterState, gate: GateOp, noise: NoiseModel = NOISELESS) -> RegisterState:
    n = state.n_qubits
    if gate.kind != "e_rot" and gate.kind != "identity" and not 1 <= gate.target < n:
        raise ValueError(f"dimension mismatch: no nuclear qubit {gate.target} in a {n}-qubit register")
    u = gate.unitary(n)
    rho = u @ state.rho @ u.conj().T
    p = noise.p_gate if gate.p is None else gate.p
    rho = depolarize(rho, gate.touched(), p, n) if gate.touched() else rho
    if gate.is_rf:
        rho = dephase(rho, 0, noise.p_dephase, n)
    return RegisterState(rho)


def apply_cnot(state: RegisterState, control: int, target: int, noise: NoiseModel = NOISELESS) -> RegisterState:
    """Exact controlled-NOT (control on |1>) with gate noise on both qubits."""
    n = state.n_qubits
    u = _cnot(control, target, n)
    rho = depolarize(u @ state.rho @ u.conj().T, [control, target], noise.p_gate, n)
    if control == 0:  # electron-controlled nuclear flip is a slow RF gate
        rho = dephase(rho, 0, noise.p_dephase, n)
    return RegisterState(rho)


def optical_reinit_electron(state: RegisterState, fidelity: float = 1.0) -> RegisterState:
    """Reset the electron to |0> (with probability ``fidelity``), keeping the nuclei."""
    n = state.n_qubits
    nuclear = partial_trace(state.rho, list(range(1, n)), n)
    electron = np.diag([fidelity, 1 - fidelity]).astype(complex)
    return RegisterState(np.kron(electron, nuclear))


def swap_electron_nucleus(state: RegisterState, target: int = 1, noise: NoiseModel = NOISELESS) -> RegisterState:
    """SWAP compiled as CeNOT_n, CnNOT_e, CeNOT_n."""
    s = apply_cnot(state, 0, target, noise)
    s = apply_cnot(s, target, 0, noise)
    return apply_cnot(s, 0, target, noise)


def nuclear_polarization(state: RegisterState, target: int = 1) -> float:
    """<sigma_z> of a nuclear qubit (+1 for fully polarised into |0>)."""
    rho_n = partial_trace(state.rho, [target], state.n_qubits)
    return float(np.real(rho_n[0, 0] - rho_n[1, 1]))


def nuclear_init_fidelity(state: RegisterState, target: int = 1) -> float:
    return 0.5 * (1 + nuclear_polarization(state, target))


def algorithmic_cool(state: RegisterState, iterations: int, noise: NoiseModel = NOISELESS,
                     target: int = 1) -> RegisterState:
    """Repeated electron reset followed by an electron-nucleus SWAP."""
    if iterations < 1:
        raise ValueError("algorithmic cooling needs at least one iteration")
    for _ in range(iterations):
        state = optical_reinit_electron(state, noise.reinit_fidelity)
        state = swap_electron_nucleus(state, target, noise)
    return state


def bell_circuit_ideal(n_qubits: int = 2, target: int = 1) -> RegisterState:
    """Noiseless output of the entangling circuit on |0...0>."""
    return entangle_bell(RegisterState.ground(n_qubits), NOISELESS, target)


def entangle_bell(state: RegisterState, noise: NoiseModel = NOISELESS, target: int = 1) -> RegisterState:
    """Electron pi/2, then a pi rotation of the nucleus conditioned on m_s = -1."""
    s = optical_reinit_electron(state, noise.reinit_fidelity)
    # the circuit starts by resetting the electron, so judge the nuclei after that
    if noise.is_noiseless and s.purity < 0.99:
        raise ValueError(f"register not initialised: purity {s.purity:.3f} < 0.99")
    s = apply_gate(s, GateOp("e_rot", np.pi / 2), noise)
    return apply_gate(s, GateOp("CeROTn", np.pi, control=1, target=target), noise)


def reduce_to_pair(state: RegisterState, target: int = 1) -> np.ndarray:
    """Electron plus one nucleus, other nuclei traced out."""
    return partial_trace(state.rho, [0, target], state.n_qubits)


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (squared convention)."""
    from scipy.linalg import sqrtm

    s = sqrtm(rho)
    val = np.real(np.trace(sqrtm(s @ sigma @ s))) ** 2
    return float(min(max(val, 0.0), 1.0))


def bell_fidelity(state: RegisterState, target: int = 1) -> float:
    ideal = reduce_to_pair(bell_circuit_ideal(state.n_qubits, target), target)
    rho = reduce_to_pair(state, target)
    return float(np.real(np.trace(ideal @ rho)))


def concurrence(rho) -> float:
    yy = np.kron(Y, Y)
    r = rho @ yy @ rho.conj() @ yy
    ev = np.sqrt(np.clip(np.sort(np.real(np.linalg.eigvals(r)))[::-1], 0, None))
    return float(max(0.0, ev[0] - ev[1] - ev[2] - ev[3]))


# -- tomography ----------------------------------------------------------------

PAULI_LABELS = [a + b for a in "IXYZ" for b in "IXYZ"]


def pauli_expectations(rho) -> dict[str, float]:
    return {lab: float(np.real(np.trace(np.kron(PAULIS[lab[0]], PAULIS[lab[1]]) @ rho))) for lab in PAULI_LABELS}


def linear_inversion(expectations: dict[str, float]) -> np.ndarray:
    return sum(expectations[lab] * np.kron(PAULIS[lab[0]], PAULIS[lab[1]]) for lab in PAULI_LABELS) / 4


def project_psd(rho) -> np.ndarray:
    """Closest unit-trace PSD matrix in Frobenius norm (eigenvalues onto the simplex)."""
    rho = (rho + rho.conj().T) / 2
    w, v = np.linalg.eigh(rho)
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(u) + 1)
    cond = u - (css - 1) / k > 0
    r = k[cond][-1]
    shift = (css[r - 1] - 1) / r
    w_new = np.clip(w - shift, 0, None)
    return (v * w_new) @ v.conj().T


def qst(rho, shots: int | None = None, seed: int | None = None, psd: bool = False,
        readout_error: float = 0.0) -> np.ndarray:
    """Pauli tomography of a two-qubit state by linear inversion.

    ``shots=None`` uses exact expectations; otherwise each of the 15
    non-trivial Pauli observables is estimated from ``shots`` +/-1 outcomes.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("tomography expects a two-qubit density matrix")
    exp = pauli_expectations(rho)
    if readout_error:
        for lab in PAULI_LABELS:
            exp[lab] *= (1 - 2 * readout_error) ** sum(ch != "I" for ch in lab)
    if shots is not None:
        if shots < 1:
            raise ValueError("shots must be at least 1")
        rng = np.random.default_rng(seed)
        for lab in PAULI_LABELS[1:]:
            p_plus = np.clip((1 + exp[lab]) / 2, 0, 1)
            exp[lab] = 2 * rng.binomial(shots, p_plus) / shots - 1
    est = linear_inversion(exp)
    return project_psd(est) if psd else est


def ppt_min_eigenvalue(rho) -> float:
    """Smallest eigenvalue of the partial transpose over the second qubit."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("PPT test expects a 4x4 density matrix")
    if not np.allclose(rho, rho.conj().T, atol=1e-10) or abs(np.trace(rho) - 1) > 1e-8:
        raise ValueError("invalid density matrix")
    pt = rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    return float(np.linalg.eigvalsh(pt).min())


def werner(p: float) -> np.ndarray:
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    return p * np.outer(phi, phi) + (1 - p) * np.eye(4) / 4


# -- ODMR ----------------------------------------------------------------------

@dataclass(frozen=True)
class ODMRSpectrum:
    detuning_mhz: np.ndarray
    contrast: np.ndarray
    populations: np.ndarray
    inferred_fidelity: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["detuning_MHz", "contrast"])
        for d, c in zip(self.detuning_mhz, self.contrast):
            w.writerow([repr(float(d)), repr(float(c))])
        return buf.getvalue()

    def peaks(self, rel_height: float = 0.05) -> np.ndarray:
        c = self.contrast
        interior = (c[1:-1] > c[:-2]) & (c[1:-1] >= c[2:]) & (c[1:-1] > rel_height * c.max())
        return self.detuning_mhz[1:-1][interior]


def _lorentz(x, x0, hwhm):
    return hwhm**2 / ((x - x0) ** 2 + hwhm**2)


def odmr_spectrum(state, A_par: float, linewidth: float, detuning_mhz=None, target: int = 1) -> ODMRSpectrum:
    """Two Lorentzian lines at -/+ A_par/2 weighted by the nuclear |0>/|1> populations.

    ``A_par`` and ``linewidth`` (FWHM) in rad/s. ``state`` is a RegisterState
    or a pair of nuclear populations.
    """
    if linewidth <= 0:
        raise ValueError("linewidth must be positive")
    if isinstance(state, RegisterState):
        rho_n = partial_trace(state.rho, [target], state.n_qubits)
        pops = np.real(np.diag(rho_n))
    else:
        pops = np.asarray(state, dtype=float)
    split = A_par / const.TWO_PI / 1e6
    hwhm = linewidth / const.TWO_PI / 1e6 / 2
    if detuning_mhz is None:
        # grid aligned so both line centres fall on grid points
        step = abs(split) / 800 if split else hwhm / 100
        m = int(np.ceil((abs(split) / 2 + 10 * hwhm) / step))
        detuning_mhz = np.arange(-m, m + 1) * step
    x = np.asarray(detuning_mhz, dtype=float)
    basis = np.stack([_lorentz(x, -split / 2, hwhm), _lorentz(x, split / 2, hwhm)], axis=1)
    contrast = basis @ pops
    weights, *_ = np.linalg.lstsq(basis, contrast, rcond=None)
    weights = np.clip(weights, 0, None)
    fid = float(weights.max() / weights.sum()) if weights.sum() > 0 else 0.5
    return ODMRSpectrum(x, contrast, pops, fid)


# -- calibration ---------------------------------------------------------------

def cooled_state(noise: NoiseModel, iterations: int = 2, n_qubits: int = 2) -> RegisterState:
    return algorithmic_cool(RegisterState.mixed(n_qubits), iterations, noise)


def protocol_fidelities(noise: NoiseModel, iterations: int = 2) -> tuple[float, float]:
    """(nuclear initialisation fidelity, Bell-state fidelity) of the full protocol."""
    cooled = cooled_state(noise, iterations)
    bell = entangle_bell(cooled, noise)
    return nuclear_init_fidelity(cooled), bell_fidelity(bell)


def calibrate_noise(init_target: float = 0.93, bell_target: float = 0.81, iterations: int = 2,
                    base: NoiseModel = NOISELESS) -> NoiseModel:
    """Invert the noise model so the protocol reproduces both target fidelities.

    Gate depolarisation fixes the initialisation fidelity (dephasing leaves
    the diagonal cooling dynamics untouched); RF-gate dephasing then fixes
    the Bell fidelity.
    """
    def init_err(p):
        return protocol_fidelities(replace(base, p_gate=p, p_dephase=0.0), iterations)[0] - init_target

    p_gate = brentq(init_err, 0.0, 1.0, xtol=1e-14)
    with_gate = replace(base, p_gate=p_gate)

    def bell_err(p):
        return protocol_fidelities(replace(with_gate, p_dephase=p), iterations)[1] - bell_target

    p_dephase = brentq(bell_err, 0.0, 0.5, xtol=1e-14)
    return replace(with_gate, p_dephase=p_dephase)
