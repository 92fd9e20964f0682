"""Conditional nuclear dynamics under dynamical decoupling.

The electron alternates between the bright state (alpha = 0) and the
``m_s`` branch at every pi pulse; the nucleus sees one of two
Hamiltonians ``H_alpha = (w_L + alpha*A_par) Iz + alpha*A_perp Ix``.
One decoupling period ``tau - pi - 2tau - pi - tau`` gives the propagators

    V0 = U0(tau) U1(2 tau) U0(tau),   V1 = U1(tau) U0(2 tau) U1(tau)

and the electron coherence after N pulses is
``M = 1 - (1 - n0.n1) sin^2(N phi / 2)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import su2
from ._kernels import one_minus_m
from .hyperfine import ELEMENT_SPECIES, ElectronModel, Nucleus, effective_fields
from .lattice import BathConfiguration

DEFAULT_WINDOW_POINTS = 201


@dataclass(frozen=True)
class PulseSequence:
    """Ramsey (N = 0), Hahn (N = 1) or CPMG/XY8 (N pi pulses, spacing 2 tau)."""

    kind: str
    N: int
    tau: float = 0.0
    phases: str = ""

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("ramsey", "hahn", "cpmg", "xy8"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if kind == "ramsey" and self.N != 0:
            raise ValueError("Ramsey has no pi pulses")
        if kind == "hahn" and self.N != 1:
            raise ValueError("Hahn echo has exactly one pi pulse")
        if kind in ("cpmg", "xy8") and self.N < 1:
            raise ValueError("CPMG needs at least one pi pulse")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")

    @property
    def total_time(self) -> float:
        return 2 * self.N * self.tau

    @classmethod
    def xy8(cls, repetitions: int, tau: float) -> "PulseSequence":
        return cls("xy8", 8 * repetitions, tau, "XYXYYXYX" * repetitions)

    @classmethod
    def cpmg(cls, n: int, tau: float = 0.0) -> "PulseSequence":
        return cls("cpmg", n, tau, "X" * n)

    @classmethod
    def hahn(cls, tau: float = 0.0) -> "PulseSequence":
        return cls("hahn", 1, tau, "X")

    @classmethod
    def ramsey(cls) -> "PulseSequence":
        return cls("ramsey", 0)


@dataclass(frozen=True)
class ConditionalRotation:
    n0: np.ndarray
    n1: np.ndarray
    phi: float

    @property
    def dot(self) -> float:
        return float(np.dot(self.n0, self.n1))


@dataclass(frozen=True)
class GateDesign:
    k: int
    N: int
    tau: float
    theta: float
    dot: float
    fidelity: float
    theta_target: float = np.pi / 2

    @property
    def time(self) -> float:
        return 2 * self.N * self.tau

    def to_record(self) -> dict:
        return {
            "k": int(self.k),
            "N": int(self.N),
            "tau_us": self.tau * 1e6,
            "theta_rad": float(self.theta),
            "dot": float(self.dot),
            "time_ms": self.time * 1e3,
            "fidelity": float(self.fidelity),
        }


@dataclass(frozen=True)
class NMRSpectrum:
    tau: np.ndarray
    M: np.ndarray
    N: int
    m_s: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau_us", "M"])
        for t, m in zip(self.tau, self.M):
            w.writerow([repr(float(t * 1e6)), repr(float(m))])
        return buf.getvalue()

    def count_dips(self, threshold: float = 0.5) -> int:
        """Local minima of M lying below ``threshold``."""
        m = np.asarray(self.M)
        interior = (m[1:-1] < m[:-2]) & (m[1:-1] <= m[2:]) & (m[1:-1] < threshold)
        return int(interior.sum())


# -- vectorised core --------------------------------------------------------

def period_propagators(wz0, wx0, wz1, wx1, tau):
    """(V0, V1) quaternions of one decoupling period, broadcasting over inputs."""
    u0 = su2.evolution(wz0, wx0, tau)
    u1 = su2.evolution(wz1, wx1, tau)
    u0u0 = su2.evolution(wz0, wx0, 2 * tau)
    u1u1 = su2.evolution(wz1, wx1, 2 * tau)
    v0 = su2.mul(su2.mul(u0, u1u1), u0)
    v1 = su2.mul(su2.mul(u1, u0u0), u1)
    return v0, v1


def _branch_fields(w_l, a_par, a_perp, m_s):
    w_l, a_par, a_perp = (np.asarray(v, dtype=float) for v in (w_l, a_par, a_perp))
    return w_l, np.zeros_like(a_perp), w_l + m_s * a_par, m_s * a_perp


def magnetization_array(w_l, a_par, a_perp, m_s, N, tau):
    """Closed-form M for broadcastable arrays of spins, pulse counts and tau."""
    N = np.asarray(N)
    if np.any(N % 2):
        raise ValueError("incomplete DD period: N must be even")
    v0, v1 = period_propagators(*_branch_fields(w_l, a_par, a_perp, m_s), tau)
    phi, n0 = su2.angle_axis(v0)
    _, n1 = su2.angle_axis(v1)
    d = np.sum(n0 * n1, axis=-1)
    return 1 - (1 - d) * np.sin(N * phi / 2) ** 2


def _fields(nucleus: Nucleus, electron: ElectronModel):
    wz0, wx0 = effective_fields(nucleus, electron, 0)
    wz1, wx1 = effective_fields(nucleus, electron, electron.m_s)
    return wz0, wx0, wz1, wx1


def conditional_rotation(nucleus: Nucleus, electron: ElectronModel, tau: float) -> ConditionalRotation:
    if tau <= 0:
        raise ValueError("tau must be positive")
    v0, v1 = period_propagators(*_fields(nucleus, electron), tau)
    phi0, n0 = su2.angle_axis(v0)
    phi1, n1 = su2.angle_axis(v1)
    # both periods are cyclic permutations of U0^2 U1^2, so their traces agree
    assert abs(phi0 - phi1) < 1e-9
    return ConditionalRotation(n0, n1, float(phi0))


def magnetization(nucleus: Nucleus, electron: ElectronModel, N: int, tau):
    """Electron coherence after N pulses with one nucleus present."""
    if N % 2:
        raise ValueError("incomplete DD period: N must be even")
    return magnetization_array(nucleus.larmor(electron), nucleus.A_par, nucleus.A_perp,
                               electron.m_s, N, tau)


def branch_frequencies(nucleus: Nucleus, electron: ElectronModel) -> tuple[float, float]:
    wz0, wx0, wz1, wx1 = _fields(nucleus, electron)
    return float(np.hypot(wz0, wx0)), float(np.hypot(wz1, wx1))


def resonance_tau(k: int, omega_l: float, a_par: float) -> float:
    """Approximate dip position tau_k = (2k+1) pi / (2 w_L + A_par)."""
    if k < 0:
        raise ValueError("resonance order must be non-negative")
    denom = 2 * abs(omega_l) + a_par
    if denom == 0:
        raise ValueError("degenerate resonance: 2|w_L| + A_par = 0")
    return (2 * k + 1) * np.pi / denom


def nucleus_resonance_tau(k: int, nucleus: Nucleus, electron: ElectronModel) -> float:
    """Resonance order k using the exact precession frequencies of both branches."""
    w0, w1 = branch_frequencies(nucleus, electron)
    return resonance_tau(k, w0, w1 - w0)


# -- spectra -----------------------------------------------------------------

def bath_spectrum(bath: BathConfiguration, tau, N: int, electron: ElectronModel) -> NMRSpectrum:
    """Product of single-spin coherences, nuclear-nuclear couplings neglected."""
    tau = np.asarray(tau, dtype=float)
    if np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be strictly increasing")
    if len(bath) == 0:
        return NMRSpectrum(tau, np.ones_like(tau), N, electron.m_s)
    if bath.hyperfine is None:
        raise ValueError("bath has no hyperfine tensors")
    a_par = bath.hyperfine[:, 2, 2]
    a_perp = np.hypot(bath.hyperfine[:, 0, 2], bath.hyperfine[:, 1, 2])
    w_l = np.array([ELEMENT_SPECIES[e].gamma for e in bath.elements]) * electron.B
    if N % 2:
        raise ValueError("incomplete DD period: N must be even")
    x = one_minus_m(w_l, a_par, a_perp, electron.m_s, np.full(len(tau), N, dtype=np.int64), tau)
    return NMRSpectrum(tau, np.prod(1.0 - x, axis=1), N, electron.m_s)


def ensemble_spectrum(spectra) -> NMRSpectrum:
    """Average of equally weighted spectra on a common grid."""
    spectra = list(spectra)
    m = np.mean([s.M for s in spectra], axis=0)
    return NMRSpectrum(spectra[0].tau, m, spectra[0].N, spectra[0].m_s)


# -- gate design ------------------------------------------------------------

def _conditional_angle(phi, N):
    """Nuclear rotation angle accumulated over N pulses, folded into [0, pi]."""
    eps = np.minimum(phi, np.pi - phi)
    theta = np.mod(N * eps, 2 * np.pi)
    return np.minimum(theta, 2 * np.pi - theta)


def _best_frame_overlap(w0, w1, theta_target, rounds=10, grid=16):
    """Max over nuclear z-frames of |<R0, W0'>| + |<R1, W1'>|.

    W' = Rz(g1) W Rz(g2); R0/R1 are +/- theta rotations about x. Arrays of
    candidates are handled together with a shrinking grid search.
    """
    shape = w0.shape[:-1]
    r0 = su2.rotation(np.array([1.0, 0, 0]), np.broadcast_to(theta_target, shape))
    r1 = su2.rotation(np.array([1.0, 0, 0]), -np.broadcast_to(theta_target, shape))
    center = np.zeros(shape + (2,))
    span = np.pi
    best = np.full(shape, -np.inf)
    for r in range(rounds):
        npts = grid if r == 0 else 7
        offs = np.linspace(-span, span, npts, endpoint=(r > 0))
        g1 = center[..., 0, None, None] + offs[:, None]
        g2 = center[..., 1, None, None] + offs[None, :]
        z1, z2 = su2.rz(g1), su2.rz(g2)
        score = (
            np.abs(su2.overlap(r0[..., None, None, :], su2.mul(su2.mul(z1, w0[..., None, None, :]), z2)))
            + np.abs(su2.overlap(r1[..., None, None, :], su2.mul(su2.mul(z1, w1[..., None, None, :]), z2)))
        )
        flat = score.reshape(shape + (-1,))
        idx = np.argmax(flat, axis=-1)
        best = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        i1, i2 = np.unravel_index(idx, (npts, npts))
        center = np.stack([center[..., 0] + offs[i1], center[..., 1] + offs[i2]], axis=-1)
        span = 2 * span / (npts - 1) if r == 0 else span * 2 / (npts - 1)
    return best


def unitary_fidelity(w0, w1, theta_target):
    """Average gate fidelity of blockdiag(W0, W1) against conditional +/-theta about x.

    Optimised over the electron phase and nuclear z-frame rotations.
    """
    s = _best_frame_overlap(np.asarray(w0, dtype=float), np.asarray(w1, dtype=float), theta_target)
    tr = 2 * s  # |Tr| of the 4x4 overlap, electron phase optimised
    return (tr**2 + 4) / 20


def design_candidates(w_l, a_par, a_perp, m_s, theta_target=np.pi / 2, k_max=8,
                      window_points=DEFAULT_WINDOW_POINTS):
    """Best design per resonance order for arrays of spins.

    Returns a dict of arrays with shape (n_spins, k_max + 1): tau, N, theta,
    dot, fidelity, time. Orders without a usable conditional axis have N = 0
    and fidelity 0.
    """
    w_l, a_par, a_perp = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (w_l, a_par, a_perp))
    wz0, wx0, wz1, wx1 = _branch_fields(w_l, a_par, a_perp, m_s)
    w0 = np.abs(wz0)
    w1 = np.hypot(wz1, wx1)
    ks = np.arange(k_max + 1)
    spacing = 2 * np.pi / (w0 + w1)
    tau_k = (2 * ks[None, :] + 1) * np.pi / (w0 + w1)[:, None]
    offs = np.linspace(-0.5, 0.5, window_points)
    taus = tau_k[..., None] + spacing[:, None, None] * offs  # (n, k, w)
    taus = np.where(taus > 0, taus, np.nan)
    sl = (slice(None), None, None)
    v0, v1 = period_propagators(wz0[sl], wx0[sl], wz1[sl], wx1[sl], np.nan_to_num(taus, nan=0.0))
    phi, n0 = su2.angle_axis(v0)
    _, n1 = su2.angle_axis(v1)
    d = np.sum(n0 * n1, axis=-1)
    d = np.where(np.isnan(taus), np.inf, d)
    j = np.argmin(d, axis=-1)
    take = lambda a: np.take_along_axis(a, j[..., None], axis=-1)[..., 0]
    tau, dot, ph = take(taus), take(d), take(phi)
    q0 = np.take_along_axis(v0, j[..., None, None], axis=-2)[..., 0, :]
    q1 = np.take_along_axis(v1, j[..., None, None], axis=-2)[..., 0, :]

    eps = np.minimum(ph, np.pi - ph)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = np.where(eps > 0, theta_target / eps, np.inf)
    base = 2 * np.floor(np.nan_to_num(est, posinf=0.0) / 2)
    choices = np.maximum(base[..., None] + np.array([0, 2]), 2)  # even N bracketing the estimate
    thetas = _conditional_angle(ph[..., None], choices)
    pick = np.argmin(np.abs(thetas - theta_target), axis=-1)
    N = np.take_along_axis(choices, pick[..., None], axis=-1)[..., 0]
    theta = np.take_along_axis(thetas, pick[..., None], axis=-1)[..., 0]
    valid = (a_perp[:, None] > 0) & np.isfinite(est) & np.isfinite(tau)
    N = np.where(valid, N, 0).astype(np.int64)
    fid = np.zeros(N.shape)
    if valid.any():
        w0p = su2.power(q0[valid], N[valid] // 2)
        w1p = su2.power(q1[valid], N[valid] // 2)
        fid[valid] = unitary_fidelity(w0p, w1p, theta_target)
    return {
        "k": np.broadcast_to(ks, N.shape),
        "tau": np.where(valid, tau, np.nan),
        "N": N,
        "theta": np.where(valid, theta, 0.0),
        "dot": np.where(valid, dot, 1.0),
        "fidelity": fid,
        "time": np.where(valid, 2 * N * tau, np.inf),
    }


def design_gate(nucleus: Nucleus, electron: ElectronModel, theta_target=np.pi / 2, k_max=8,
                T_max=np.inf, window_points=DEFAULT_WINDOW_POINTS) -> GateDesign | None:
    """Highest-fidelity conditional rotation within the time budget, or None."""
    if not 0 < theta_target <= np.pi:
        raise ValueError("theta_target must lie in (0, pi]")
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    designs = candidate_designs(nucleus, electron, theta_target, k_max, window_points)
    allowed = [g for g in designs if g.time <= T_max]
    if not allowed:
        return None
    return max(allowed, key=lambda g: (g.fidelity, -g.k))


def candidate_designs(nucleus: Nucleus, electron: ElectronModel, theta_target=np.pi / 2, k_max=8,
                      window_points=DEFAULT_WINDOW_POINTS) -> list[GateDesign]:
    """One design per resonance order (orders with no conditional axis omitted)."""
    c = design_candidates(nucleus.larmor(electron), nucleus.A_par, nucleus.A_perp, electron.m_s,
                          theta_target, k_max, window_points)
    out = []
    for i in range(k_max + 1):
        if c["N"][0, i] == 0:
            continue
        out.append(GateDesign(int(i), int(c["N"][0, i]), float(c["tau"][0, i]), float(c["theta"][0, i]),
                              float(c["dot"][0, i]), float(c["fidelity"][0, i]), theta_target))
    return out


def gate_unitary(nucleus: Nucleus, electron: ElectronModel, N: int, tau: float) -> np.ndarray:
    """4x4 electron-pseudospin (x) nucleus unitary of the decoupling gate."""
    v0, v1 = period_propagators(*_fields(nucleus, electron), tau)
    w0 = su2.to_matrix(su2.power(v0, N // 2))
    w1 = su2.to_matrix(su2.power(v1, N // 2))
    u = np.zeros((4, 4), dtype=complex)
    u[:2, :2] = w0
    u[2:, 2:] = w1
    return u


def ideal_gate(theta: float) -> np.ndarray:
    """Conditional rotation: +theta about x for electron 0, -theta for electron 1."""
    u = np.zeros((4, 4), dtype=complex)
    u[:2, :2] = su2.to_matrix(su2.rotation(np.array([1.0, 0, 0]), theta))
    u[2:, 2:] = su2.to_matrix(su2.rotation(np.array([1.0, 0, 0]), -theta))
    return u


def average_gate_fidelity(u_ideal, u_actual) -> float:
    dim = u_ideal.shape[0]
    tr = np.trace(u_ideal.conj().T @ u_actual)
    return float((abs(tr) ** 2 + dim) / (dim**2 + dim))


def block_unitary_fidelity(u_actual, theta) -> float:
    """Fidelity of an arbitrary block-diagonal 4x4 unitary, z-frames optimised."""
    w0 = su2.from_matrix(u_actual[:2, :2])
    w1 = su2.from_matrix(u_actual[2:, 2:])
    # global phases of the blocks are absorbed by the electron phase freedom
    return float(unitary_fidelity(w0, w1, theta))


def gate_fidelity(design: GateDesign, nucleus: Nucleus, electron: ElectronModel) -> float:
    u = gate_unitary(nucleus, electron, design.N, design.tau)
    return block_unitary_fidelity(u, design.theta_target)


def designs_to_json(designs) -> str:
    return json.dumps([g.to_record() for g in designs])
