"""Cluster-correlation expansion of the central-spin coherence.

Each cluster is evolved under the two conditional Hamiltonians of the
electron branches (alpha = 0 and beta = m_s), switched at every pi pulse,
and contributes ``L_C(t) = Tr[U_beta^dagger U_alpha] / 2^n``. The total is

    L = prod_i L_i * prod_ij L_ij / (L_i L_j)

truncated at pairs. The same machinery handles dark electron spins when
they are passed in as a bath with pure-zz couplings.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from itertools import combinations
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.spatial import cKDTree

from . import constants as const
from . import su2
from .ddgate import PulseSequence
from .hyperfine import ELEMENT_SPECIES, SPECIES, ElectronModel, dipolar_hyperfine_array
from .lattice import BathConfiguration

EPS_DIV = 1e-6

_SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
_SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
_SP = np.array([[0, 1], [0, 0]], dtype=complex)
_SM = _SP.T.copy()
_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class Cluster:
    indices: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices) or tuple(sorted(self.indices)) != self.indices:
            raise ValueError("cluster indices must be distinct and sorted")

    @property
    def order(self) -> int:
        return len(self.indices)


@dataclass
class CoherenceCurve:
    t: np.ndarray
    L: np.ndarray
    flags: np.ndarray | None = None  # True where the pair correction was guarded
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.L = np.asarray(self.L, dtype=float)
        if self.flags is None:
            self.flags = np.zeros(self.t.shape, dtype=bool)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_us", "L"])
        for t, v in zip(self.t, self.L):
            w.writerow([repr(float(t * 1e6)), repr(float(v))])
        return buf.getvalue()


@dataclass(frozen=True)
class DecayFit:
    T2: float
    n: float
    residual: float

    def to_json(self) -> str:
        return json.dumps({"T2_s": self.T2, "n": self.n, "residual": self.residual})


@dataclass(frozen=True)
class SpinBath:
    """Spins entering the expansion: positions (nm), gammas, hyperfine rows.

    ``hf`` holds the (A_zx, A_zy, A_zz) row of each spin's hyperfine tensor;
    ``secular_z_only`` drops transverse hyperfine terms (dark electrons).
    """

    positions: np.ndarray
    gammas: np.ndarray
    hf: np.ndarray
    secular_z_only: bool = False

    def __len__(self):
        return len(self.gammas)

    @classmethod
    def from_bath(cls, bath: BathConfiguration) -> "SpinBath":
        if len(bath) == 0:
            return cls(np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)))
        if bath.hyperfine is None:
            raise ValueError("bath has no hyperfine tensors")
        gammas = np.array([ELEMENT_SPECIES[e].gamma for e in bath.elements])
        return cls(bath.positions, gammas, bath.hyperfine[:, 2, :].copy())

    @classmethod
    def paramagnetic(cls, positions, gamma_e: float = const.GAMMA_E) -> "SpinBath":
        pos = np.asarray(positions, dtype=float).reshape(-1, 3)
        if len(pos) == 0:
            return cls(pos, np.zeros(0), np.zeros((0, 3)), True)
        gammas = np.full(len(pos), SPECIES["e"].gamma)
        hf = dipolar_hyperfine_array(pos, gammas, gamma_e)[:, 2, :]
        hf[:, :2] = 0.0
        return cls(pos, gammas, hf, True)


def build_clusters(bath, order: int, r_pair_cutoff: float) -> list[Cluster]:
    """All singletons plus, for order 2, all pairs closer than the cutoff."""
    if order not in (1, 2):
        raise ValueError(f"unsupported order {order}: only CCE1 and CCE2 are implemented")
    positions = np.asarray(bath.positions).reshape(-1, 3)
    clusters = [Cluster((i,)) for i in range(len(positions))]
    if order == 2 and r_pair_cutoff > 0 and len(positions) > 1:
        pairs = cKDTree(positions).query_pairs(r_pair_cutoff, output_type="ndarray")
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        clusters += [Cluster((int(i), int(j))) for i, j in pairs]
    return clusters


# -- propagators -------------------------------------------------------------

def _single_spin_coherence(gammas, hf, B, m_s, sequence, t):
    """Vectorised singleton contributions, shape (n_spins, n_t)."""
    w_l = gammas * B
    a_perp = np.hypot(hf[:, 0], hf[:, 1])
    wz = [w_l, w_l + m_s * hf[:, 2]]
    wx = [np.zeros_like(w_l), m_s * a_perp]
    t = np.asarray(t, dtype=float)[None, :]
    n = sequence.N
    if n == 0:
        ua = su2.evolution(wz[0][:, None], wx[0][:, None], t)
        ub = su2.evolution(wz[1][:, None], wx[1][:, None], t)
        return su2.overlap(ub, ua)
    tau = t / (2 * n)
    col = (slice(None), None)
    u = {b: su2.evolution(wz[b][col], wx[b][col], tau) for b in (0, 1)}
    uu = {b: su2.evolution(wz[b][col], wx[b][col], 2 * tau) for b in (0, 1)}

    def branch(first):
        other = 1 - first
        if n % 2 == 0:
            v = su2.mul(su2.mul(u[first], uu[other]), u[first])
            return su2.power(v, n // 2)
        v = su2.mul(su2.mul(u[first], uu[other]), u[first])
        head = su2.power(v, (n - 1) // 2)
        # the remaining half-period: first branch tau, then the other for tau
        return su2.mul(su2.mul(u[other], u[first]), head)

    ua = branch(0)
    ub = branch(1)
    return su2.overlap(ub, ua)


def _pair_hamiltonians(bath: SpinBath, i, j, B, m_s):
    """H_alpha and H_beta for a batch of pairs, shape (n_pairs, 2, 4, 4)."""
    i, j = np.asarray(i), np.asarray(j)
    ops1 = [np.kron(op, _I2) for op in (_SX, _SY, _SZ)]
    ops2 = [np.kron(_I2, op) for op in (_SX, _SY, _SZ)]
    r = bath.positions[j] - bath.positions[i]
    dist = np.linalg.norm(r, axis=1)
    cos2 = (r[:, 2] / dist) ** 2
    gi, gj = bath.gammas[i], bath.gammas[j]
    c_zz = const.MU0_OVER_4PI * gi * gj * const.HBAR * 1e27 * (1 - 3 * cos2) / dist**3
    b_ff = np.where(gi == gj, -c_zz / 4, 0.0)
    flipflop = np.kron(_SP, _SM) + np.kron(_SM, _SP)
    zz = np.kron(_SZ, _SZ)
    h = np.zeros((len(i), 2, 4, 4), dtype=complex)
    coupling = c_zz[:, None, None] * zz + b_ff[:, None, None] * flipflop
    for b, alpha in enumerate((0, m_s)):
        hb = coupling.copy()
        if not bath.secular_z_only:
            hb += (gi * B)[:, None, None] * ops1[2] + (gj * B)[:, None, None] * ops2[2]
        for axis in range(3):
            if bath.secular_z_only and axis < 2:
                continue
            hb += alpha * (bath.hf[i, axis][:, None, None] * ops1[axis]
                           + bath.hf[j, axis][:, None, None] * ops2[axis])
        h[:, b] = hb
    return h


def _propagate(h, sequence, t):
    """Branch propagators of a batch of cluster Hamiltonians over the time grid.

    h has shape (n, 2, d, d); returns (U_alpha, U_beta) of shape (n, n_t, d, d).
    """
    evals, evecs = np.linalg.eigh(h)
    t = np.asarray(t, dtype=float)

    def u_of(branch, dt):
        ph = np.exp(-1j * evals[:, branch, None, :] * dt[None, :, None])  # (n, nt, d)
        v = evecs[:, branch, None]
        u = np.einsum("ntij,ntj,ntkj->ntik", np.broadcast_to(v, ph.shape[:2] + v.shape[-2:]), ph,
                      np.broadcast_to(v.conj(), ph.shape[:2] + v.shape[-2:]))
        # V V^dagger is only unitary to rounding; keep L(0) = 1 exact
        u[:, dt == 0] = np.eye(u.shape[-1])
        return u

    n = sequence.N
    if n == 0:
        return u_of(0, t), u_of(1, t)
    tau = t / (2 * n)
    u = {b: u_of(b, tau) for b in (0, 1)}
    uu = {b: u @ u for b, u in u.items()}

    def branch(first):
        other = 1 - first
        v = u[first] @ uu[other] @ u[first]
        if n % 2 == 0:
            return np.linalg.matrix_power(v, n // 2) if n > 2 else v
        head = np.linalg.matrix_power(v, (n - 1) // 2) if n > 1 else None
        tail = u[other] @ u[first]
        return tail if head is None else tail @ head

    return branch(0), branch(1)


def _pair_coherence(bath, pairs, B, m_s, sequence, t, batch=256):
    out = np.empty((len(pairs), len(t)))
    for s in range(0, len(pairs), batch):
        p = np.asarray(pairs[s:s + batch])
        h = _pair_hamiltonians(bath, p[:, 0], p[:, 1], B, m_s)
        ua, ub = _propagate(h, sequence, t)
        out[s:s + batch] = np.real(np.einsum("ntji,ntji->nt", ub.conj(), ua)) / 4
    return out


def cluster_coherence(cluster: Cluster, bath, sequence: PulseSequence, electron: ElectronModel, t) -> np.ndarray:
    """L_C(t) for one cluster of a BathConfiguration or SpinBath."""
    sb = bath if isinstance(bath, SpinBath) else SpinBath.from_bath(bath)
    idx = np.array(cluster.indices)
    if cluster.order == 1:
        return _single_spin_coherence(sb.gammas[idx], sb.hf[idx], electron.B, electron.m_s, sequence, t)[0]
    return _pair_coherence(sb, [tuple(idx)], electron.B, electron.m_s, sequence, t)[0]


def _pairwise_prod(a, axis=0):
    """Product along ``axis`` by pairwise (tree) reduction."""
    a = np.moveaxis(np.asarray(a), axis, 0)
    if a.shape[0] == 0:
        return np.ones(a.shape[1:])
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.ones((1,) + a.shape[1:])])
        a = a[0::2] * a[1::2]
    return a[0]


def cce_coherence(bath, sequence: PulseSequence, electron: ElectronModel, t, order: int = 2,
                  r_pair_cutoff: float = 1.0, eps_div: float = EPS_DIV, clusters=None) -> CoherenceCurve:
    """Coherence of the central spin from a nuclear (or dark-spin) bath."""
    sb = bath if isinstance(bath, SpinBath) else SpinBath.from_bath(bath)
    t = np.asarray(t, dtype=float)
    if clusters is None:
        clusters = build_clusters(sb, order, r_pair_cutoff)
    singles = np.array([c.indices[0] for c in clusters if c.order == 1], dtype=int)
    pairs = [c.indices for c in clusters if c.order == 2]
    flags = np.zeros(t.shape, dtype=bool)
    if len(sb) == 0:
        return CoherenceCurve(t, np.ones_like(t), flags, {"n_spins": 0, "n_pairs": 0})
    l1 = np.ones((len(sb), len(t)))
    if len(singles):
        l1[singles] = _single_spin_coherence(sb.gammas[singles], sb.hf[singles], electron.B, electron.m_s,
                                             sequence, t)
    total = _pairwise_prod(l1[singles]) if len(singles) else np.ones_like(t)
    if pairs:
        lp = _pair_coherence(sb, pairs, electron.B, electron.m_s, sequence, t)
        p = np.asarray(pairs)
        denom = l1[p[:, 0]] * l1[p[:, 1]]
        guard = np.abs(denom) < eps_div
        corr = np.where(guard, 1.0, lp / np.where(guard, 1.0, denom))
        flags = guard.any(axis=0)
        total = total * _pairwise_prod(corr)
    meta = {"n_spins": len(sb), "n_pairs": len(pairs), "order": order, "r_pair_cutoff": r_pair_cutoff,
            "sequence": sequence.kind, "N": sequence.N}
    return CoherenceCurve(t, total, flags, meta)


def exact_coherence(bath, sequence: PulseSequence, electron: ElectronModel, t) -> np.ndarray:
    """Full Hilbert-space evolution of a small bath (all mutual couplings)."""
    sb = bath if isinstance(bath, SpinBath) else SpinBath.from_bath(bath)
    n = len(sb)
    if n > 8:
        raise ValueError("exact evolution limited to 8 spins")
    dim = 2**n

    def op(single, k):
        mats = [_I2] * n
        mats[k] = single
        out = np.array([[1.0 + 0j]])
        for m in mats:
            out = np.kron(out, m)
        return out

    h = np.zeros((2, dim, dim), dtype=complex)
    for b, alpha in enumerate((0, electron.m_s)):
        for k in range(n):
            if not sb.secular_z_only:
                h[b] += sb.gammas[k] * electron.B * op(_SZ, k)
            for axis, s in enumerate((_SX, _SY, _SZ)):
                if sb.secular_z_only and axis < 2:
                    continue
                h[b] += alpha * sb.hf[k, axis] * op(s, k)
        for i in range(n):
            for j in range(i + 1, n):
                r = sb.positions[j] - sb.positions[i]
                dist = np.linalg.norm(r)
                c_zz = (const.MU0_OVER_4PI * sb.gammas[i] * sb.gammas[j] * const.HBAR * 1e27
                        * (1 - 3 * (r[2] / dist) ** 2) / dist**3)
                h[b] += c_zz * op(_SZ, i) @ op(_SZ, j)
                if sb.gammas[i] == sb.gammas[j]:
                    h[b] += -c_zz / 4 * (op(_SP, i) @ op(_SM, j) + op(_SM, i) @ op(_SP, j))
    ua, ub = _propagate(h[None], sequence, t)
    return np.real(np.einsum("ntji,ntji->nt", ub.conj(), ua))[0] / dim


def full_order_coherence(bath, sequence: PulseSequence, electron: ElectronModel, t) -> np.ndarray:
    """CCE taken to order equal to the bath size (at most 4 spins).

    Every subset C gets the irreducible factor L_C / prod over its proper
    subsets. Singletons and pairs use the same propagators as
    ``cce_coherence``; larger clusters are evolved in their full Hilbert space.
    """
    sb = bath if isinstance(bath, SpinBath) else SpinBath.from_bath(bath)
    n = len(sb)
    if n > 4:
        raise ValueError("full-order expansion limited to 4 spins")
    t = np.asarray(t, dtype=float)
    if n == 0:
        return np.ones_like(t)
    raw, tilde = {}, {}
    subsets = [c for k in range(1, n + 1) for c in combinations(range(n), k)]
    for c in subsets:
        idx = list(c)
        if len(c) == 1:
            raw[c] = _single_spin_coherence(sb.gammas[idx], sb.hf[idx], electron.B, electron.m_s, sequence, t)[0]
        elif len(c) == 2:
            raw[c] = _pair_coherence(sb, [c], electron.B, electron.m_s, sequence, t)[0]
        else:
            sub = SpinBath(sb.positions[idx], sb.gammas[idx], sb.hf[idx], sb.secular_z_only)
            raw[c] = exact_coherence(sub, sequence, electron, t)
        denom = np.ones_like(t)
        for k in range(1, len(c)):
            for s in combinations(c, k):
                denom = denom * tilde[s]
        tilde[c] = raw[c] / denom
    return _pairwise_prod(np.array([tilde[c] for c in subsets]))


def paramagnetic_radius(density: float, n_expected: float = 40.0, minimum: float = 100.0) -> float:
    """Sphere radius (nm) holding ``n_expected`` dark spins on average, at least ``minimum``."""
    if density <= 0:
        return minimum
    return max(minimum, (3 * n_expected / (4 * np.pi * density * 1e-21)) ** (1 / 3))


def pair_bath_coherence(positions, sequence: PulseSequence, electron: ElectronModel, t,
                        r_pair_cutoff: float | None = None) -> CoherenceCurve:
    """Dark electron spins (S=1/2) coupled to the centre by secular zz terms.

    The default pair cutoff is 2.5 times the mean inter-spin spacing of the
    sample (infinite for fewer than two spins).
    """
    sb = SpinBath.paramagnetic(positions, electron.gamma_e)
    if r_pair_cutoff is None:
        r_pair_cutoff = _default_pair_cutoff(sb.positions)
    return cce_coherence(sb, sequence, electron, t, order=2, r_pair_cutoff=r_pair_cutoff)


def _default_pair_cutoff(positions):
    n = len(positions)
    if n < 2:
        return 0.0
    radius = np.max(np.linalg.norm(positions, axis=1))
    spacing = (4 / 3 * np.pi * radius**3 / n) ** (1 / 3)
    return 2.5 * spacing


def total_coherence(nuclear: CoherenceCurve, electron_pairs: CoherenceCurve) -> CoherenceCurve:
    if nuclear.t.shape != electron_pairs.t.shape or not np.allclose(nuclear.t, electron_pairs.t, rtol=1e-12,
                                                                    atol=0):
        raise ValueError("coherence curves are on different time grids")
    return CoherenceCurve(nuclear.t, nuclear.L * electron_pairs.L, nuclear.flags | electron_pairs.flags,
                          {"nuclear": nuclear.meta, "electron": electron_pairs.meta})


def _stretched(t, T2, n):
    return np.exp(-((t / T2) ** n))


def fit_stretched(curve: CoherenceCurve, floor: float = 0.0) -> DecayFit:
    """Least-squares fit of exp(-(t/T2)^n) to the unflagged points.

    Points after the curve first drops below ``floor`` are ignored.
    """
    t, L = curve.t, curve.L
    keep = ~curve.flags
    t, L = t[keep], L[keep]
    below = np.flatnonzero(L < np.exp(-1))
    if len(below) == 0:
        raise ValueError("insufficient decay: coherence never drops below 1/e")
    if floor > 0:
        under = np.flatnonzero(L < floor)
        if len(under):
            t, L = t[: max(under[0] + 1, 3)], L[: max(under[0] + 1, 3)]
    i = below[0]
    if i == 0:
        t0 = t[0]
    else:
        t0 = np.interp(np.exp(-1), [L[i], L[i - 1]], [t[i], t[i - 1]])
    t0 = max(t0, 1e-300)
    scale = t0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        best = None
        for n0 in (1.0, 2.0, 3.0):
            try:
                p, _ = curve_fit(lambda x, a, n: _stretched(x, a, n), t / scale, L, p0=(1.0, n0),
                                 bounds=([1e-6, 0.5], [1e6, 4.0]), maxfev=20000)
            except RuntimeError:
                continue
            res = float(np.sqrt(np.mean((_stretched(t / scale, *p) - L) ** 2)))
            if best is None or res < best[1]:
                best = (p, res)
    if best is None:
        raise ValueError("stretched-exponential fit did not converge")
    (a, n), res = best
    return DecayFit(float(a * scale), float(n), res)


def fitted_t2(curve: CoherenceCurve, floor: float = 0.0) -> float:
    """T2 of a curve, +inf when it does not decay within the grid."""
    try:
        return fit_stretched(curve, floor).T2
    except ValueError:
        return np.inf
