"""Single-qubit Clifford randomized benchmarking.

The 24 Cliffords are generated from x/y pi/2 and pi pulses. Noise is a
depolarising channel applied after every Clifford, recovery included, so
the survival decays as A p^N + B with p = 1 - p_depol.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_PAULI = (_X, _Y, _Z)

GENERATORS = {
    "X/2": (np.eye(2) - 1j * _X) / np.sqrt(2),
    "Y/2": (np.eye(2) - 1j * _Y) / np.sqrt(2),
    "X": -1j * _X,
    "Y": -1j * _Y,
}


def _canonical(u, decimals=10):
    """Unitary with global phase fixed so its first sizeable entry is real positive."""
    flat = u.ravel()
    k = np.flatnonzero(np.abs(flat) > 1e-6)[0]
    v = u * (abs(flat[k]) / flat[k])
    return tuple(np.round(np.concatenate([v.real.ravel(), v.imag.ravel()]), decimals) + 0.0)


def bloch_rotation(u) -> np.ndarray:
    """3x3 orthogonal matrix R with u (r.sigma) u^dagger = (R r).sigma."""
    return np.array([[0.5 * np.real(np.trace(a @ u @ b @ u.conj().T)) for b in _PAULI] for a in _PAULI])


@dataclass
class CliffordGroup:
    unitaries: list
    words: list  # generator names, applied left to right in time
    table: np.ndarray  # table[a, b] = index of (C_b after C_a) = U_b U_a
    inverse: np.ndarray
    rotations: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.unitaries)

    def compose(self, seq) -> int:
        """Index of the net Clifford after applying ``seq`` in order."""
        acc = 0
        for s in seq:
            acc = self.table[acc, s]
        return int(acc)


def clifford_group() -> CliffordGroup:
    """Breadth-first closure of the pi/2 and pi pulses about x and y."""
    identity = np.eye(2, dtype=complex)
    keys = {_canonical(identity): 0}
    unitaries, words = [identity], [[]]
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for name, g in GENERATORS.items():
            u = g @ unitaries[i]
            key = _canonical(u)
            if key not in keys:
                keys[key] = len(unitaries)
                unitaries.append(u)
                words.append(words[i] + [name])
                queue.append(keys[key])
    n = len(unitaries)
    table = np.empty((n, n), dtype=int)
    for a in range(n):
        for b in range(n):
            table[a, b] = keys[_canonical(unitaries[b] @ unitaries[a])]
    inverse = np.array([int(np.flatnonzero(table[a] == 0)[0]) for a in range(n)])
    rotations = np.array([bloch_rotation(u) for u in unitaries])
    return CliffordGroup(unitaries, words, table, inverse, rotations)


CLIFFORDS = clifford_group()


@dataclass(frozen=True)
class CliffordSequence:
    indices: tuple
    recovery: int

    @property
    def length(self) -> int:
        return len(self.indices)

    @property
    def full(self) -> tuple:
        return self.indices + (self.recovery,)


def sample_sequences(lengths, count: int, seed: int, group: CliffordGroup = CLIFFORDS) -> list[CliffordSequence]:
    """``count`` uniformly random sequences per length, each with its recovery Clifford."""
    lengths = [int(n) for n in lengths]
    if any(n < 1 for n in lengths) or count < 1:
        raise ValueError("lengths and count must be positive")
    rng = np.random.default_rng(seed)
    out = []
    for n in lengths:
        for _ in range(count):
            c = tuple(int(x) for x in rng.integers(0, len(group), n))
            out.append(CliffordSequence(c, int(group.inverse[group.compose(c)])))
    return out


def simulate_rb(sequences, p_depol: float, shots: int | None = None, seed: int | None = None,
                group: CliffordGroup = CLIFFORDS) -> dict[int, np.ndarray]:
    """Survival probability of |0> for every sequence, grouped by length.

    Each Clifford rotates the Bloch vector and is followed by a depolarising
    channel r -> (1 - p_depol) r. ``shots=None`` returns exact probabilities.
    """
    if not 0.0 <= p_depol <= 1.0:
        raise ValueError("depolarising probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    keep = 1.0 - p_depol
    by_length: dict[int, list] = {}
    for s in sequences:
        by_length.setdefault(s.length, []).append(s.full)
    out = {}
    for n in sorted(by_length):
        idx = np.array(by_length[n])  # (count, n + 1)
        r = np.zeros((len(idx), 3))
        r[:, 2] = 1.0
        for step in range(idx.shape[1]):
            r = keep * np.einsum("kij,kj->ki", group.rotations[idx[:, step]], r)
        surv = np.clip(0.5 * (1 + r[:, 2]), 0.0, 1.0)
        if shots is not None:
            if shots < 1:
                raise ValueError("shots must be at least 1")
            surv = rng.binomial(shots, surv) / shots
        out[n] = surv
    return out


@dataclass
class RBResult:
    p: float
    A: float
    B: float
    fidelity: float
    ci: tuple
    lengths: np.ndarray
    mean: np.ndarray
    sem: np.ndarray
    flags: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "mean_survival", "sem"])
        for n, m, s in zip(self.lengths, self.mean, self.sem):
            w.writerow([int(n), repr(float(m)), repr(float(s))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"p": self.p, "A": self.A, "B": self.B, "F_avg": self.fidelity,
                           "F_ci": list(self.ci), "flags": self.flags}, sort_keys=True)


def _decay(n, a, p, b):
    return a * p**n + b


def _fit(lengths, mean):
    if np.ptp(mean) < 1e-12:
        return 1.0, 0.0, float(mean[0]), ["no decay: p fixed to 1"]
    # start from a two-point estimate with B = 1/2
    y = np.clip(mean - 0.5, 1e-6, None)
    p0 = float(np.clip(np.exp(np.polyfit(lengths, np.log(y), 1)[0]), 0.5, 1 - 1e-12))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        (a, p, b), _ = curve_fit(_decay, lengths, mean, p0=(0.5, p0, 0.5),
                                 bounds=([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), maxfev=20000)
    return float(p), float(a), float(b), []


def average_fidelity(p: float) -> float:
    """Average gate fidelity of a single-qubit depolarising channel."""
    return 1 - (1 - p) / 2


def fit_rb(survival: dict[int, np.ndarray], n_boot: int = 200, seed: int = 0) -> RBResult:
    """Fit A p^N + B to mean survival; bootstrap over sequences for the CI on F."""
    lengths = np.array(sorted(survival), dtype=float)
    if len(lengths) < 3:
        raise ValueError("fit needs at least 3 sequence lengths")
    data = [np.asarray(survival[int(n)], dtype=float) for n in lengths]
    mean = np.array([d.mean() for d in data])
    sem = np.array([d.std(ddof=1) / np.sqrt(len(d)) if len(d) > 1 else 0.0 for d in data])
    p, a, b, flags = _fit(lengths, mean)
    rng = np.random.default_rng(seed)
    boot = []
    for _ in range(n_boot):
        m = np.array([d[rng.integers(0, len(d), len(d))].mean() for d in data])
        boot.append(average_fidelity(_fit(lengths, m)[0]))
    ci = (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5))) if boot else (np.nan, np.nan)
    return RBResult(p, a, b, average_fidelity(p), ci, lengths, mean, sem, flags)
