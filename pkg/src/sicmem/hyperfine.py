"""Hyperfine and dipolar couplings, spin species and the electron pseudospin."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import constants as const
from .lattice import BathConfiguration

CORE_EXCLUSION = 0.1  # nm


@dataclass(frozen=True)
class SpinSpecies:
    name: str
    gamma: float  # rad s^-1 T^-1, signed
    spin: float = 0.5

    def __post_init__(self):
        if self.gamma == 0:
            raise ValueError("gyromagnetic ratio must be non-zero")
        if self.spin != 0.5:
            raise ValueError("only spin-1/2 species are supported")


SPECIES = {
    "29Si": SpinSpecies("29Si", const.GAMMA_SI29),
    "13C": SpinSpecies("13C", const.GAMMA_C13),
    "e": SpinSpecies("e", const.GAMMA_E),
}
ELEMENT_SPECIES = {"Si": SPECIES["29Si"], "C": SPECIES["13C"]}


@dataclass(frozen=True)
class ElectronModel:
    """Central divacancy spin reduced to the {0, m_s} pseudospin qubit."""

    B: float = 0.0  # T, along c
    m_s: int = -1
    D: float = const.mhz(1336.0)
    gamma_e: float = const.GAMMA_E

    def __post_init__(self):
        if self.m_s not in (-1, 1):
            raise ValueError("m_s must be +1 or -1")
        if self.B < 0:
            raise ValueError("B must be non-negative")

    @classmethod
    def at_gauss(cls, gauss: float, **kw) -> "ElectronModel":
        return cls(B=gauss * const.GAUSS, **kw)


@dataclass(frozen=True)
class HyperfineTensor:
    matrix: np.ndarray  # rad/s

    @property
    def A_par(self) -> float:
        return float(self.matrix[2, 2])

    @property
    def A_perp(self) -> float:
        return float(np.hypot(self.matrix[0, 2], self.matrix[1, 2]))

    def to_json(self) -> list[float]:
        return [float(x) for x in np.asarray(self.matrix).ravel()]


@dataclass(frozen=True)
class PairCoupling:
    c_zz: float  # rad/s
    b_ff: float  # rad/s, coefficient of (I+I- + I-I+)


@dataclass(frozen=True)
class Nucleus:
    """Single nuclear spin seen by the electron: species plus hyperfine.

    ``A_par`` and ``A_perp`` are the zz and transverse components; ``A_perp``
    is taken along the local x axis.
    """

    A_par: float
    A_perp: float
    species: SpinSpecies = SPECIES["29Si"]

    @classmethod
    def from_tensor(cls, tensor, species: SpinSpecies) -> "Nucleus":
        t = tensor if isinstance(tensor, HyperfineTensor) else HyperfineTensor(np.asarray(tensor))
        return cls(t.A_par, t.A_perp, species)

    def larmor(self, electron: ElectronModel) -> float:
        return self.species.gamma * electron.B


def dipolar_prefactor(gamma_e, gamma_n):
    """(mu0/4pi) gamma_e gamma_n hbar in rad/s * nm^3."""
    return const.MU0_OVER_4PI * gamma_e * gamma_n * const.HBAR * 1e27


def dipolar_hyperfine_array(positions, gamma_n, gamma_e=const.GAMMA_E) -> np.ndarray:
    """Point-dipole tensors for an (n, 3) array of positions, shape (n, 3, 3)."""
    r = np.atleast_2d(np.asarray(positions, dtype=float))
    gamma_n = np.broadcast_to(np.asarray(gamma_n, dtype=float), (len(r),))
    dist = np.linalg.norm(r, axis=1)
    if np.any(dist <= CORE_EXCLUSION):
        raise ValueError("use tabulated contact hyperfine inside the core exclusion radius")
    rhat = r / dist[:, None]
    shape = 3 * rhat[:, :, None] * rhat[:, None, :] - np.eye(3)
    return (dipolar_prefactor(gamma_e, gamma_n) / dist**3)[:, None, None] * shape


def dipolar_hyperfine(r, gamma_e, gamma_n) -> HyperfineTensor:
    return HyperfineTensor(dipolar_hyperfine_array(np.asarray(r)[None], gamma_n, gamma_e)[0])


def nuclear_pair_coupling(r_ij, gamma_i, gamma_j, homonuclear: bool | None = None) -> PairCoupling:
    """Secular dipolar coupling of two nuclei.

    H = c_zz Iz Iz + b_ff (I+I- + I-I+) with b_ff = -c_zz/4 for like spins and
    0 for unlike spins.
    """
    r = np.asarray(r_ij, dtype=float)
    dist = np.linalg.norm(r)
    if dist == 0:
        raise ValueError("zero separation between paired spins")
    if homonuclear is None:
        homonuclear = gamma_i == gamma_j
    cos2 = (r[2] / dist) ** 2
    c_zz = const.MU0_OVER_4PI * gamma_i * gamma_j * const.HBAR * 1e27 * (1 - 3 * cos2) / dist**3
    return PairCoupling(c_zz, -c_zz / 4 if homonuclear else 0.0)


def effective_fields(nucleus: Nucleus, electron: ElectronModel, alpha: int) -> tuple[float, float]:
    """Coefficients of I_z and I_x in the nuclear Hamiltonian for electron state alpha."""
    w_l = nucleus.larmor(electron)
    return w_l + alpha * nucleus.A_par, alpha * nucleus.A_perp


def default_overrides() -> dict[str, float]:
    """Tabulated contact A_par per nearest-neighbour shell (rad/s)."""
    return {"Si_IIa": const.mhz(13.2)}


def attach_hyperfine(bath: BathConfiguration, overrides: dict[str, float] | None = None,
                     gamma_e: float = const.GAMMA_E) -> BathConfiguration:
    """Fill in hyperfine tensors: point-dipole, or isotropic contact where tabulated."""
    if overrides is None:
        overrides = default_overrides()
    gammas = np.array([ELEMENT_SPECIES[e].gamma for e in bath.elements])
    if len(bath) == 0:
        return replace(bath, hyperfine=np.zeros((0, 3, 3)))
    tensors = dipolar_hyperfine_array(bath.positions, gammas, gamma_e)
    for shell, a_par in overrides.items():
        mask = bath.shell == shell
        tensors[mask] = a_par * np.eye(3)
    return replace(bath, hyperfine=tensors)


def bath_nuclei(bath: BathConfiguration) -> list[Nucleus]:
    if bath.hyperfine is None:
        raise ValueError("bath has no hyperfine tensors; call attach_hyperfine first")
    return [Nucleus.from_tensor(t, ELEMENT_SPECIES[e]) for t, e in zip(bath.hyperfine, bath.elements)]
