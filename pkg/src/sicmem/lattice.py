"""4H-SiC crystal around a c-axis divacancy, site enumeration and bath sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import constants as const

SITE_CLASSES = ("h", "k")

# fractional in-plane stacking positions A, B, C
_STACK = {"A": (0.0, 0.0), "B": (1 / 3, 2 / 3), "C": (2 / 3, 1 / 3)}
# Si-C bond along c, in units of c
_U = 3 / 16


@dataclass(frozen=True)
class CrystalModel:
    """Hexagonal 4H-SiC cell with an embedded c-axis divacancy.

    ``basis`` holds fractional coordinates; ``vacancies`` are the basis
    indices (in the home cell) of the removed Si and C atoms. The defect
    origin is the midpoint between the two vacancies.
    """

    a: float = const.A_LATTICE
    c: float = const.C_LATTICE
    stacking: str = "ABCB"
    vacancy_class: str = "kk"
    max_radius: float = 25.0

    def __post_init__(self):
        if len(self.stacking) != 4 or set(self.stacking) - set(_STACK):
            raise ValueError("stacking must be four letters from A, B, C")
        if self.vacancy_class not in ("kk", "hh"):
            raise ValueError("only c-axis divacancies (kk, hh) are supported")

    @property
    def lattice_vectors(self) -> np.ndarray:
        """Rows are a1, a2, a3 in nm; a3 is along the c axis."""
        return np.array(
            [
                [self.a, 0.0, 0.0],
                [-self.a / 2, self.a * np.sqrt(3) / 2, 0.0],
                [0.0, 0.0, self.c],
            ]
        )

    @property
    def c_axis(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    @property
    def basis(self) -> tuple[np.ndarray, list[str], list[str]]:
        """Fractional positions, elements and h/k site class of the 8 atoms."""
        frac, elements, classes = [], [], []
        n = len(self.stacking)
        for layer, letter in enumerate(self.stacking):
            below = self.stacking[(layer - 1) % n]
            above = self.stacking[(layer + 1) % n]
            site_class = "h" if below == above else "k"
            x, y = _STACK[letter]
            z = layer / n
            frac.append((x, y, z))
            elements.append("Si")
            classes.append(site_class)
            frac.append((x, y, z + _U))
            elements.append("C")
            classes.append(site_class)
        return np.array(frac), elements, classes

    @property
    def vacancies(self) -> tuple[int, int]:
        """Basis indices of the Si and C vacancy (C bonded above the Si)."""
        _, elements, classes = self.basis
        want = self.vacancy_class[0]
        for i, (el, cl) in enumerate(zip(elements, classes)):
            if el == "Si" and cl == want:
                return i, i + 1
        raise ValueError(f"no {want} site in stacking {self.stacking}")

    @property
    def bond_length(self) -> float:
        return _U * self.c

    def cartesian(self, frac) -> np.ndarray:
        return np.asarray(frac) @ self.lattice_vectors

    def defect_origin(self) -> np.ndarray:
        """Cartesian midpoint of the divacancy in the home cell."""
        frac, _, _ = self.basis
        vsi, vc = self.vacancies
        return self.cartesian((frac[vsi] + frac[vc]) / 2)


@dataclass(frozen=True)
class IsotopeModel:
    """Spin-1/2 isotope fraction per element."""

    c_si29: float = const.NATURAL_SI29
    c_c13: float = const.NATURAL_C13

    def __post_init__(self):
        for name in ("c_si29", "c_c13"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def fraction(self, element: str) -> float:
        return {"Si": self.c_si29, "C": self.c_c13}[element]

    @classmethod
    def uniform(cls, c: float) -> "IsotopeModel":
        return cls(c_si29=c, c_c13=c)


SPECIES_OF = {"Si": "29Si", "C": "13C"}


@dataclass(frozen=True)
class LatticeSite:
    position: np.ndarray
    element: str
    index: int
    shell: str = ""

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.position))


@dataclass
class SiteTable:
    """Column store of enumerated lattice sites, sorted by distance then index.

    Behaves as a read-only sequence of :class:`LatticeSite`.
    """

    positions: np.ndarray
    elements: np.ndarray
    index: np.ndarray
    shell: np.ndarray

    def __len__(self):
        return len(self.index)

    def __getitem__(self, i):
        if isinstance(i, (slice, np.ndarray, list)):
            return SiteTable(self.positions[i], self.elements[i], self.index[i], self.shell[i])
        return LatticeSite(self.positions[i], str(self.elements[i]), int(self.index[i]), str(self.shell[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)

    def select(self, mask) -> "SiteTable":
        return self[np.asarray(mask)]


def _label_shells(crystal: CrystalModel, pos: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Tag the nearest-neighbour shells of the two vacancies.

    C_I: carbons bonded to the Si vacancy. Si_I: silicons bonded to the C
    vacancy. Si_IIa / Si_IIb: second-neighbour silicons of the Si vacancy in
    its own layer / in the layer on the far side from the C vacancy.
    """
    frac, _, _ = crystal.basis
    vsi, vc = crystal.vacancies
    origin = crystal.defect_origin()
    r_vsi = crystal.cartesian(frac[vsi]) - origin
    r_vc = crystal.cartesian(frac[vc]) - origin
    bond = crystal.bond_length
    tol = 0.05 * bond
    shell = np.full(len(pos), "", dtype=object)
    d_vsi = np.linalg.norm(pos - r_vsi, axis=1)
    d_vc = np.linalg.norm(pos - r_vc, axis=1)
    is_si = elements == "Si"
    shell[(~is_si) & (d_vsi < bond + tol)] = "C_I"
    shell[is_si & (d_vc < bond + tol)] = "Si_I"
    second = is_si & (np.abs(d_vsi - crystal.a) < tol) & (shell == "")
    dz = pos[:, 2] - r_vsi[2]
    shell[second & (np.abs(dz) < tol)] = "Si_IIa"
    shell[second & (dz < -tol)] = "Si_IIb"
    return shell


def enumerate_sites(
    crystal: CrystalModel, radius: float, cell_offset=(0, 0, 0)
) -> SiteTable:
    """All lattice sites within ``radius`` nm of the divacancy midpoint.

    ``cell_offset`` translates the defect by whole lattice vectors; the
    returned positions are always relative to the defect.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius > crystal.max_radius:
        raise ValueError(
            f"supercell too small: radius {radius} nm exceeds bound {crystal.max_radius} nm"
        )
    frac, elements, _ = crystal.basis
    lv = crystal.lattice_vectors
    offset = np.asarray(cell_offset, dtype=int)
    origin = crystal.defect_origin() + offset @ lv
    n_ab = int(np.ceil(radius / (crystal.a * np.sqrt(3) / 2))) + 2
    n_c = int(np.ceil(radius / crystal.c)) + 2
    ia = np.arange(-n_ab, n_ab + 1) + offset[0]
    ib = np.arange(-n_ab, n_ab + 1) + offset[1]
    ic = np.arange(-n_c, n_c + 1) + offset[2]
    cells = np.stack(np.meshgrid(ia, ib, ic, indexing="ij"), axis=-1).reshape(-1, 3)
    cell_cart = cells @ lv
    vsi, vc = crystal.vacancies
    span = np.array([2 * n_ab + 1, 2 * n_ab + 1, 2 * n_c + 1])

    all_pos, all_el, all_idx = [], [], []
    for b, (f, el) in enumerate(zip(frac, elements)):
        pos = cell_cart + crystal.cartesian(f) - origin
        keep = np.einsum("ij,ij->i", pos, pos) <= radius**2 + 1e-12
        if b in (vsi, vc):
            keep &= np.any(cells != offset, axis=1)
        rel = cells[keep] - offset + np.array([n_ab, n_ab, n_c])
        # stable key: translation-invariant cell coordinates and basis index
        key = ((rel[:, 0] * span[1] + rel[:, 1]) * span[2] + rel[:, 2]) * len(frac) + b
        all_pos.append(pos[keep])
        all_el.append(np.full(keep.sum(), el, dtype=object))
        all_idx.append(key)
    pos = np.concatenate(all_pos)
    el = np.concatenate(all_el)
    idx = np.concatenate(all_idx).astype(np.int64)
    dist = np.round(np.linalg.norm(pos, axis=1), 9)
    order = np.lexsort((idx, dist))
    pos, el, idx = pos[order], el[order], idx[order]
    return SiteTable(pos, el, idx, _label_shells(crystal, pos, el))


@dataclass(frozen=True)
class BathConfiguration:
    """Occupied nuclear sites. ``hyperfine`` is (n, 3, 3) rad/s once attached."""

    positions: np.ndarray
    elements: np.ndarray
    site_index: np.ndarray
    shell: np.ndarray
    seed: int | None = None
    params: dict = field(default_factory=dict)
    hyperfine: np.ndarray | None = None

    def __len__(self):
        return len(self.site_index)

    @property
    def species(self) -> list[str]:
        return [SPECIES_OF[e] for e in self.elements]

    def to_records(self) -> list[dict]:
        return [
            {
                "site_index": int(i),
                "element": str(e),
                "position": [float(x) for x in p],
                "species": SPECIES_OF[e],
            }
            for i, e, p in zip(self.site_index, self.elements, self.positions)
        ]

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "params": self.params, "spins": self.to_records()})

    @classmethod
    def empty(cls) -> "BathConfiguration":
        return cls(np.zeros((0, 3)), np.array([], dtype=object), np.array([], dtype=np.int64),
                   np.array([], dtype=object))

    @classmethod
    def from_spins(cls, positions, elements, hyperfine=None) -> "BathConfiguration":
        """Hand-built bath, for tests and small examples."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float)).reshape(-1, 3)
        n = len(positions)
        return cls(positions, np.asarray(elements, dtype=object), np.arange(n, dtype=np.int64),
                   np.full(n, "", dtype=object),
                   hyperfine=None if hyperfine is None else np.asarray(hyperfine, dtype=float))


def sample_bath(sites: SiteTable, isotopes: IsotopeModel, seed: int) -> BathConfiguration:
    """Occupy each site independently with its element's spin-1/2 fraction."""
    rng = np.random.default_rng(seed)
    prob = np.where(sites.elements == "Si", isotopes.c_si29, isotopes.c_c13)
    occupied = rng.random(len(sites)) < prob
    return BathConfiguration(
        positions=sites.positions[occupied],
        elements=sites.elements[occupied],
        site_index=sites.index[occupied],
        shell=sites.shell[occupied],
        seed=seed,
        params={"c_si29": isotopes.c_si29, "c_c13": isotopes.c_c13, "n_sites": len(sites)},
    )


CM3_TO_NM3 = 1e-21


def sample_paramagnetic_bath(density: float, radius: float, seed: int) -> np.ndarray:
    """Poisson point process of dark spins uniform in a sphere.

    ``density`` in cm^-3, ``radius`` in nm; returns an (n, 3) array in nm.
    """
    if density < 0:
        raise ValueError("density must be non-negative")
    rng = np.random.default_rng(seed)
    volume = 4 / 3 * np.pi * radius**3
    n = rng.poisson(density * CM3_TO_NM3 * volume)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1 / 3)
    return direction * r[:, None]
