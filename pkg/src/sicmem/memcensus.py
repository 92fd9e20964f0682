"""Expected number of usable nuclear memories versus isotopic concentration.

For a nucleus at site i and a gate (N, tau), every other lattice site j
holds a spin with probability c_j, so the average electron coherence left
by the rest of the lattice is

    P = prod_{j != i} E(M_j),   E(M_j) = 1 - c_j (1 - M_j(N, tau)).

A site is usable when some gate within the time budget reaches
F = (1 + P)/2 * F_gate >= F_min, and the memory count is the sum of c_i
over usable sites.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import constants as const
from ._kernels import one_minus_m
from .ddgate import (DEFAULT_WINDOW_POINTS, GateDesign, candidate_designs, design_candidates,
                     magnetization_array)
from .hyperfine import ELEMENT_SPECIES, ElectronModel, Nucleus, attach_hyperfine
from .lattice import (BathConfiguration, CrystalModel, IsotopeModel, LatticeSite, SiteTable,
                      enumerate_sites)

DEFAULT_RADIUS = 6.0
_HIST_EDGES_HZ = np.logspace(1, 7, 61)
SERIES_ORDER = 18
SERIES_MAX_C = 0.06


@dataclass(frozen=True)
class MemoryCriteria:
    F_min: float = 0.9
    T_max: float = 1.5e-3
    theta_target: float = np.pi / 2
    k_max: int = 8
    a_par_window: tuple[float, float] | None = None  # bounds on |A_par|, rad/s
    fidelity_model: str = "crosstalk"

    def __post_init__(self):
        if not 0 < self.F_min <= 1:
            raise ValueError("F_min must lie in (0, 1]")
        if self.T_max <= 0:
            raise ValueError("T_max must be positive")
        if self.fidelity_model not in ("crosstalk", "flip"):
            raise ValueError("fidelity_model must be 'crosstalk' or 'flip'")

    def in_window(self, a_par):
        a = np.abs(a_par)
        if self.a_par_window is None:
            return np.ones(np.shape(a), dtype=bool)
        lo, hi = self.a_par_window
        return (a >= lo) & (a < hi)


LOW_HYPERFINE = (0.0, const.STRONG_COUPLING_CUTOFF)


@dataclass
class SiteRecord:
    site: LatticeSite
    A_par: float
    A_perp: float
    design: GateDesign | None
    crosstalk: float
    fidelity: float
    usable: bool
    concentration: float

    def to_record(self) -> dict:
        return {
            "site_index": self.site.index,
            "element": self.site.element,
            "position": [float(x) for x in self.site.position],
            "A_par_kHz": self.A_par / const.TWO_PI / 1e3,
            "A_perp_kHz": self.A_perp / const.TWO_PI / 1e3,
            "design": None if self.design is None else self.design.to_record(),
            "crosstalk": float(self.crosstalk),
            "fidelity": float(self.fidelity),
            "usable": bool(self.usable),
            "concentration": float(self.concentration),
        }


@dataclass
class CensusResult:
    N_mem: float
    records: list[SiteRecord] = field(default_factory=list)
    hist_edges_hz: np.ndarray = field(default_factory=lambda: _HIST_EDGES_HZ.copy())
    hist_weights: np.ndarray = field(default_factory=lambda: np.zeros(len(_HIST_EDGES_HZ) - 1))
    median_A_par: float = np.nan  # rad/s

    def to_json(self, with_records: bool = False) -> str:
        out = {
            "N_mem": self.N_mem,
            "median_A_par_kHz": None if np.isnan(self.median_A_par)
            else self.median_A_par / const.TWO_PI / 1e3,
            "hist_edges_Hz": self.hist_edges_hz.tolist(),
            "hist_weights": self.hist_weights.tolist(),
        }
        if with_records:
            out["records"] = [r.to_record() for r in self.records]
        return json.dumps(out)


def _weighted_median(values, weights):
    if len(values) == 0 or np.sum(weights) == 0:
        return np.nan
    order = np.argsort(values)
    v, w = np.asarray(values)[order], np.asarray(weights)[order]
    cum = np.cumsum(w)
    return float(v[np.searchsorted(cum, 0.5 * cum[-1])])


def _site_arrays(crystal, electron, radius, overrides):
    sites = enumerate_sites(crystal, radius)
    bath = BathConfiguration(sites.positions, sites.elements, sites.index, sites.shell)
    tensors = attach_hyperfine(bath, overrides, electron.gamma_e).hyperfine
    a_par = tensors[:, 2, 2]
    a_perp = np.hypot(tensors[:, 0, 2], tensors[:, 1, 2])
    w_l = np.array([ELEMENT_SPECIES[e].gamma for e in sites.elements]) * electron.B
    return sites, a_par, a_perp, w_l


def _fidelity(model, p, f_gate, m_self=0.0):
    if model == "crosstalk":
        return 0.5 * (1 + p) * f_gate
    return 0.5 * (1 - m_self * p)


# -- direct single-site operations -----------------------------------------

def expected_crosstalk(site_i: int, N: int, tau: float, crystal: CrystalModel, isotopes: IsotopeModel,
                       electron: ElectronModel, radius: float = DEFAULT_RADIUS, overrides=None) -> float:
    """Product of E(M_j) over every enumerated site except ``site_i`` (a site index)."""
    sites, a_par, a_perp, w_l = _site_arrays(crystal, electron, radius, overrides)
    return _crosstalk_direct(sites, a_par, a_perp, w_l, site_i, N, tau, isotopes, electron.m_s)


def _crosstalk_direct(sites, a_par, a_perp, w_l, site_i, N, tau, isotopes, m_s):
    others = sites.index != site_i
    c = np.where(sites.elements == "Si", isotopes.c_si29, isotopes.c_c13)[others]
    m = magnetization_array(w_l[others], a_par[others], a_perp[others], m_s, N, tau)
    return float(np.prod(1 - c * (1 - m)))


def crosstalk_from_terms(c, m) -> float:
    """P for explicit arrays of occupation probabilities and single-spin coherences."""
    c, m = np.asarray(c, dtype=float), np.asarray(m, dtype=float)
    return float(np.prod(1 - c * (1 - m)))


def site_usability(site_i: int, criteria: MemoryCriteria, crystal: CrystalModel, isotopes: IsotopeModel,
                   electron: ElectronModel, radius: float = DEFAULT_RADIUS, overrides=None) -> SiteRecord:
    """Usability of one lattice site by brute-force evaluation of every candidate design."""
    sites, a_par, a_perp, w_l = _site_arrays(crystal, electron, radius, overrides)
    pos = int(np.flatnonzero(sites.index == site_i)[0])
    site = sites[pos]
    nucleus = Nucleus(a_par[pos], a_perp[pos], ELEMENT_SPECIES[site.element])
    c_i = isotopes.fraction(site.element)
    best = (None, 1.0, 0.0)
    for g in candidate_designs(nucleus, electron, criteria.theta_target, criteria.k_max):
        if g.time > criteria.T_max:
            continue
        p = _crosstalk_direct(sites, a_par, a_perp, w_l, site_i, g.N, g.tau, isotopes, electron.m_s)
        m_self = float(magnetization_array(w_l[pos], a_par[pos], a_perp[pos], electron.m_s, g.N, g.tau))
        f = _fidelity(criteria.fidelity_model, p, g.fidelity, m_self)
        if f > best[2]:
            best = (g, p, f)
    g, p, f = best
    usable = g is not None and f >= criteria.F_min
    return SiteRecord(site, float(a_par[pos]), float(a_perp[pos]), g, p, f, usable, c_i)


# -- batched census ---------------------------------------------------------

class CensusModel:
    """Concentration-independent part of the census for one crystal and field.

    Sites sharing (element, A_par, A_perp) are merged into classes. Gate
    designs and single-spin coherences are computed once; any number of
    concentrations and criteria can then be evaluated cheaply.
    """

    def __init__(self, crystal: CrystalModel, electron: ElectronModel, radius: float = DEFAULT_RADIUS,
                 theta_target: float = np.pi / 2, k_max: int = 8, T_limit: float = 2e-3,
                 overrides=None, window_points: int = DEFAULT_WINDOW_POINTS, chunk: int = 64):
        self.crystal, self.electron, self.radius = crystal, electron, radius
        self.theta_target, self.k_max, self.T_limit = theta_target, k_max, T_limit
        self.sites, a_par, a_perp, w_l = _site_arrays(crystal, electron, radius, overrides)
        is_si = self.sites.elements == "Si"
        key = np.stack([is_si.astype(float), np.round(a_par, 3), np.round(a_perp, 3)], axis=1)
        _, first, inverse, mult = np.unique(key, axis=0, return_index=True, return_inverse=True,
                                            return_counts=True)
        self.class_of = inverse.ravel()
        self.mult = mult
        self.cls_si = is_si[first]
        self.cls_a_par, self.cls_a_perp, self.cls_w_l = a_par[first], a_perp[first], w_l[first]
        self.site_a_par, self.site_a_perp = a_par, a_perp
        self._chunk = chunk

        gateable = np.flatnonzero(self.cls_a_perp > 0)
        fields = ("tau", "N", "theta", "dot", "fidelity", "time")
        d = {f: [] for f in fields}
        for start in range(0, len(gateable), 256):
            idx = gateable[start:start + 256]
            c = design_candidates(self.cls_w_l[idx], self.cls_a_par[idx], self.cls_a_perp[idx],
                                  electron.m_s, theta_target, k_max, window_points)
            for f in fields:
                d[f].append(c[f])
        if len(gateable):
            d = {f: np.concatenate(v) for f, v in d.items()}
            ok = (d["N"] > 0) & (d["time"] <= T_limit)
            rows, ks = np.nonzero(ok)
        else:
            rows = ks = np.array([], dtype=int)
        self.cand_class = gateable[rows]
        self.cand_k = ks
        self.cand = {f: d[f][rows, ks] for f in fields} if len(rows) else {f: np.array([]) for f in fields}
        self.cand_m_self = (magnetization_array(self.cls_w_l[self.cand_class], self.cls_a_par[self.cand_class],
                                                self.cls_a_perp[self.cand_class], electron.m_s,
                                                self.cand["N"], self.cand["tau"])
                            if len(rows) else np.array([]))
        self._table: dict[tuple[float, float], tuple[np.ndarray, np.ndarray]] = {}
        self._sums = None

    @property
    def n_candidates(self) -> int:
        return len(self.cand_class)

    def _cand_x(self, sl):
        """1 - M for a slice of candidates against every class, shape (chunk, n_cls)."""
        return one_minus_m(self.cls_w_l, self.cls_a_par, self.cls_a_perp, float(self.electron.m_s),
                           self.cand["N"][sl].astype(float), self.cand["tau"][sl])

    def _power_sums(self):
        """S_k = sum_j mult_j x_j^k per element, k = 1..SERIES_ORDER, plus the own-class x."""
        if self._sums is None:
            n_c, K = self.n_candidates, SERIES_ORDER
            s_si, s_c = np.zeros((n_c, K)), np.zeros((n_c, K))
            x_self = np.zeros(n_c)
            w = np.stack([np.where(self.cls_si, self.mult, 0.0), np.where(self.cls_si, 0.0, self.mult)], axis=1)
            for start in range(0, n_c, self._chunk):
                sl = slice(start, min(start + self._chunk, n_c))
                x = self._cand_x(sl)
                x_self[sl] = x[np.arange(x.shape[0]), self.cand_class[sl]]
                xp = x.copy()
                for k in range(K):
                    s_si[sl, k], s_c[sl, k] = (xp @ w).T
                    xp *= x
            self._sums = (s_si, s_c, x_self)
        return self._sums

    def _prepare(self, pairs):
        missing = [p for p in pairs if p not in self._table]
        if not missing or not self.n_candidates:
            for p in missing:
                self._table[p] = (np.zeros(0), np.zeros(0, dtype=np.int64))
            return
        # x = 1 - M lies in [0, 2], so c x <= 0.12 and the log series is exact to double precision
        series = [p for p in missing if max(p) <= SERIES_MAX_C]
        direct = [p for p in missing if max(p) > SERIES_MAX_C]
        if series:
            s_si, s_c, x_self = self._power_sums()
            k = np.arange(1, SERIES_ORDER + 1)
            for p in series:
                c_self = np.where(self.cls_si[self.cand_class], p[0], p[1])
                log_abs = -(s_si @ (p[0] ** k / k) + s_c @ (p[1] ** k / k)) - np.log1p(-c_self * x_self)
                self._table[p] = (log_abs, np.zeros(len(log_abs), dtype=np.int64))
        if direct:
            self._prepare_direct(direct)

    def _prepare_direct(self, missing):
        c_si = np.array([p[0] for p in missing])
        c_c = np.array([p[1] for p in missing])
        conc = np.where(self.cls_si[None, :], c_si[:, None], c_c[:, None])  # (n_pairs, n_cls)
        n_c = self.n_candidates
        log_abs = np.zeros((n_c, len(missing)))
        neg = np.zeros((n_c, len(missing)), dtype=np.int64)
        for start in range(0, n_c, self._chunk):
            sl = slice(start, min(start + self._chunk, n_c))
            x = self._cand_x(sl)
            e = 1 - conc[None, :, :] * x[:, None, :]  # (chunk, n_pairs, n_cls)
            # remove one member of the candidate's own class
            own = self.cand_class[sl]
            e_self = e[np.arange(len(own)), :, own]  # (chunk, n_pairs)
            with np.errstate(divide="ignore"):
                la = np.log(np.abs(e))
                la_self = np.log(np.abs(e_self))
            log_abs[sl] = np.einsum("cpj,j->cp", la, self.mult) - la_self
            neg[sl] = np.einsum("cpj,j->cp", (e < 0).astype(np.int64), self.mult) - (e_self < 0)
        for col, p in enumerate(missing):
            self._table[p] = (log_abs[:, col], neg[:, col])

    def crosstalk(self, isotopes: IsotopeModel) -> np.ndarray:
        """P for every candidate design at the given concentrations."""
        pair = (float(isotopes.c_si29), float(isotopes.c_c13))
        self._prepare([pair])
        log_abs, neg = self._table[pair]
        return np.where(neg % 2, -1.0, 1.0) * np.exp(log_abs)

    def prepare(self, isotope_list):
        self._prepare([(float(i.c_si29), float(i.c_c13)) for i in isotope_list])

    def census(self, isotopes: IsotopeModel, criteria: MemoryCriteria, with_records: bool = False) -> CensusResult:
        if criteria.T_max > self.T_limit:
            raise ValueError(f"T_max {criteria.T_max} exceeds the model's T_limit {self.T_limit}")
        if criteria.k_max > self.k_max or criteria.theta_target != self.theta_target:
            raise ValueError("criteria k_max/theta_target incompatible with this census model")
        n_cls = len(self.mult)
        best_f = np.zeros(n_cls)
        best_cand = np.full(n_cls, -1)
        if self.n_candidates:
            p = self.crosstalk(isotopes)
            f = _fidelity(criteria.fidelity_model, p, self.cand["fidelity"], self.cand_m_self)
            allowed = (self.cand["time"] <= criteria.T_max) & (self.cand_k <= criteria.k_max)
            f = np.where(allowed, f, -np.inf)
            order = np.lexsort((-f, self.cand_class))
            cls_sorted = self.cand_class[order]
            first = np.r_[True, cls_sorted[1:] != cls_sorted[:-1]]
            win = order[first]
            best_f[self.cand_class[win]] = np.maximum(f[win], 0.0)
            best_cand[self.cand_class[win]] = np.where(np.isfinite(f[win]), win, -1)
        cls_conc = np.where(self.cls_si, isotopes.c_si29, isotopes.c_c13)
        usable_cls = (best_cand >= 0) & (best_f >= criteria.F_min) & criteria.in_window(self.cls_a_par)
        weights = np.where(usable_cls, cls_conc, 0.0)
        n_mem = float(np.sum(weights * self.mult))

        a_hz = np.abs(self.cls_a_par) / const.TWO_PI
        hist, _ = np.histogram(a_hz[usable_cls], bins=_HIST_EDGES_HZ,
                               weights=(weights * self.mult)[usable_cls])
        median = _weighted_median(np.abs(self.cls_a_par[usable_cls]), (weights * self.mult)[usable_cls])
        records = []
        if with_records:
            p = self.crosstalk(isotopes) if self.n_candidates else np.array([])
            for s in range(len(self.sites)):
                cl = self.class_of[s]
                ci = best_cand[cl]
                design = None
                if ci >= 0:
                    design = GateDesign(int(self.cand_k[ci]), int(self.cand["N"][ci]), float(self.cand["tau"][ci]),
                                        float(self.cand["theta"][ci]), float(self.cand["dot"][ci]),
                                        float(self.cand["fidelity"][ci]), self.theta_target)
                records.append(SiteRecord(self.sites[s], float(self.site_a_par[s]), float(self.site_a_perp[s]),
                                          design, float(p[ci]) if ci >= 0 else 1.0, float(best_f[cl]),
                                          bool(usable_cls[cl]), float(cls_conc[cl])))
        return CensusResult(n_mem, records, _HIST_EDGES_HZ.copy(), hist, median)


def census(crystal: CrystalModel, isotopes: IsotopeModel, criteria: MemoryCriteria, electron: ElectronModel,
           radius: float = DEFAULT_RADIUS, overrides=None, with_records: bool = False) -> CensusResult:
    model = CensusModel(crystal, electron, radius, criteria.theta_target, criteria.k_max,
                        T_limit=criteria.T_max, overrides=overrides)
    return model.census(isotopes, criteria, with_records)


@dataclass
class SweepTable:
    concentrations: np.ndarray
    n_mem_all: np.ndarray
    n_mem_low: np.ndarray
    median_a_par: np.ndarray  # rad/s, over all usable memories
    histograms: np.ndarray  # (n_conc, n_bins) weights of usable |A_par|
    hist_edges_hz: np.ndarray = field(default_factory=lambda: _HIST_EDGES_HZ.copy())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["concentration", "N_mem_all", "N_mem_lowA", "median_Apar_kHz"])
        for c, a, lo, med in zip(self.concentrations, self.n_mem_all, self.n_mem_low, self.median_a_par):
            w.writerow([repr(float(c)), repr(float(a)), repr(float(lo)), repr(float(med / const.TWO_PI / 1e3))])
        return buf.getvalue()


def concentration_sweep(crystal: CrystalModel, concentrations, criteria: MemoryCriteria,
                        electron: ElectronModel, radius: float = DEFAULT_RADIUS, overrides=None,
                        model: CensusModel | None = None, species: str = "both") -> SweepTable:
    """Census at [13C] = [29Si] = c for each c (``species`` may restrict to 'Si' or 'C')."""
    conc = np.asarray(concentrations, dtype=float)
    if np.any(np.diff(conc) < 0):
        raise ValueError("concentrations must be sorted")
    if model is None:
        model = CensusModel(crystal, electron, radius, criteria.theta_target, criteria.k_max,
                            T_limit=criteria.T_max, overrides=overrides)

    def iso(c):
        return IsotopeModel(c if species in ("both", "Si") else 0.0, c if species in ("both", "C") else 0.0)

    isotopes = [iso(c) for c in conc]
    model.prepare(isotopes)
    low = MemoryCriteria(criteria.F_min, criteria.T_max, criteria.theta_target, criteria.k_max,
                         LOW_HYPERFINE, criteria.fidelity_model)
    all_, lo_, med, hist = [], [], [], []
    for i in isotopes:
        r = model.census(i, criteria)
        all_.append(r.N_mem)
        med.append(r.median_A_par)
        hist.append(r.hist_weights)
        lo_.append(model.census(i, low).N_mem)
    return SweepTable(conc, np.array(all_), np.array(lo_), np.array(med), np.array(hist))
