import json

import numpy as np
import pytest
from scipy import stats
from scipy.spatial.distance import cdist

from sicmem.lattice import (CM3_TO_NM3, BathConfiguration, CrystalModel, IsotopeModel, enumerate_sites,
                            sample_bath, sample_paramagnetic_bath)


def brute_force_sites(crystal, radius):
    """Independent enumeration: explicit triple loop over a generous block of cells."""
    frac, elements, _ = crystal.basis
    vsi, vc = crystal.vacancies
    origin = crystal.defect_origin()
    n = int(radius / crystal.a) + 3
    nc = int(radius / crystal.c) + 3
    out = []
    for i in range(-n, n + 1):
        for j in range(-n, n + 1):
            for k in range(-nc, nc + 1):
                for b in range(8):
                    if (i, j, k) == (0, 0, 0) and b in (vsi, vc):
                        continue
                    p = crystal.cartesian(np.array([i, j, k]) + frac[b]) - origin
                    if p @ p <= radius**2 + 1e-12:
                        out.append((np.linalg.norm(p), elements[b]))
    return sorted(out)


def test_basis_invariants(crystal):
    frac, elements, classes = crystal.basis
    assert len(frac) == 8
    assert elements.count("Si") == 4 and elements.count("C") == 4
    assert np.all((frac >= 0) & (frac < 1))
    assert np.isclose(np.linalg.norm(crystal.c_axis), 1.0)
    assert sorted(set(classes)) == ["h", "k"]


def test_vacancies_are_kk_pair(crystal):
    frac, elements, classes = crystal.basis
    vsi, vc = crystal.vacancies
    assert elements[vsi] == "Si" and elements[vc] == "C"
    assert classes[vsi] == classes[vc] == "k"
    bond = np.linalg.norm(crystal.cartesian(frac[vc] - frac[vsi]))
    assert bond == pytest.approx(crystal.bond_length)


def test_zero_radius_is_empty(crystal):
    assert len(enumerate_sites(crystal, 0.0)) == 0


def test_radius_too_large(crystal):
    with pytest.raises(ValueError, match="supercell too small"):
        enumerate_sites(crystal, crystal.max_radius + 1)


def test_nearest_neighbour_shell(crystal):
    # the six atoms bonded to the two vacancies sit ~1.26 bond lengths from the midpoint
    sites = enumerate_sites(crystal, 1.3 * crystal.bond_length)
    assert len(sites) == 6
    assert sorted(sites.shell) == ["C_I"] * 3 + ["Si_I"] * 3
    assert np.ptp(sites.distances) < 1e-9


def test_named_shells(crystal):
    sites = enumerate_sites(crystal, 0.5)
    counts = {s: int(np.sum(sites.shell == s)) for s in ("C_I", "Si_I", "Si_IIa", "Si_IIb")}
    assert counts == {"C_I": 3, "Si_I": 3, "Si_IIa": 6, "Si_IIb": 3}
    # second-neighbour silicons of the Si vacancy sit about one in-plane lattice constant away
    frac, _, _ = crystal.basis
    r_vsi = crystal.cartesian(frac[crystal.vacancies[0]]) - crystal.defect_origin()
    for s in ("Si_IIa", "Si_IIb"):
        d = np.linalg.norm(sites.positions[sites.shell == s] - r_vsi, axis=1)
        assert np.allclose(d, crystal.a, atol=0.05 * crystal.bond_length)


@pytest.mark.parametrize("radius", [0.6, 1.2, 2.0])
def test_enumeration_matches_brute_force(crystal, radius):
    sites = enumerate_sites(crystal, radius)
    ref = brute_force_sites(crystal, radius)
    assert len(sites) == len(ref)
    assert np.allclose(sites.distances, [r for r, _ in ref], atol=1e-9)
    assert sorted(sites.elements) == sorted(e for _, e in ref)


def test_sorted_and_within_radius(sites6):
    d = sites6.distances
    assert np.all(np.diff(np.round(d, 9)) >= 0)
    assert d.max() <= 6.0 + 1e-9
    assert len(set(sites6.index.tolist())) == len(sites6)


def test_doubling_radius_scales_by_volume(crystal):
    n3 = len(enumerate_sites(crystal, 3.0))
    n6 = len(enumerate_sites(crystal, 6.0))
    assert 8 * 0.85 <= n6 / n3 <= 8 * 1.15


def test_translation_consistency(crystal):
    a = enumerate_sites(crystal, 2.5)
    b = enumerate_sites(crystal, 2.5, cell_offset=(2, -1, 3))
    assert np.allclose(np.sort(a.distances), np.sort(b.distances), atol=1e-9)
    assert np.array_equal(a.index, b.index)
    assert np.allclose(a.positions, b.positions, atol=1e-9)


def test_vacancy_sites_excluded(crystal, sites6):
    frac, _, _ = crystal.basis
    origin = crystal.defect_origin()
    vac = np.array([crystal.cartesian(frac[i]) - origin for i in crystal.vacancies])
    assert cdist(vac, sites6.positions).min() > 0.1


def test_isotope_validation():
    with pytest.raises(ValueError):
        IsotopeModel(1.5, 0.0)
    with pytest.raises(ValueError):
        IsotopeModel(0.0, -0.1)


def test_sample_bath_limits(sites6):
    assert len(sample_bath(sites6, IsotopeModel(0.0, 0.0), 1)) == 0
    full = sample_bath(sites6, IsotopeModel(1.0, 0.0), 1)
    assert len(full) == int(np.sum(sites6.elements == "Si"))
    assert set(full.elements) == {"Si"}


def test_sample_bath_deterministic(sites6):
    a = sample_bath(sites6, IsotopeModel(0.047, 0.011), 7)
    b = sample_bath(sites6, IsotopeModel(0.047, 0.011), 7)
    assert a.to_json() == b.to_json()
    assert len(set(a.site_index.tolist())) == len(a)


def test_occupancy_binomial_bound(crystal):
    sites = enumerate_sites(crystal, 4.0)
    si = sites.select(sites.elements == "Si")[:10_000]
    assert len(si) == 10_000
    c = 0.047
    counts = [len(sample_bath(si, IsotopeModel(c, 0.0), s)) for s in range(100)]
    n_total = 100 * len(si)
    sigma = np.sqrt(n_total * c * (1 - c))
    assert abs(sum(counts) - n_total * c) < 3 * sigma


def test_bath_json_records(sites6):
    bath = sample_bath(sites6, IsotopeModel(0.047, 0.011), 3)
    recs = json.loads(bath.to_json())["spins"]
    assert len(recs) == len(bath)
    assert set(recs[0]) == {"site_index", "element", "position", "species"}
    assert {r["species"] for r in recs} <= {"29Si", "13C"}


def test_paramagnetic_empty_and_deterministic():
    assert len(sample_paramagnetic_bath(0.0, 100.0, 1)) == 0
    a = sample_paramagnetic_bath(1e15, 100.0, 5)
    assert np.array_equal(a, sample_paramagnetic_bath(1e15, 100.0, 5))
    with pytest.raises(ValueError):
        sample_paramagnetic_bath(-1.0, 10.0, 0)


def test_paramagnetic_poisson_mean():
    expected = 1e15 * CM3_TO_NM3 * 4 / 3 * np.pi * 100.0**3
    assert expected == pytest.approx(4.18879, rel=1e-5)
    counts = np.array([len(sample_paramagnetic_bath(1e15, 100.0, s)) for s in range(1000)])
    sigma = np.sqrt(expected / len(counts))
    assert abs(counts.mean() - expected) < 3 * sigma


def test_paramagnetic_points_uniform_in_sphere():
    pos = sample_paramagnetic_bath(1e17, 50.0, 2)
    r = np.linalg.norm(pos, axis=1)
    assert r.max() <= 50.0
    # radial CDF of a uniform ball is (r/R)^3
    assert stats.kstest((r / 50.0) ** 3, "uniform").pvalue > 1e-3


def test_from_spins_roundtrip():
    b = BathConfiguration.from_spins([[1.0, 0, 0], [0, 1.0, 0]], ["Si", "C"])
    assert len(b) == 2 and b.species == ["29Si", "13C"]
    assert len(BathConfiguration.empty()) == 0
