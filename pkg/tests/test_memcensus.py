import json

import numpy as np
import pytest

from sicmem import constants as const
from sicmem.hyperfine import ElectronModel
from sicmem.lattice import IsotopeModel
from sicmem.memcensus import (LOW_HYPERFINE, SERIES_MAX_C, CensusModel, MemoryCriteria, concentration_sweep,
                              crosstalk_from_terms, expected_crosstalk, site_usability)

E500 = ElectronModel.at_gauss(500)
CRIT = MemoryCriteria(0.9, 1.5e-3)
OVR = {"Si_IIa": const.TWO_PI * 13.2e6}


@pytest.fixture(scope="module")
def small_model(crystal):
    return CensusModel(crystal, E500, 3.0)


def test_criteria_validation():
    for bad in (dict(F_min=0.0), dict(F_min=1.5), dict(T_max=-1.0), dict(fidelity_model="other")):
        with pytest.raises(ValueError):
            MemoryCriteria(**bad)
    w = MemoryCriteria(a_par_window=LOW_HYPERFINE)
    assert list(w.in_window(np.array([1e3, -1e3, 1e9]))) == [True, True, False]


def test_crosstalk_arithmetic():
    assert crosstalk_from_terms([0.5, 0.5], [0.8, 0.6]) == pytest.approx(0.72, abs=1e-15)
    assert crosstalk_from_terms([0.0, 0.0], [0.3, -0.2]) == 1.0
    assert crosstalk_from_terms([1.0], [0.37]) == pytest.approx(0.37)
    assert crosstalk_from_terms([0.3, 0.9], [1.0, 1.0]) == 1.0


def test_expected_crosstalk_limits(crystal):
    assert expected_crosstalk(5, 32, 4e-6, crystal, IsotopeModel(0, 0), E500, radius=2.0) == 1.0
    p = expected_crosstalk(5, 32, 4e-6, crystal, IsotopeModel(0.047, 0.011), E500, radius=2.0)
    assert -1 <= p <= 1


def test_model_matches_brute_force_sites(crystal, small_model):
    iso = IsotopeModel(0.01, 0.01)
    res = small_model.census(iso, CRIT, with_records=True)
    rng = np.random.default_rng(0)
    usable = [r for r in res.records if r.usable]
    unusable = [r for r in res.records if not r.usable and r.design is not None]
    for rec in list(rng.choice(usable, 3)) + list(rng.choice(unusable, 3)):
        ref = site_usability(rec.site.index, CRIT, crystal, iso, E500, radius=3.0, overrides=OVR)
        assert ref.usable == rec.usable
        assert ref.fidelity == pytest.approx(rec.fidelity, abs=1e-9)
        assert ref.design.k == rec.design.k and ref.design.N == rec.design.N


def test_series_path_matches_direct(small_model):
    iso = IsotopeModel(0.02, 0.005)
    assert max(iso.c_si29, iso.c_c13) <= SERIES_MAX_C
    fast = small_model.crosstalk(iso)
    small_model._prepare_direct([(iso.c_si29, iso.c_c13)])
    log_abs, neg = small_model._table[(iso.c_si29, iso.c_c13)]
    direct = np.where(neg % 2, -1.0, 1.0) * np.exp(log_abs)
    assert np.max(np.abs(fast - direct)) < 1e-10


def test_records_respect_criteria(small_model):
    res = small_model.census(IsotopeModel(0.005, 0.005), CRIT, with_records=True)
    for r in res.records:
        if r.usable:
            assert r.fidelity >= CRIT.F_min and r.design.time <= CRIT.T_max
        if r.A_perp == 0:
            assert not r.usable
    total = sum(r.concentration for r in res.records if r.usable)
    assert res.N_mem == pytest.approx(total, rel=1e-12)
    data = json.loads(res.to_json(with_records=True))
    assert len(data["records"]) == len(res.records)
    assert data["N_mem"] == res.N_mem


def test_zero_concentration(small_model):
    assert small_model.census(IsotopeModel(0, 0), CRIT).N_mem == 0.0


def test_isolated_site_uses_gate_fidelity(crystal, small_model):
    # with no other spins present P = 1 and F = F_gate
    iso = IsotopeModel(1e-12, 1e-12)
    res = small_model.census(iso, MemoryCriteria(0.5, 1.5e-3), with_records=True)
    r = next(r for r in res.records if r.design is not None)
    assert r.fidelity == pytest.approx(r.design.fidelity, abs=1e-9)


def test_zero_threshold_counts_everything(small_model):
    iso = IsotopeModel(0.01, 0.02)
    res = small_model.census(iso, MemoryCriteria(1e-9, 2e-3), with_records=True)
    with_gate = [r for r in res.records if r.design is not None]
    assert res.N_mem == pytest.approx(sum(r.concentration for r in with_gate))


def test_monotone_in_criteria(small_model):
    iso = IsotopeModel(0.003, 0.003)
    grid = np.array([[small_model.census(iso, MemoryCriteria(f, t)).N_mem for t in (1e-3, 1.5e-3, 2e-3)]
                     for f in (0.8, 0.9, 0.95)])
    assert np.all(np.diff(grid, axis=0) <= 1e-12)
    assert np.all(np.diff(grid, axis=1) >= -1e-12)


def test_raising_threshold_never_adds_sites(small_model):
    iso = IsotopeModel(0.003, 0.003)
    lo = small_model.census(iso, MemoryCriteria(0.8, 1.5e-3), with_records=True)
    hi = small_model.census(iso, MemoryCriteria(0.95, 1.5e-3), with_records=True)
    for a, b in zip(lo.records, hi.records):
        assert not (b.usable and not a.usable)


def test_model_rejects_incompatible_criteria(small_model):
    with pytest.raises(ValueError, match="T_limit"):
        small_model.census(IsotopeModel(0.01, 0.01), MemoryCriteria(0.9, 5e-3))


def test_sweep_rows_and_zero_endpoint(crystal, small_model):
    conc = np.array([0.0, 1e-3, 1e-2])
    table = concentration_sweep(crystal, conc, CRIT, E500, model=small_model)
    assert table.n_mem_all[0] == 0.0
    assert np.all(table.n_mem_low <= table.n_mem_all + 1e-12)
    lines = table.to_csv().splitlines()
    assert lines[0] == "concentration,N_mem_all,N_mem_lowA,median_Apar_kHz"
    assert len(lines) == 4
    with pytest.raises(ValueError):
        concentration_sweep(crystal, conc[::-1], CRIT, E500, model=small_model)


def test_species_restriction(crystal, small_model):
    conc = np.array([1e-3, 3e-3])
    si = concentration_sweep(crystal, conc, CRIT, E500, model=small_model, species="Si")
    c = concentration_sweep(crystal, conc, CRIT, E500, model=small_model, species="C")
    both = concentration_sweep(crystal, conc, CRIT, E500, model=small_model)
    assert np.all(both.n_mem_all >= np.maximum(si.n_mem_all, c.n_mem_all) - 1e-12)
