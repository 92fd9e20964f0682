import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from sicmem import constants as const
from sicmem.hyperfine import (SPECIES, ElectronModel, Nucleus, attach_hyperfine, bath_nuclei, dipolar_hyperfine,
                              dipolar_hyperfine_array, effective_fields, nuclear_pair_coupling)
from sicmem.lattice import BathConfiguration, IsotopeModel, sample_bath

G_E, G_SI, G_C = const.GAMMA_E, const.GAMMA_SI29, const.GAMMA_C13


def scalar_dipole(g1, g2, r_nm, cos2):
    """Independent oracle from CODATA constants: (mu0/4pi) g1 g2 hbar (1 - 3cos^2) / r^3 in rad/s."""
    return sc.mu_0 / (4 * sc.pi) * g1 * g2 * sc.hbar * (1 - 3 * cos2) / (r_nm * 1e-9) ** 3


def test_constants_match_codata():
    assert const.HBAR == pytest.approx(sc.hbar, rel=1e-9)
    assert const.MU0_OVER_4PI == pytest.approx(sc.mu_0 / (4 * sc.pi), rel=1e-9)


def test_axial_tensor():
    t = dipolar_hyperfine(np.array([0, 0, 1.0]), G_E, G_SI)
    assert t.A_perp == 0
    assert t.A_par == pytest.approx(-scalar_dipole(G_E, G_SI, 1.0, 1.0), rel=1e-12)
    # along z, 3cos^2 - 1 = 2: A_par = 2 (mu0/4pi) g_e g_n hbar / r^3
    assert t.A_par == pytest.approx(2 * sc.mu_0 / (4 * sc.pi) * G_E * G_SI * sc.hbar / 1e-27, rel=1e-12)


def test_si29_one_nm_value():
    # ~ -2pi * 31.4 kHz for 29Si 1 nm above the defect
    a = dipolar_hyperfine(np.array([0, 0, 1.0]), G_E, G_SI).A_par
    assert a / const.TWO_PI == pytest.approx(-31.44e3, rel=2e-3)


def test_magic_angle():
    th = np.arccos(1 / np.sqrt(3))
    r = 0.8 * np.array([np.sin(th), 0, np.cos(th)])
    t = dipolar_hyperfine(r, G_E, G_C)
    scale = abs(dipolar_hyperfine(np.array([0, 0, 0.8]), G_E, G_C).A_par)
    assert abs(t.A_par) < 1e-9 * scale


def test_core_exclusion():
    with pytest.raises(ValueError, match="use tabulated contact hyperfine"):
        dipolar_hyperfine(np.array([0.05, 0, 0]), G_E, G_SI)


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-3, 3)] * 3).filter(lambda v: np.linalg.norm(v) > 0.2),
       st.floats(0, 2 * np.pi))
def test_tensor_properties(v, phi):
    r = np.array(v)
    a = dipolar_hyperfine_array(r[None], G_SI, G_E)[0]
    scale = np.abs(a).max()
    assert np.allclose(a, a.T, atol=1e-12 * scale)
    assert abs(np.trace(a)) < 1e-12 * scale
    # rotating about c leaves A_par and A_perp unchanged
    rot = np.array([[np.cos(phi), -np.sin(phi), 0], [np.sin(phi), np.cos(phi), 0], [0, 0, 1]])
    t1 = dipolar_hyperfine(r, G_E, G_SI)
    t2 = dipolar_hyperfine(rot @ r, G_E, G_SI)
    assert t2.A_par == pytest.approx(t1.A_par, rel=1e-9, abs=1e-9 * scale)
    assert t2.A_perp == pytest.approx(t1.A_perp, rel=1e-9, abs=1e-9 * scale)
    # exact 1/r^3 scaling
    t3 = dipolar_hyperfine(2 * r, G_E, G_SI)
    assert np.allclose(t3.matrix * 8, t1.matrix, rtol=1e-12, atol=1e-12 * scale)


def test_pair_coupling_oracle():
    p = nuclear_pair_coupling(np.array([0.308, 0, 0]), G_SI, G_SI)
    assert p.c_zz == pytest.approx(scalar_dipole(G_SI, G_SI, 0.308, 0.0), rel=1e-12)
    assert p.b_ff == pytest.approx(-p.c_zz / 4)


def test_pair_coupling_magic_and_hetero():
    th = np.arccos(1 / np.sqrt(3))
    p = nuclear_pair_coupling(0.5 * np.array([np.sin(th), 0, np.cos(th)]), G_SI, G_SI)
    assert abs(p.c_zz) < 1e-9
    q = nuclear_pair_coupling(np.array([0, 0.4, 0.1]), G_SI, G_C)
    assert q.b_ff == 0 and q.c_zz != 0
    with pytest.raises(ValueError):
        nuclear_pair_coupling(np.zeros(3), G_SI, G_SI)
    r = np.array([0.1, -0.2, 0.3])
    assert nuclear_pair_coupling(r, G_SI, G_SI) == nuclear_pair_coupling(-r, G_SI, G_SI)


def test_effective_fields():
    e = ElectronModel.at_gauss(584)
    n = Nucleus(const.TWO_PI * 650, const.TWO_PI * 11.45e3)
    w_l = G_SI * 584e-4
    assert effective_fields(n, e, 0) == (pytest.approx(w_l), 0)
    bare = Nucleus(const.TWO_PI * 650, 0.0)
    assert effective_fields(bare, e, -1) == (pytest.approx(w_l - bare.A_par), 0)
    # splitting between the two electron branches is 2 A_par
    up, _ = effective_fields(bare, e, 1)
    down, _ = effective_fields(bare, e, -1)
    assert (up - down) / const.TWO_PI == pytest.approx(1300.0)


def test_electron_validation():
    with pytest.raises(ValueError):
        ElectronModel(B=-1.0)
    with pytest.raises(ValueError):
        ElectronModel(m_s=0)


def test_species_table():
    assert SPECIES["29Si"].gamma < 0 < SPECIES["13C"].gamma
    assert SPECIES["e"].spin == 0.5


def test_attach_hyperfine_overrides(sites6):
    bath = sample_bath(sites6, IsotopeModel(1.0, 1.0), 0)
    b = attach_hyperfine(bath)
    mask = b.shell == "Si_IIa"
    assert mask.sum() == 6
    assert np.allclose(b.hyperfine[mask], const.mhz(13.2) * np.eye(3))
    other = ~mask & (b.shell == "")
    nuclei = bath_nuclei(b)
    assert len(nuclei) == len(b)
    assert np.allclose(np.trace(b.hyperfine[other], axis1=1, axis2=2), 0, atol=1e-6)


def test_attach_hyperfine_empty():
    b = attach_hyperfine(BathConfiguration.empty())
    assert b.hyperfine.shape == (0, 3, 3)
