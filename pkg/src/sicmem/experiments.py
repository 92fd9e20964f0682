"""Runnable experiments: each takes a RunConfig and returns {filename: text}.

Outputs are plain CSV/JSON strings so that reruns can be compared byte for
byte. Independent work units (bath seeds) may be spread over processes;
results are gathered in seed order, so the worker count never changes the
numbers.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import cce, ddgate, memcensus, rbench, register
from . import constants as const
from .config import RunConfig
from .hyperfine import ElectronModel, attach_hyperfine
from .lattice import CrystalModel, IsotopeModel, enumerate_sites, sample_bath, sample_paramagnetic_bath


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def crystal_of(cfg: RunConfig) -> CrystalModel:
    return CrystalModel(a=cfg.crystal.a_nm, c=cfg.crystal.c_nm, vacancy_class=cfg.crystal.vacancy_class)


def electron_of(cfg: RunConfig) -> ElectronModel:
    return ElectronModel.at_gauss(cfg.electron.field_gauss, m_s=cfg.electron.m_s,
                                  D=const.TWO_PI * cfg.electron.zfs_hz)


def isotopes_of(cfg: RunConfig) -> IsotopeModel:
    return IsotopeModel(cfg.isotopes.si29, cfg.isotopes.c13)


def overrides_of(cfg: RunConfig) -> dict:
    return {k: const.TWO_PI * v for k, v in cfg.bath.overrides_hz.items()}


def _map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- spectrum ------------------------------------------------------------------

def _spectrum_unit(args):
    cfg, seed = args
    sites = enumerate_sites(crystal_of(cfg), cfg.bath.radius_nm)
    bath = attach_hyperfine(sample_bath(sites, isotopes_of(cfg), seed), overrides_of(cfg))
    s = cfg.spectrum
    tau = np.linspace(s.tau_min_s, s.tau_max_s, s.points)
    return ddgate.bath_spectrum(bath, tau, s.pulses, electron_of(cfg)), bath


def run_spectrum(cfg: RunConfig) -> dict[str, str]:
    seeds = [cfg.seed + i for i in range(cfg.spectrum.seeds)]
    results = _map(_spectrum_unit, [(cfg, s) for s in seeds], cfg.workers)
    first, bath = results[0]
    out = {"spectrum.csv": first.to_csv(), "bath.json": bath.to_json() + "\n"}
    summary = {"seeds": seeds, "dips": [r[0].count_dips(cfg.spectrum.dip_threshold) for r in results],
               "n_spins": [len(r[1]) for r in results]}
    if len(results) > 1:
        out["spectrum_ensemble.csv"] = ddgate.ensemble_spectrum([r[0] for r in results]).to_csv()
    out["spectrum_summary.json"] = _dumps(summary)
    return out


# -- coherence -----------------------------------------------------------------

def sequence_of(cfg: RunConfig) -> ddgate.PulseSequence:
    c = cfg.coherence
    if c.sequence == "ramsey":
        return ddgate.PulseSequence.ramsey()
    if c.sequence == "hahn":
        return ddgate.PulseSequence.hahn()
    if c.sequence == "xy8":
        if c.pulses % 8:
            raise ValueError("XY8 needs a multiple of 8 pulses")
        return ddgate.PulseSequence.xy8(c.pulses // 8, 0.0)
    return ddgate.PulseSequence.cpmg(c.pulses)


def coherence_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.coherence.t_max_s, cfg.coherence.points)


def _coherence_unit(args):
    cfg, seed = args
    c = cfg.coherence
    t = coherence_grid(cfg)
    e = electron_of(cfg)
    seq = sequence_of(cfg)
    sites = enumerate_sites(crystal_of(cfg), c.bath_radius_nm)
    bath = attach_hyperfine(sample_bath(sites, isotopes_of(cfg), seed), overrides_of(cfg))
    curve = cce.cce_coherence(bath, seq, e, t, order=c.order, r_pair_cutoff=c.pair_cutoff_nm)
    if c.paramagnetic_density_cm3 > 0:
        radius = cce.paramagnetic_radius(c.paramagnetic_density_cm3, c.paramagnetic_spins,
                                         c.paramagnetic_min_radius_nm)
        pos = sample_paramagnetic_bath(c.paramagnetic_density_cm3, radius, seed)
        curve = cce.total_coherence(curve, cce.pair_bath_coherence(pos, seq, e, t))
    return curve


def coherence_curves(cfg: RunConfig) -> list:
    seeds = [cfg.seed + i for i in range(cfg.coherence.seeds)]
    return _map(_coherence_unit, [(cfg, s) for s in seeds], cfg.workers)


def run_coherence(cfg: RunConfig) -> dict[str, str]:
    curves = coherence_curves(cfg)
    seeds = [cfg.seed + i for i in range(len(curves))]
    t = curves[0].t
    # numpy's mean uses pairwise summation along the seed axis
    mean = cce.CoherenceCurve(t, np.mean([c.L for c in curves], axis=0),
                              np.any([c.flags for c in curves], axis=0), {"seeds": len(curves)})
    rows = ["seed,T2_s,n"]
    t2 = []
    for s, c in zip(seeds, curves):
        try:
            f = cce.fit_stretched(c)
            rows.append(f"{s},{f.T2!r},{f.n!r}")
            t2.append(f.T2)
        except ValueError:
            rows.append(f"{s},inf,nan")
            t2.append(np.inf)
    try:
        mf = cce.fit_stretched(mean)
        mean_fit = {"T2_s": mf.T2, "n": mf.n}
    except ValueError as exc:
        mean_fit = {"error": str(exc)}
    med = float(np.median(t2))
    summary = {"seeds": seeds, "median_T2_s": med if np.isfinite(med) else None,
               "mean_curve_fit": mean_fit, "sequence": cfg.coherence.sequence, "pulses": cfg.coherence.pulses,
               "flagged_points": int(mean.flags.sum())}
    return {"coherence_mean.csv": mean.to_csv(), "coherence_fits.csv": "\n".join(rows) + "\n",
            "coherence_summary.json": _dumps(summary)}


# -- census and sweep ----------------------------------------------------------

def criteria_of(cfg: RunConfig) -> memcensus.MemoryCriteria:
    c = cfg.census
    window = None if c.a_par_max_hz is None else (0.0, const.TWO_PI * c.a_par_max_hz)
    return memcensus.MemoryCriteria(c.F_min, c.T_max_s, c.theta_rad, c.k_max, window, c.fidelity_model)


def census_model_of(cfg: RunConfig) -> memcensus.CensusModel:
    crit = criteria_of(cfg)
    return memcensus.CensusModel(crystal_of(cfg), electron_of(cfg), cfg.bath.radius_nm, crit.theta_target,
                                 crit.k_max, T_limit=crit.T_max, overrides=overrides_of(cfg))


def run_census(cfg: RunConfig) -> dict[str, str]:
    iso = isotopes_of(cfg)
    crit = criteria_of(cfg)
    if iso.c_si29 == 0 and iso.c_c13 == 0:
        result = memcensus.CensusResult(0.0)
    else:
        result = census_model_of(cfg).census(iso, crit, with_records=cfg.census.with_records)
    return {"census.json": result.to_json(with_records=cfg.census.with_records) + "\n"}


def sweep_concentrations(cfg: RunConfig) -> np.ndarray:
    s = cfg.sweep
    if s.points == 1:
        return np.array([s.c_min])
    return np.logspace(np.log10(s.c_min), np.log10(s.c_max), s.points)


def run_sweep(cfg: RunConfig) -> dict[str, str]:
    conc = sweep_concentrations(cfg)
    table = memcensus.concentration_sweep(crystal_of(cfg), conc, criteria_of(cfg), electron_of(cfg),
                                          model=census_model_of(cfg), species=cfg.sweep.species)
    hist = {"hist_edges_Hz": table.hist_edges_hz.tolist(), "concentrations": conc.tolist(),
            "weights": table.histograms.tolist()}
    return {"sweep.csv": table.to_csv(), "sweep_histograms.json": _dumps(hist)}


# -- register ------------------------------------------------------------------

def _rho_json(rho) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(rho)]


def run_register(cfg: RunConfig) -> dict[str, str]:
    r = cfg.register_
    base = register.NoiseModel(r.p_gate, r.p_dephase, r.reinit_fidelity, r.readout_error)
    noise = (register.calibrate_noise(r.init_target, r.bell_target, r.iterations, base)
             if r.calibrate else base)
    cooled = register.cooled_state(noise, r.iterations)
    bell = register.entangle_bell(cooled, noise)
    pair = register.reduce_to_pair(bell)
    recon = register.qst(pair, shots=r.shots, seed=cfg.seed, psd=True, readout_error=noise.readout_error)
    spec = register.odmr_spectrum(cooled, const.TWO_PI * r.a_par_hz, const.TWO_PI * r.linewidth_hz)
    summary = {
        "noise": {"p_gate": noise.p_gate, "p_dephase": noise.p_dephase,
                  "reinit_fidelity": noise.reinit_fidelity, "readout_error": noise.readout_error},
        "nuclear_init_fidelity": register.nuclear_init_fidelity(cooled),
        "nuclear_polarization": register.nuclear_polarization(cooled),
        "bell_fidelity": register.bell_fidelity(bell),
        "ppt_min_eigenvalue": register.ppt_min_eigenvalue(pair),
        "concurrence": register.concurrence(pair),
        "qst_fidelity": register.state_fidelity(recon, pair),
        "qst_ppt_min_eigenvalue": register.ppt_min_eigenvalue(recon),
        "odmr_inferred_fidelity": spec.inferred_fidelity,
    }
    rhos = {"bell": _rho_json(pair), "qst": _rho_json(recon), "cooled": _rho_json(cooled.rho)}
    return {"register.json": _dumps(summary), "density_matrices.json": _dumps(rhos), "odmr.csv": spec.to_csv()}


# -- randomized benchmarking ---------------------------------------------------

def run_rb(cfg: RunConfig) -> dict[str, str]:
    r = cfg.rb
    seqs = rbench.sample_sequences(r.lengths, r.sequences, cfg.seed)
    surv = rbench.simulate_rb(seqs, r.p_depol, shots=r.shots, seed=cfg.seed + 1)
    res = rbench.fit_rb(surv, n_boot=r.n_boot, seed=cfg.seed + 2)
    return {"rb.csv": res.to_csv(), "rb.json": res.to_json() + "\n"}


RUNNERS = {"spectrum": run_spectrum, "coherence": run_coherence, "census": run_census, "sweep": run_sweep,
           "register": run_register, "rb": run_rb}
