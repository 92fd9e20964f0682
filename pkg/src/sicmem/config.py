"""Run configuration schema (version 1).

Every frequency is given as a linear frequency in Hz and converted to
rad/s here; times are in seconds, lengths in nm, densities in cm^-3.
"""

from __future__ import annotations

from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import constants as const

SCHEMA_VERSION = 1
EXPERIMENTS = ("spectrum", "coherence", "census", "sweep", "register", "rb")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CrystalConfig(_Strict):
    a_nm: float = Field(const.A_LATTICE, gt=0)
    c_nm: float = Field(const.C_LATTICE, gt=0)
    vacancy_class: Literal["kk"] = "kk"


class IsotopeConfig(_Strict):
    si29: float = Field(const.PURIFIED_SI29, ge=0, le=1)
    c13: float = Field(const.PURIFIED_C13, ge=0, le=1)


class ElectronConfig(_Strict):
    field_gauss: float = Field(500.0, ge=0)
    m_s: Literal[-1, 1] = -1
    zfs_hz: float = Field(1.336e9, gt=0)


class BathConfig(_Strict):
    radius_nm: float = Field(6.0, gt=0)
    overrides_hz: dict[str, float] = Field(default_factory=lambda: {"Si_IIa": 13.2e6})


class SpectrumConfig(_Strict):
    pulses: int = Field(32, ge=2)
    tau_min_s: float = Field(1e-6, gt=0)
    tau_max_s: float = Field(20e-6, gt=0)
    points: int = Field(2000, ge=2)
    seeds: int = Field(1, ge=1)
    dip_threshold: float = Field(0.5, ge=-1, le=1)

    @field_validator("pulses")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("pulse count must be even (complete decoupling periods)")
        return v

    @model_validator(mode="after")
    def _grid(self):
        if self.tau_max_s <= self.tau_min_s:
            raise ValueError("tau_max_s must exceed tau_min_s")
        return self


class CoherenceConfig(_Strict):
    sequence: Literal["ramsey", "hahn", "cpmg", "xy8"] = "hahn"
    pulses: int = Field(1, ge=0)
    t_max_s: float = Field(0.2, gt=0)
    points: int = Field(201, ge=3)
    order: Literal[1, 2] = 2
    bath_radius_nm: float = Field(10.0, gt=0)
    pair_cutoff_nm: float = Field(3.0, ge=0)
    seeds: int = Field(50, ge=1)
    paramagnetic_density_cm3: float = Field(0.0, ge=0)
    paramagnetic_spins: float = Field(40.0, gt=0)
    paramagnetic_min_radius_nm: float = Field(100.0, gt=0)


class CensusConfig(_Strict):
    F_min: float = Field(0.9, gt=0, le=1)
    T_max_s: float = Field(1.5e-3, gt=0)
    k_max: int = Field(8, ge=0)
    theta_rad: float = Field(1.5707963267948966, gt=0)
    fidelity_model: Literal["crosstalk", "flip"] = "crosstalk"
    a_par_max_hz: Optional[float] = Field(None, gt=0)
    with_records: bool = False


class SweepConfig(_Strict):
    c_min: float = Field(1e-4, gt=0, le=1)
    c_max: float = Field(5e-2, gt=0, le=1)
    points: int = Field(13, ge=1)
    species: Literal["both", "Si", "C"] = "both"

    @model_validator(mode="after")
    def _range(self):
        if self.c_max < self.c_min:
            raise ValueError("c_max must not be below c_min")
        return self


class RegisterConfig(_Strict):
    iterations: int = Field(2, ge=1)
    calibrate: bool = True
    init_target: float = Field(0.93, gt=0.5, le=1)
    bell_target: float = Field(0.81, gt=0.25, le=1)
    p_gate: float = Field(0.0, ge=0, le=1)
    p_dephase: float = Field(0.0, ge=0, le=1)
    reinit_fidelity: float = Field(1.0, ge=0, le=1)
    readout_error: float = Field(0.0, ge=0, le=0.5)
    shots: Optional[int] = Field(None, ge=1)
    a_par_hz: float = Field(13.2e6, gt=0)
    linewidth_hz: float = Field(1e6, gt=0)


class RBConfig(_Strict):
    lengths: list[int] = Field(default_factory=lambda: [1, 100, 300, 600, 1000, 1500, 2200, 3000])
    sequences: int = Field(30, ge=1)
    shots: Optional[int] = Field(2000, ge=1)
    p_depol: float = Field(3.2e-4, ge=0, le=1)
    n_boot: int = Field(200, ge=0)

    @field_validator("lengths")
    @classmethod
    def _lengths(cls, v):
        if len(v) < 3 or min(v) < 1:
            raise ValueError("need at least 3 positive sequence lengths")
        return sorted(set(v))


class RunConfig(_Strict):
    version: Literal[1] = SCHEMA_VERSION
    experiment: Optional[Literal[EXPERIMENTS]] = None
    seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    output: str = "out"
    crystal: CrystalConfig = CrystalConfig()
    isotopes: IsotopeConfig = IsotopeConfig()
    electron: ElectronConfig = ElectronConfig()
    bath: BathConfig = BathConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    coherence: CoherenceConfig = CoherenceConfig()
    census: CensusConfig = CensusConfig()
    sweep: SweepConfig = SweepConfig()
    # "register" would shadow a pydantic method, hence the alias
    register_: RegisterConfig = Field(RegisterConfig(), alias="register")
    rb: RBConfig = RBConfig()

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


def _set_path(tree: dict, dotted: str, value):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def parse_overrides(items) -> dict:
    """``key.sub=value`` strings to a nested dict; values parsed as YAML scalars."""
    out: dict = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        _set_path(out, key.strip(), yaml.safe_load(raw))
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_raw(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError("config file must contain a mapping at top level")
    return data


def build_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    return RunConfig.model_validate(_merge(raw, overrides or {}))


def diagnostics(error: ValidationError) -> list[dict]:
    """Field-level messages from a pydantic error."""
    return [{"field": ".".join(str(p) for p in e["loc"]), "message": e["msg"]} for e in error.errors()]


def validate_file(path, overrides=None) -> list[dict]:
    """Schema and sanity diagnostics for a config file; never raises."""
    try:
        build_config(load_raw(path), parse_overrides(overrides))
    except ValidationError as exc:
        return diagnostics(exc)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        return [{"field": "", "message": str(exc)}]
    return []
