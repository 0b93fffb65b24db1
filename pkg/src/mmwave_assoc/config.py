"""YAML experiment configuration with validation and defaults.

Schema (every key optional; an empty file gives the defaults)::

    map:      {grid_size: 8, road_length: 200.0, coverage_radius: 300.0}
    radio:    {bandwidth_hz: 1.0e7, tx_power_dbm: 30.0, noise_dbm: -90.0, path_loss_exponent: 3.0}
    mobility: {speed: 15.0, n_ues: 512, horizon: 300.0}   # n_ues may be a list of densities
    sqa:      {epsilon: 3.0, alpha: 0.01, gamma: 1.0, step: null, iterations: 100,
               reward: marginal, rollout: auto, lookahead: 10.0}
    smart:    {theta: 1.2}
    lbh:      {episodes: 20, alpha: 0.1, gamma: 0.9, eps_start: 1.0, eps_end: 0.05, bucket: 25.0}
    oracle:   {tiny_instances: 20, alpha: 0.1, iterations: 500}
    policies: [SQA, SBH, RBH, LBH, SMART]
    seeds:    [0, 1, ..., 9]
    output_dir: results
    quad_dt:  0.5
    scan_dt:  0.1
    workers:  1

``MMW_SEEDS`` (comma-separated) and ``MMW_OUTPUT_DIR`` override ``seeds`` and
``output_dir``.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .policies import POLICY_NAMES, LbhParams, SmartParams, SqaParams
from .radio import RadioParams

ENV_SEEDS = "MMW_SEEDS"
ENV_OUTPUT_DIR = "MMW_OUTPUT_DIR"


@dataclass(frozen=True)
class MapConfig:
    grid_size: int = 8
    road_length: float = 200.0
    coverage_radius: float = 300.0


@dataclass(frozen=True)
class RadioConfig:
    bandwidth_hz: float = 1e7
    tx_power_dbm: float = 30.0
    noise_dbm: float = -90.0
    path_loss_exponent: float = 3.0


@dataclass(frozen=True)
class MobilityConfig:
    speed: float = 15.0
    n_ues: tuple[int, ...] = (512,)
    horizon: float = 300.0


@dataclass(frozen=True)
class SqaConfig:
    epsilon: float = 3.0
    alpha: float = 0.01
    gamma: float = 1.0
    step: int | None = None
    iterations: int = 100
    reward: str = "marginal"
    rollout: str = "auto"
    lookahead: float = 10.0


@dataclass(frozen=True)
class SmartConfig:
    theta: float = 1.2


@dataclass(frozen=True)
class LbhConfig:
    episodes: int = 20
    alpha: float = 0.1
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    bucket: float = 25.0


@dataclass(frozen=True)
class OracleConfig:
    tiny_instances: int = 20
    alpha: float = 0.1
    iterations: int = 500


@dataclass(frozen=True)
class ExperimentConfig:
    map: MapConfig = field(default_factory=MapConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    sqa: SqaConfig = field(default_factory=SqaConfig)
    smart: SmartConfig = field(default_factory=SmartConfig)
    lbh: LbhConfig = field(default_factory=LbhConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    policies: tuple[str, ...] = POLICY_NAMES
    seeds: tuple[int, ...] = tuple(range(10))
    output_dir: str = "results"
    quad_dt: float = 0.5
    scan_dt: float = 0.1
    workers: int = 1

    def radio_params(self) -> RadioParams:
        r = self.radio
        return RadioParams.from_dbm(r.bandwidth_hz, r.tx_power_dbm, r.path_loss_exponent, r.noise_dbm,
                                    self.map.coverage_radius)

    def sqa_params(self, seed: int) -> SqaParams:
        return SqaParams(seed=policy_seed(seed, "SQA"), **vars(self.sqa))

    def smart_params(self) -> SmartParams:
        return SmartParams(self.smart.theta)

    def lbh_params(self, seed: int) -> LbhParams:
        return LbhParams(seed=policy_seed(seed, "LBH"), **vars(self.lbh))


def policy_seed(seed: int, name: str) -> int:
    """Stable per-policy seed; independent of Python's hash randomisation."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


_SECTIONS = {"map": MapConfig, "radio": RadioConfig, "mobility": MobilityConfig, "sqa": SqaConfig,
             "smart": SmartConfig, "lbh": LbhConfig, "oracle": OracleConfig}


def _section(name: str, cls, raw) -> object:
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {', '.join(unknown)}")
    return cls(**raw)


def from_dict(raw: dict | None) -> ExperimentConfig:
    raw = dict(raw or {})
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    kwargs = {}
    try:
        for name, cls in _SECTIONS.items():
            kwargs[name] = _section(name, cls, raw.pop(name, None))
        mob = kwargs["mobility"]
        n = mob.n_ues
        kwargs["mobility"] = replace(mob, n_ues=tuple(int(v) for v in (n if isinstance(n, (list, tuple)) else [n])))
        if "policies" in raw:
            kwargs["policies"] = tuple(str(p).upper() for p in raw.pop("policies"))
        if "seeds" in raw:
            kwargs["seeds"] = tuple(int(s) for s in raw.pop("seeds"))
        for key in ("output_dir",):
            if key in raw:
                kwargs[key] = str(raw.pop(key))
        for key in ("quad_dt", "scan_dt"):
            if key in raw:
                kwargs[key] = float(raw.pop(key))
        if "workers" in raw:
            kwargs["workers"] = int(raw.pop("workers"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value: {exc}") from exc
    cfg = ExperimentConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    m, r, mob, s = cfg.map, cfg.radio, cfg.mobility, cfg.sqa
    need(m.grid_size >= 2, "map.grid_size must be >= 2 (a single cell leaves UEs only the map boundary)")
    need(m.road_length > 0, "map.road_length must be positive")
    need(m.coverage_radius > 0, "map.coverage_radius must be positive")
    need(r.bandwidth_hz > 0, "radio.bandwidth_hz must be positive")
    need(r.path_loss_exponent > 0, "radio.path_loss_exponent must be positive")
    need(mob.speed > 0, "mobility.speed must be positive")
    need(mob.horizon > 0, "mobility.horizon must be positive")
    need(len(mob.n_ues) > 0 and all(n >= 1 for n in mob.n_ues), "mobility.n_ues must be >= 1")
    need(s.epsilon > 1, "sqa.epsilon: ε must exceed 1")
    need(0 < s.alpha <= 1, "sqa.alpha must be in (0, 1]")
    need(0 < s.gamma <= 1, "sqa.gamma must be in (0, 1]")
    need(s.step is None or s.step >= 1, "sqa.step must be >= 1 or null")
    need(s.iterations >= 0, "sqa.iterations must be >= 0")
    need(cfg.smart.theta >= 1, "smart.theta must be >= 1")
    need(cfg.lbh.episodes >= 0, "lbh.episodes must be >= 0")
    need(cfg.oracle.tiny_instances >= 0, "oracle.tiny_instances must be >= 0")
    need(cfg.quad_dt > 0 and cfg.scan_dt > 0, "quad_dt and scan_dt must be positive")
    need(cfg.workers >= 1, "workers must be >= 1")
    bad = [p for p in cfg.policies if p not in POLICY_NAMES]
    need(not bad, f"unknown policies: {', '.join(bad)}")
    try:
        cfg.sqa_params(0)
        cfg.lbh_params(0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def apply_env(cfg: ExperimentConfig, env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    if env.get(ENV_SEEDS):
        try:
            seeds = tuple(int(s) for s in env[ENV_SEEDS].split(",") if s.strip())
        except ValueError as exc:
            raise ConfigError(f"{ENV_SEEDS} must be comma-separated integers") from exc
        cfg = replace(cfg, seeds=seeds)
    if env.get(ENV_OUTPUT_DIR):
        cfg = replace(cfg, output_dir=env[ENV_OUTPUT_DIR])
    return cfg


def parse_config(path, env=None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {p}: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"config {p} must be a mapping at top level")
    return apply_env(from_dict(raw), env)
