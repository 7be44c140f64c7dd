"""Experiment configuration files (TOML) and their normalized echo.

A config has ``[portfolio]``, one ``[[firms]]`` table per firm,
``[diffusion]`` (explicit ``rows`` or ``vols`` + ``rho`` shorthand),
``[engine]``, and optional ``[correlation]`` and ``[calibration]`` tables.
A ``manifest.json`` written by the CLI is accepted as a config too: its
``config`` entry is the normalized echo.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .model import DiffusionMatrix, FirmSpec, PortfolioSpec, diffusion_from_vols


class ConfigError(ValueError):
    pass


ENGINES = ("unif", "euler")


@dataclass
class ExperimentConfig:
    portfolio: PortfolioSpec
    names: list
    engine: str = "unif"
    n_runs: int = 100_000
    seed: int = 20070401
    dt: float = 0.005
    grid_size: int = 512
    workers: int = 1
    horizons: list = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0])
    reference: Optional[str] = None
    calibration: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Normalized config; loading it back reproduces this object (except workers)."""
        p = self.portfolio
        return {
            "portfolio": {
                "horizon": p.horizon,
                "lambda": p.lam,
                "interjump_mean": p.interjump_mean,
                **({"uniform_corr": p.uniform_corr} if p.uniform_corr is not None else {}),
            },
            "firms": [
                {
                    "name": n,
                    "x0": f.x0,
                    "mu": f.mu,
                    "gamma": f.gamma,
                    "ln_kappa": f.kappa_log,
                    "jump_mean": f.jump_mean,
                    "jump_sd": f.jump_sd,
                }
                for n, f in zip(self.names, p.firms)
            ],
            "diffusion": {"rows": p.diffusion.tolist()},
            "engine": {
                "name": self.engine,
                "n_runs": self.n_runs,
                "seed": self.seed,
                "dt": self.dt,
                "grid_size": self.grid_size,
            },
            "correlation": {
                "horizons": list(self.horizons),
                **({"reference": self.reference} if self.reference else {}),
            },
            **({"calibration": dict(self.calibration)} if self.calibration else {}),
        }


def _num(table, key, default=None, kind=float):
    if key not in table:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"'{key}' must be an integer")
        return int(v)
    return float(v)


def _table(raw, key, required=True):
    t = raw.get(key, None)
    if t is None:
        if required:
            raise ConfigError(f"missing [{key}] section")
        return {}
    if not isinstance(t, dict):
        raise ConfigError(f"[{key}] must be a table")
    return t


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        return _parse(raw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse(raw):
    port = _table(raw, "portfolio")
    firms_raw = raw.get("firms")
    if not isinstance(firms_raw, list) or not firms_raw:
        raise ConfigError("need at least one [[firms]] entry")
    firms, names = [], []
    for k, f in enumerate(firms_raw):
        if not isinstance(f, dict):
            raise ConfigError("each [[firms]] entry must be a table")
        names.append(str(f.get("name", f"firm{k + 1}")))
        firms.append(
            FirmSpec(
                x0=_num(f, "x0"),
                mu=_num(f, "mu"),
                kappa_log=_num(f, "ln_kappa", 0.0),
                gamma=_num(f, "gamma", 0.0),
                jump_mean=_num(f, "jump_mean", 0.0),
                jump_sd=_num(f, "jump_sd", 0.0),
            )
        )
    if len(set(names)) != len(names):
        raise ConfigError("firm names must be unique")

    diff = _table(raw, "diffusion")
    if "rows" in diff:
        diffusion = DiffusionMatrix(np.asarray(diff["rows"], dtype=float))
    elif "vols" in diff:
        vols = np.atleast_1d(np.asarray(diff["vols"], dtype=float))
        diffusion = diffusion_from_vols(vols, float(diff.get("rho", 0.0)))
    else:
        raise ConfigError("[diffusion] needs 'rows' or 'vols' (+ 'rho')")

    uc = port.get("uniform_corr")
    portfolio = PortfolioSpec(
        tuple(firms),
        diffusion,
        lam=_num(port, "lambda", 0.0),
        interjump_mean=_num(port, "interjump_mean", 1.0),
        horizon=_num(port, "horizon"),
        uniform_corr=None if uc is None else float(uc),
    )

    eng = _table(raw, "engine", required=False)
    engine = str(eng.get("name", "unif"))
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine '{engine}'")
    cfg = ExperimentConfig(
        portfolio,
        names,
        engine=engine,
        n_runs=_num(eng, "n_runs", 100_000, int),
        seed=_num(eng, "seed", 20070401, int),
        dt=_num(eng, "dt", 0.005),
        grid_size=_num(eng, "grid_size", 512, int),
        workers=_num(eng, "workers", 1, int),
    )
    corr = _table(raw, "correlation", required=False)
    if "horizons" in corr:
        cfg.horizons = [float(h) for h in corr["horizons"]]
    cfg.reference = corr.get("reference")
    cfg.calibration = dict(_table(raw, "calibration", required=False))
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    if cfg.n_runs < 1:
        raise ConfigError("n_runs must be at least 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    if not 0 < cfg.dt <= cfg.portfolio.horizon:
        raise ConfigError("dt must lie in (0, horizon]")
    if cfg.grid_size < 2:
        raise ConfigError("grid_size must be at least 2")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    if any(not 0 < h for h in cfg.horizons):
        raise ConfigError("horizons must be positive")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    if path.suffix == ".json":
        try:
            raw = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if isinstance(raw, dict) and "config" in raw:
            raw = raw["config"]
    else:
        try:
            raw = tomllib.loads(data.decode("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw)
