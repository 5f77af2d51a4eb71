"""Configuration files, CSV ingestion, and CSV output for the batch harness.

Configs are flat ``key = value`` text files (``#`` starts a comment).  Input
data are UTF-8 comma-separated files with a header row naming every column;
the schema keys ``response``/``time``/``event``/``fixed``/``free`` select
columns by name (``free = *`` takes every column not otherwise used).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .models import Dataset, build_dataset


class ConfigError(Exception):
    """Invalid or inconsistent run configuration (exit code 2)."""


class DataError(Exception):
    """Invalid input data file (exit code 3)."""


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------


def read_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _as_bool(key: str, value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _as_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def _as_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def _as_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


@dataclass
class RunConfig:
    """Fully resolved harness configuration."""

    mode: str = "run"  # run | enumerate | simulate
    kind: str = "logistic"
    # data ingestion
    data: str | None = None
    response: str = "y"
    time: str = "time"
    event: str = "event"
    fixed: list[str] = field(default_factory=list)
    free: list[str] = field(default_factory=lambda: ["*"])
    standardize: bool = True
    # simulation
    sim: bool = False
    sim_n: int = 500
    sim_p: int = 200
    sim_rho: float = 0.6
    sim_sigma: float = 0.8
    sim_q_shape: float = -2.0
    sim_censoring: str = "quantile"
    sim_censor_quantile: float = 0.7
    sim_seed: int | None = None
    # prior
    g: float = 1.0
    hierarchical_g: bool = False
    sigma_alpha_sq: float = 100.0
    h: float | None = None
    beta_binomial: tuple[float, float] | None = None
    sigma_k_sq: float = 1.0
    # sampler
    sampler: str = "parni"
    proposal: str = "adaptive-ala"
    acceptance: str = "cpm"
    iters: int = 10_000
    burn_in: int | None = None
    thin: int = 1
    chains: int = 1
    seed: int = 0
    budget_seconds: float | None = None
    thin_to: int = 10_000
    epsilon: float | None = None
    zeta0: float = 0.5
    cpm_samples: int = 64
    cpm_rho: float = 0.99
    cpm_size_cap: int = 100
    update_shape: bool = True
    workers: int = 1
    # reporting
    out: str = "parni-out"
    gold: str = "none"  # none | enumerate | reference:<mult> | <path to pip.csv>
    baseline: str | None = None
    max_enum_p: int = 20

    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return self.iters // 5

    def label(self) -> str:
        return f"{self.sampler}-{self.acceptance}"


_KIND_ALIASES = {"cox-partial": "cox", "coxph": "cox"}


def resolve_run_config(mapping: dict[str, str]) -> RunConfig:
    """Build and validate a RunConfig from raw key=value strings."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for key, value in mapping.items():
        k = key.replace("-", "_")
        if k == "model_prior":
            _parse_model_prior(cfg, value)
            continue
        if k not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        current = getattr(cfg, k)
        if k in ("fixed", "free"):
            setattr(cfg, k, _as_list(value))
        elif k == "g":
            if value.strip().lower() == "hierarchical":
                cfg.hierarchical_g = True
            else:
                cfg.g = _as_float(k, value)
        elif k in ("h",):
            cfg.h = _as_float(k, value)
        elif k in ("burn_in", "sim_seed"):
            setattr(cfg, k, _as_int(k, value))
        elif k in ("budget_seconds", "epsilon"):
            setattr(cfg, k, _as_float(k, value))
        elif isinstance(current, bool):
            setattr(cfg, k, _as_bool(k, value))
        elif isinstance(current, int):
            setattr(cfg, k, _as_int(k, value))
        elif isinstance(current, float):
            setattr(cfg, k, _as_float(k, value))
        else:
            setattr(cfg, k, value)
    cfg.kind = _KIND_ALIASES.get(cfg.kind, cfg.kind)
    _validate_run_config(cfg)
    return cfg


def _parse_model_prior(cfg: RunConfig, value: str) -> None:
    v = value.strip()
    if v.startswith("fixed:"):
        cfg.h = _as_float("model_prior", v.split(":", 1)[1])
        cfg.beta_binomial = None
    elif v.startswith("betabin:"):
        parts = _as_list(v.split(":", 1)[1])
        if len(parts) != 2:
            raise ConfigError("model_prior betabin expects two parameters a,b")
        cfg.beta_binomial = (_as_float("a", parts[0]), _as_float("b", parts[1]))
        cfg.h = None
    else:
        raise ConfigError(f"model_prior must be fixed:<h> or betabin:<a>,<b>, got {value!r}")


def _validate_run_config(cfg: RunConfig) -> None:
    if cfg.mode not in ("run", "enumerate", "simulate"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.kind not in ("logistic", "cox", "weibull"):
        raise ConfigError(f"unknown model kind {cfg.kind!r}")
    if cfg.sampler not in ("parni", "ads"):
        raise ConfigError(f"unknown sampler {cfg.sampler!r}")
    if cfg.acceptance not in ("la", "cpm", "da"):
        raise ConfigError(f"unknown acceptance estimator {cfg.acceptance!r}")
    if cfg.proposal not in ("adaptive-ala", "ala", "la", "da"):
        raise ConfigError(f"unknown proposal estimator {cfg.proposal!r}")
    if "da" in (cfg.acceptance, cfg.proposal) and cfg.kind != "logistic":
        raise ConfigError("data augmentation is only available for logistic models")
    if cfg.h is not None and cfg.beta_binomial is not None:
        raise ConfigError("set either h or a beta-binomial model prior, not both")
    if cfg.mode == "run" and cfg.budget_seconds is None:
        if cfg.iters < 0:
            raise ConfigError("iters must be non-negative")
        if cfg.effective_burn_in() >= max(cfg.iters, 1):
            raise ConfigError("burn_in must be smaller than iters")
    if not cfg.sim and cfg.data is None and cfg.mode != "simulate":
        raise ConfigError("either data=<path> or sim=true must be given")
    if cfg.chains < 1:
        raise ConfigError("chains must be at least 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    width = len(header)
    for i, row in enumerate(body, start=2):
        if len(row) != width:
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {width}")
    return header, body


def _column(path, header, body, name) -> np.ndarray:
    if name not in header:
        raise DataError(f"{path}: missing column {name!r}")
    j = header.index(name)
    out = np.empty(len(body))
    for i, row in enumerate(body):
        cell = row[j].strip()
        try:
            out[i] = float(cell)
        except ValueError as exc:
            raise DataError(
                f"{path}: row {i + 2}, column {name!r}: non-numeric cell {cell!r}"
            ) from exc
    return out


def ingest_csv(path, cfg: RunConfig) -> Dataset:
    """Read, validate, and standardize a dataset per the configured schema."""
    header, body = _read_table(path)
    used: list[str] = []
    if cfg.kind == "logistic":
        y = _column(path, header, body, cfg.response)
        used.append(cfg.response)
        time = event = None
    else:
        time = _column(path, header, body, cfg.time)
        event = _column(path, header, body, cfg.event)
        used += [cfg.time, cfg.event]
        bad = np.flatnonzero(time <= 0)
        if bad.size:
            raise DataError(f"{path}: row {int(bad[0]) + 2}: time must be positive")
        y = None
    fixed_cols = [_column(path, header, body, name) for name in cfg.fixed]
    used += cfg.fixed
    free_names = cfg.free
    if free_names == ["*"]:
        free_names = [h for h in header if h not in used]
    if not free_names:
        raise DataError(f"{path}: no free covariate columns")
    free_cols = [_column(path, header, body, name) for name in free_names]
    X = np.column_stack(free_cols)
    if cfg.standardize:
        scales = X.std(axis=0, ddof=0)
        if np.any(scales == 0):
            j = int(np.flatnonzero(scales == 0)[0])
            raise DataError(f"{path}: free column {free_names[j]!r} is constant")
    Z = np.column_stack(fixed_cols) if fixed_cols else None
    try:
        return build_dataset(
            cfg.kind, X, Z=Z, y=y, time=time, event=event,
            names=free_names, standardize=cfg.standardize,
        )
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    """Shortest exact float representation; keeps outputs bit-reproducible."""
    return format(float(x), ".17g")


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_sim_csv(path, cfg: RunConfig, sim) -> None:
    """Write raw simulated data in the same schema ingest_csv reads."""
    p = sim.X.shape[1]
    names = [f"x{j}" for j in range(p)]
    if cfg.kind == "logistic":
        header = [cfg.response] + names
        rows = [[fmt(sim.y[i])] + [fmt(v) for v in sim.X[i]] for i in range(sim.X.shape[0])]
    else:
        header = [cfg.time, cfg.event] + names
        rows = [
            [fmt(sim.time[i]), fmt(sim.event[i])] + [fmt(v) for v in sim.X[i]]
            for i in range(sim.X.shape[0])
        ]
    write_csv(path, header, rows)


__all__ = [
    "ConfigError",
    "DataError",
    "RunConfig",
    "read_config_file",
    "resolve_run_config",
    "ingest_csv",
    "write_csv",
    "write_sim_csv",
    "fmt",
]
