"""Batch command-line front end.

Usage::

    parni CONFIG [--sampler S] [--acceptance A] [--iters N]
                 [--budget-seconds T] [--seed K] [--out DIR] [--set key=value]

CONFIG is a flat key=value text file; every flag overrides the matching key.
The ``mode`` key selects behaviour: ``run`` (default) samples and writes
reports, ``enumerate`` writes the exhaustive posterior, ``simulate`` writes a
synthetic dataset in the ingestible CSV schema.  Exit codes: 0 success,
2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .exact import enumerate_exact
from .io import (
    ConfigError,
    DataError,
    RunConfig,
    fmt,
    ingest_csv,
    read_config_file,
    resolve_run_config,
    write_csv,
    write_sim_csv,
)
from .models import Dataset, PriorConfig
from .report import thin_to_count, write_report
from .sampler import ChainConfig, ChainOutput, run_chain
from .simulate import SimConfig, gen_dataset, simulate


def build_prior(cfg: RunConfig, p: int) -> PriorConfig:
    h = cfg.h
    bb = cfg.beta_binomial
    if h is None and bb is None:
        h = min(10.0 / p, 0.5)
    return PriorConfig(
        g=cfg.g,
        sigma_alpha_sq=cfg.sigma_alpha_sq,
        h=h,
        beta_binomial=bb,
        sigma_k_sq=cfg.sigma_k_sq,
        hierarchical_g=cfg.hierarchical_g,
    )


def sim_config(cfg: RunConfig) -> SimConfig:
    return SimConfig(
        n=cfg.sim_n,
        p=cfg.sim_p,
        kind=cfg.kind,
        ar_rho=cfg.sim_rho,
        sigma=cfg.sim_sigma,
        q_shape=cfg.sim_q_shape,
        censoring=cfg.sim_censoring,
        censor_quantile=cfg.sim_censor_quantile,
        seed=cfg.sim_seed if cfg.sim_seed is not None else cfg.seed,
        standardize=cfg.standardize,
    )


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.sim:
        return gen_dataset(sim_config(cfg))
    if cfg.data is None:
        raise ConfigError("no data source: set data=<path> or sim=true")
    return ingest_csv(cfg.data, cfg)


def chain_config(cfg: RunConfig) -> ChainConfig:
    return ChainConfig(
        n_iter=cfg.iters,
        burn_in=cfg.effective_burn_in(),
        thin=cfg.thin,
        sampler=cfg.sampler,
        proposal=cfg.proposal,
        acceptance=cfg.acceptance,
        epsilon=cfg.epsilon,
        zeta0=cfg.zeta0,
        cpm_samples=cfg.cpm_samples,
        cpm_rho=cfg.cpm_rho,
        cpm_size_cap=cfg.cpm_size_cap,
        update_shape=cfg.update_shape,
        g0=cfg.g,
        budget_seconds=cfg.budget_seconds,
    )


def _run_one(args) -> ChainOutput:
    data, prior, ccfg, seed_seq = args
    return run_chain(data, prior, ccfg, np.random.default_rng(seed_seq))


def run_chains(data: Dataset, prior: PriorConfig, cfg: RunConfig) -> list[ChainOutput]:
    ccfg = chain_config(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    jobs = [(data, prior, ccfg, s) for s in seeds]
    if cfg.workers > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.chains)) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def resolve_gold(cfg: RunConfig, data: Dataset, prior: PriorConfig) -> np.ndarray | None:
    spec = cfg.gold.strip()
    if spec == "none" or not spec:
        return None
    if spec == "enumerate":
        shape_k = 1.0 if cfg.kind == "weibull" else None
        return enumerate_exact(data, prior, shape_k=shape_k, max_p=cfg.max_enum_p).pip
    if spec.startswith("reference:"):
        mult = max(1, int(float(spec.split(":", 1)[1])))
        ref_cfg = chain_config(cfg)
        ref_cfg.n_iter = cfg.iters * mult
        ref_cfg.burn_in = cfg.effective_burn_in() * mult
        if ref_cfg.budget_seconds is not None:
            ref_cfg.budget_seconds = ref_cfg.budget_seconds * mult
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(cfg.chains + 1)[-1])
        return run_chain(data, prior, ref_cfg, rng).pip
    return _read_gold_csv(spec)


def _read_gold_csv(path) -> np.ndarray:
    import csv as _csv

    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(_csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read gold file {path}: {exc}") from exc
    if not rows or "mean" not in rows[0]:
        raise DataError(f"{path}: expected a pip.csv-style file with a 'mean' column")
    j = rows[0].index("mean")
    try:
        return np.asarray([float(r[j]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed gold PIP file: {exc}") from exc


def _mode_run(cfg: RunConfig) -> int:
    data = load_dataset(cfg)
    prior = build_prior(cfg, data.p)
    outputs = run_chains(data, prior, cfg)
    if cfg.budget_seconds is not None:
        outputs = [thin_to_count(o, cfg.thin_to) for o in outputs]
    gold = resolve_gold(cfg, data, prior)
    labels = [cfg.label()] * len(outputs)
    meta = {
        "mode": cfg.mode, "kind": cfg.kind, "sampler": cfg.sampler,
        "proposal": cfg.proposal, "acceptance": cfg.acceptance,
        "iters": cfg.iters, "burn_in": cfg.effective_burn_in(), "thin": cfg.thin,
        "chains": cfg.chains, "seed": cfg.seed,
        "budget_seconds": cfg.budget_seconds,
        "standardize": cfg.standardize, "g": "hierarchical" if cfg.hierarchical_g else cfg.g,
        "sigma_alpha_sq": cfg.sigma_alpha_sq,
        "model_prior": f"fixed:{cfg.h}" if cfg.h is not None else f"betabin:{cfg.beta_binomial}",
        "data": cfg.data if cfg.data else f"sim(n={cfg.sim_n}, p={cfg.sim_p})",
    }
    write_report(
        cfg.out, outputs, labels=labels, gold=gold,
        baseline=cfg.baseline, names=data.names, metadata=meta,
    )
    return 0


def _mode_enumerate(cfg: RunConfig) -> int:
    data = load_dataset(cfg)
    prior = build_prior(cfg, data.p)
    shape_k = 1.0 if cfg.kind == "weibull" else None
    post = enumerate_exact(data, prior, shape_k=shape_k, max_p=cfg.max_enum_p)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(
        outdir / "exact_pip.csv",
        ["covariate", "pip"],
        [[data.names[j], fmt(post.pip[j])] for j in range(data.p)],
    )
    write_csv(
        outdir / "exact_pmp.csv",
        ["model_index", "log_pmp"],
        [[m, fmt(post.log_pmp[m])] for m in range(post.log_pmp.size)],
    )
    return 0


def _mode_simulate(cfg: RunConfig) -> int:
    sim = simulate(sim_config(cfg))
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_sim_csv(outdir / "data.csv", cfg, sim)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="parni",
        description="Adaptive informed MCMC for Bayesian variable selection.",
    )
    parser.add_argument("config", help="path to a flat key=value configuration file")
    parser.add_argument("--sampler", choices=["parni", "ads"])
    parser.add_argument("--acceptance", choices=["la", "cpm", "da"])
    parser.add_argument("--iters", type=int)
    parser.add_argument("--budget-seconds", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any configuration key",
    )
    args = parser.parse_args(argv)

    try:
        mapping = read_config_file(args.config)
        for flag in ("sampler", "acceptance", "iters", "seed", "out"):
            value = getattr(args, flag)
            if value is not None:
                mapping[flag] = str(value)
        if args.budget_seconds is not None:
            mapping["budget_seconds"] = str(args.budget_seconds)
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            mapping[key.strip()] = value.strip()
        cfg = resolve_run_config(mapping)
        if cfg.mode == "run":
            return _mode_run(cfg)
        if cfg.mode == "enumerate":
            return _mode_enumerate(cfg)
        return _mode_simulate(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
