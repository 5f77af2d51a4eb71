"""Synthetic benchmark data: AR-correlated designs with sparse strong signals.

Design rows are i.i.d. N(0, Sigma) with Sigma_ij = rho^{|i-j|}, generated by
the AR(1) recursion.  Logistic responses are Bernoulli through the logit
link.  Survival times follow an accelerated-failure-time construction
log T = -eta + sigma * w with a generalized-gamma error w (shape parameter
``q_shape``; the q -> 0 limit is standard normal), so larger linear
predictors are hazardous, matching the exponential-hazard convention
lambda = exp(eta).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .models import Dataset, build_dataset

_BETA_HEAD = (2.0, -3.0, 2.0, 2.0, -3.0, 3.0, -2.0, 3.0, -2.0, 3.0)


def default_beta(p: int) -> np.ndarray:
    """Ten strong alternating coefficients followed by zeros."""
    beta = np.zeros(p)
    head = np.asarray(_BETA_HEAD)[: min(p, len(_BETA_HEAD))]
    beta[: head.size] = head
    return beta


@dataclass
class SimConfig:
    n: int
    p: int
    kind: str = "logistic"  # logistic | cox | weibull (survival kinds share the generator)
    ar_rho: float = 0.6
    beta: np.ndarray | None = None
    sigma: float = 0.8
    q_shape: float = -2.0
    censoring: str = "quantile"  # quantile | uniform | none
    censor_quantile: float = 0.7
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be at least 1")
        if not (self.sigma > 0):
            raise ValueError("sigma must be positive")
        if self.censoring not in ("quantile", "uniform", "none"):
            raise ValueError(f"unknown censoring rule {self.censoring!r}")

    def resolved_beta(self) -> np.ndarray:
        if self.beta is None:
            return default_beta(self.p)
        beta = np.asarray(self.beta, dtype=float)
        if beta.size != self.p:
            raise ValueError("beta must have length p")
        return beta


@dataclass
class SimData:
    """Raw (unstandardized) simulated arrays, before Dataset construction."""

    X: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    y: np.ndarray | None = None
    time: np.ndarray | None = None
    event: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def gen_design(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """n x p design with stationary AR(1) columns: x_j = rho x_{j-1} + sqrt(1-rho^2) eps."""
    rho = config.ar_rho
    eps = rng.standard_normal((config.n, config.p))
    X = np.empty((config.n, config.p))
    X[:, 0] = eps[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, config.p):
        X[:, j] = rho * X[:, j - 1] + scale * eps[:, j]
    return X


def generalized_gamma_error(q: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Standard generalized-gamma AFT error: w = log(q^2 G) / q, G ~ Gamma(q^-2, 1).

    At q = 0 (or numerically tiny |q|) this is exactly standard normal.
    """
    if abs(q) < 1e-12:
        return rng.standard_normal(size)
    m = 1.0 / (q * q)
    G = rng.gamma(m, 1.0, size=size)
    return np.log(q * q * G) / q


def simulate(config: SimConfig, rng: np.random.Generator | None = None) -> SimData:
    """Generate raw simulated data for the configured kind."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    X = gen_design(config, rng)
    beta = config.resolved_beta()
    eta = X @ beta
    if config.kind == "logistic":
        y = (rng.random(config.n) < expit(eta)).astype(float)
        return SimData(X=X, beta=beta, eta=eta, y=y)

    w = generalized_gamma_error(config.q_shape, config.n, rng)
    T = np.exp(-eta + config.sigma * w)
    if config.censoring == "none":
        time, event = T, np.ones(config.n)
    elif config.censoring == "quantile":
        c = float(np.quantile(T, config.censor_quantile))
        time = np.minimum(T, c)
        event = (T <= c).astype(float)
    else:
        c_max = 2.0 * float(np.quantile(T, config.censor_quantile))
        C = rng.uniform(0.0, c_max, size=config.n)
        time = np.minimum(T, C)
        event = (T <= C).astype(float)
    return SimData(X=X, beta=beta, eta=eta, time=time, event=event, extras={"latent_time": T})


def to_dataset(sim: SimData, kind: str, standardize: bool = True) -> Dataset:
    if kind == "logistic":
        return build_dataset("logistic", sim.X, y=sim.y, standardize=standardize)
    return build_dataset(kind, sim.X, time=sim.time, event=sim.event, standardize=standardize)


def gen_logistic(config: SimConfig, rng: np.random.Generator | None = None) -> Dataset:
    if config.kind != "logistic":
        raise ValueError("config.kind must be 'logistic'")
    return to_dataset(simulate(config, rng), "logistic", config.standardize)


def gen_survival(config: SimConfig, rng: np.random.Generator | None = None) -> Dataset:
    if config.kind not in ("cox", "weibull"):
        raise ValueError("config.kind must be 'cox' or 'weibull'")
    return to_dataset(simulate(config, rng), config.kind, config.standardize)


def gen_dataset(config: SimConfig, rng: np.random.Generator | None = None) -> Dataset:
    if config.kind == "logistic":
        return gen_logistic(config, rng)
    return gen_survival(config, rng)


__all__ = [
    "SimConfig",
    "SimData",
    "default_beta",
    "gen_design",
    "generalized_gamma_error",
    "simulate",
    "to_dataset",
    "gen_logistic",
    "gen_survival",
    "gen_dataset",
]
