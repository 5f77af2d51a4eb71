"""Within-chain random-walk updates for the slab scale g and the Weibull shape.

Both moves are Gaussian random walks on a log scale whose proposal variance
is adapted with a diminishing Robbins-Monro step toward a target acceptance
rate, and both treat the marginal-likelihood value supplied by the caller as
the (possibly estimated) likelihood of the hyper-parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimators import MarglikResult
from .models import EstimatorError


@dataclass(frozen=True)
class AdaptiveRwState:
    """Log-variance of a random-walk proposal with its adaptation counter."""

    log_variance: float = 0.0
    target_accept: float = 0.234
    iteration: int = 0

    @property
    def variance(self) -> float:
        return float(np.exp(self.log_variance))

    def adapted(self, alpha: float) -> "AdaptiveRwState":
        i = self.iteration + 1
        return AdaptiveRwState(
            log_variance=self.log_variance + i**-0.7 * (alpha - self.target_accept),
            target_accept=self.target_accept,
            iteration=i,
        )


@dataclass
class HyperUpdate:
    value: float
    marglik: MarglikResult | None
    accepted: bool
    alpha: float
    rw: AdaptiveRwState
    failed: bool


def log_half_cauchy_sq(g: float) -> float:
    """Density of nu = log g induced by a standard half-Cauchy prior on sqrt(g).

    p_nu(g) = (1/pi) sqrt(g) / (1 + g); integrates to one over nu in R.
    """
    return float(-np.log(np.pi) + 0.5 * np.log(g) - np.log1p(g))


def _accept_prob(log_ratio: float) -> float:
    return float(np.exp(min(0.0, log_ratio)))


def update_g(
    g: float,
    current_log_marglik: float,
    propose_fn: Callable[[float], MarglikResult],
    rw: AdaptiveRwState,
    rng: np.random.Generator,
) -> HyperUpdate:
    """Random-walk move on nu = log g under the half-Cauchy hyper-prior.

    ``propose_fn(g')`` must evaluate the marginal likelihood at the proposed
    scale with the chain's held auxiliary variables (common random numbers),
    so the ratio against ``current_log_marglik`` is coherent.  Estimator
    failures reject the move but still feed the adaptation.
    """
    z = rng.standard_normal()
    g_new = float(g * np.exp(np.sqrt(rw.variance) * z))
    failed = False
    res = None
    alpha = 0.0
    try:
        res = propose_fn(g_new)
        log_ratio = (
            res.log_value + log_half_cauchy_sq(g_new)
            - current_log_marglik - log_half_cauchy_sq(g)
        )
        alpha = _accept_prob(log_ratio)
    except EstimatorError:
        failed = True
    accepted = (not failed) and (rng.random() < alpha)
    return HyperUpdate(
        value=g_new if accepted else float(g),
        marglik=res if accepted else None,
        accepted=accepted,
        alpha=alpha,
        rw=rw.adapted(alpha),
        failed=failed,
    )


def update_weibull_shape(
    shape_k: float,
    sigma_k_sq: float,
    current_log_marglik: float,
    propose_fn: Callable[[float], MarglikResult],
    rw: AdaptiveRwState,
    rng: np.random.Generator,
) -> HyperUpdate:
    """Random-walk move on s = log k with a N(0, sigma_k^2) prior on s."""
    s = float(np.log(shape_k))
    z = rng.standard_normal()
    s_new = s + float(np.sqrt(rw.variance)) * z
    k_new = float(np.exp(s_new))
    failed = False
    res = None
    alpha = 0.0
    try:
        res = propose_fn(k_new)
        log_ratio = (
            res.log_value - 0.5 * s_new**2 / sigma_k_sq
            - current_log_marglik + 0.5 * s**2 / sigma_k_sq
        )
        alpha = _accept_prob(log_ratio)
    except EstimatorError:
        failed = True
    accepted = (not failed) and (rng.random() < alpha)
    return HyperUpdate(
        value=k_new if accepted else float(shape_k),
        marglik=res if accepted else None,
        accepted=accepted,
        alpha=alpha,
        rw=rw.adapted(alpha),
        failed=failed,
    )


__all__ = ["AdaptiveRwState", "HyperUpdate", "log_half_cauchy_sq", "update_g", "update_weibull_shape"]
