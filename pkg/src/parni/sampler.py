"""PARNI: pointwise adaptive random-neighbourhood informed proposal.

One iteration draws a binary mask selecting which coordinates of the model
indicator may flip, walks those coordinates in random order making a
two-model locally informed choice at each step, and accepts the final model
with a Metropolis-Hastings correction.  The informed choices are driven by a
proposal-side marginal-likelihood estimate that may differ from the
acceptance-side estimate; pseudo-marginal discipline is kept by storing the
accepted model's estimate and never re-evaluating it.

Tuning parameters (flip rates A/D, the non-informative jump probability
zeta, and the running predictor average behind the adaptive estimator) are
updated once per iteration with diminishing steps, so adaptation vanishes
asymptotically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from . import hyper
from .estimators import (
    CpmAuxiliary,
    MarglikResult,
    cpm_refresh,
    da_conditional_logmarglik,
    da_gibbs_sweep,
    log_marglik_adaptive_ala,
    log_marglik_ala,
    log_marglik_cpm,
    log_marglik_la,
    make_cpm_auxiliary,
    warm_start_pips,
)
from .numerics import weibull_null_shape
from .models import (
    Dataset,
    EstimatorError,
    ModelIndicator,
    PriorConfig,
    eta_derivatives,
    log_model_prior,
    loglik_eta,
)
from .polya_gamma import sample_pg1

PROPOSAL_METHODS = ("adaptive-ala", "ala", "la", "da")
ACCEPTANCE_METHODS = ("la", "cpm", "da")


# ---------------------------------------------------------------------------
# Mask and tuning state
# ---------------------------------------------------------------------------


@dataclass
class NeighbourhoodMask:
    """Binary mask of flippable coordinates plus their shuffled visit order."""

    bits: np.ndarray
    active: np.ndarray

    @property
    def size(self) -> int:
        return int(self.active.size)


@dataclass
class TuningState:
    """All adaptive quantities owned by a single chain."""

    pi_warm: np.ndarray
    pi_ergodic: np.ndarray
    pi_hat: np.ndarray
    A: np.ndarray
    D: np.ndarray
    zeta: float
    eta_hat: np.ndarray
    eta_count: int
    iteration: int
    burn_in: int
    epsilon: float


def phi_weight(l: int, burn_in: int) -> float:
    """Warm-start weight: above 1/2 during burn-in, decaying to 0 after."""
    if l <= burn_in:
        return 1.0 - 0.5 * (burn_in - l + 1) ** -0.5
    return 0.5 * (l - burn_in) ** -0.5


def _refresh_rates(tuning: TuningState) -> None:
    eps = tuning.epsilon
    pi = np.clip(tuning.pi_hat, eps, 1.0 - eps)
    odds = pi / (1.0 - pi)
    tuning.A = np.clip(np.minimum(1.0, odds), eps, 1.0 - eps)
    tuning.D = np.clip(np.minimum(1.0, 1.0 / odds), eps, 1.0 - eps)


def init_tuning(
    pi_warm: np.ndarray,
    n: int,
    burn_in: int,
    epsilon: float,
    zeta: float = 0.5,
) -> TuningState:
    eps = float(epsilon)
    if not (0.0 < eps < 0.5):
        raise ValueError("epsilon must lie in (0, 1/2)")
    tuning = TuningState(
        pi_warm=np.asarray(pi_warm, dtype=float).copy(),
        pi_ergodic=np.zeros(pi_warm.shape[0]),
        pi_hat=np.asarray(pi_warm, dtype=float).copy(),
        A=np.empty(pi_warm.shape[0]),
        D=np.empty(pi_warm.shape[0]),
        zeta=float(np.clip(zeta, eps, 1.0 - eps)),
        eta_hat=np.zeros(n),
        eta_count=0,
        iteration=0,
        burn_in=int(burn_in),
        epsilon=eps,
    )
    _refresh_rates(tuning)
    return tuning


def sample_mask(gamma: ModelIndicator, tuning: TuningState, rng: np.random.Generator) -> NeighbourhoodMask:
    """k_j ~ Bernoulli(A_j) off the model, Bernoulli(D_j) on it, random order."""
    probs = np.where(gamma.bits == 1, tuning.D, tuning.A)
    bits = (rng.random(gamma.p) < probs).astype(np.uint8)
    active = rng.permutation(np.flatnonzero(bits))
    return NeighbourhoodMask(bits=bits, active=active)


def log_mask_prob(mask_bits: np.ndarray, gamma: ModelIndicator, tuning: TuningState) -> float:
    """log p(k | gamma) under the product Bernoulli mask distribution."""
    probs = np.where(gamma.bits == 1, tuning.D, tuning.A)
    on = mask_bits == 1
    return float(np.sum(np.log(probs[on])) + np.sum(np.log1p(-probs[~on])))


def update_tuning(
    tuning: TuningState,
    gamma: ModelIndicator,
    alpha_obs: float,
    eta_opt: np.ndarray | None = None,
) -> TuningState:
    """Fold one post-acceptance model into every adaptive quantity."""
    tuning.iteration += 1
    L = tuning.iteration
    tuning.pi_ergodic += (gamma.bits - tuning.pi_ergodic) / L
    phi = phi_weight(L, tuning.burn_in)
    tuning.pi_hat = phi * tuning.pi_warm + (1.0 - phi) * tuning.pi_ergodic
    _refresh_rates(tuning)
    eps = tuning.epsilon
    lz = logit(tuning.zeta) + L**-0.7 * (alpha_obs - 0.234)
    tuning.zeta = float(np.clip(expit(lz), eps, 1.0 - eps))
    if eta_opt is not None:
        tuning.eta_count += 1
        tuning.eta_hat += (eta_opt - tuning.eta_hat) / tuning.eta_count
    return tuning


# ---------------------------------------------------------------------------
# Chain state and estimator plumbing
# ---------------------------------------------------------------------------


@dataclass
class ChainState:
    """Current model with its stored estimate and chain-owned auxiliaries."""

    gamma: ModelIndicator
    marglik: MarglikResult
    log_prior: float
    aux: object | None
    g: float
    shape_k: float | None

    @property
    def log_post(self) -> float:
        return self.marglik.log_value + self.log_prior


class ProposalScorer:
    """Posterior-score oracle for the pointwise proposal, cached per model.

    Scores are log p-hat(y | gamma) + log p(gamma) under the proposal-side
    estimator.  Estimator failures score the failing model at -inf so it is
    never proposed.  With ``memoize=True`` (deterministic estimator, fixed
    hyper-parameters) the cache survives across iterations.
    """

    def __init__(self, method: str, data: Dataset, prior: PriorConfig, memoize: bool = False):
        if method not in PROPOSAL_METHODS:
            raise ValueError(f"unknown proposal estimator {method!r}")
        self.method = method
        self.data = data
        self.prior = prior
        self.memoize = memoize
        self._memo: dict[bytes, float] = {}
        self._cache: dict[bytes, float] = self._memo
        self._g = prior.g
        self._shape_k: float | None = None
        self._omega: np.ndarray | None = None
        self._eta_guess: np.ndarray | None = None
        self._guess_derivs = None
        self._origin_derivs = None
        self._origin_loglik: float | None = None
        self._origin_key: tuple | None = None

    def begin_iteration(
        self,
        g: float,
        shape_k: float | None,
        omega: np.ndarray | None = None,
        eta_guess: np.ndarray | None = None,
    ) -> None:
        self._g = g
        self._shape_k = shape_k
        self._omega = omega
        self._cache = self._memo if self.memoize else {}
        if self.method == "adaptive-ala":
            # the guess is frozen for the iteration, so its curvature is shared
            # by every model scored against it
            self._eta_guess = eta_guess if eta_guess is not None else np.zeros(self.data.n)
            self._guess_derivs = eta_derivatives(self.data, self._eta_guess, shape_k)
        elif self.method == "ala" and self._origin_key != (shape_k,):
            zero = np.zeros(self.data.n)
            self._origin_derivs = eta_derivatives(self.data, zero, shape_k)
            self._origin_loglik = loglik_eta(self.data, zero, shape_k)
            self._origin_key = (shape_k,)

    def score(self, gamma: ModelIndicator) -> float:
        key = gamma.key()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        prior = self.prior.with_g(self._g)
        try:
            value = self._evaluate(gamma, prior) + log_model_prior(gamma, prior)
        except EstimatorError:
            value = -np.inf
        self._cache[key] = value
        return value

    def _evaluate(self, gamma: ModelIndicator, prior: PriorConfig) -> float:
        if self.method == "adaptive-ala":
            return log_marglik_adaptive_ala(
                self.data, gamma, prior, self._eta_guess, self._shape_k,
                guess_derivs=self._guess_derivs,
            ).log_value
        if self.method == "ala":
            theta0 = np.zeros(self.data.q + gamma.size)
            return log_marglik_ala(
                self.data, gamma, prior, theta0, self._shape_k,
                derivs0=self._origin_derivs, loglik0=self._origin_loglik,
            ).log_value
        if self.method == "la":
            return log_marglik_la(self.data, gamma, prior, shape_k=self._shape_k).log_value
        return da_conditional_logmarglik(self.data, gamma, prior, self._omega).log_value

    @property
    def cache(self) -> dict[bytes, float]:
        return self._cache


class AcceptanceEvaluator:
    """Acceptance-side estimator with its per-chain auxiliary management."""

    def __init__(
        self,
        method: str,
        data: Dataset,
        prior: PriorConfig,
        cpm_samples: int = 64,
        cpm_rho: float = 0.99,
        cpm_size_cap: int = 100,
        memoize: bool = False,
    ):
        if method not in ACCEPTANCE_METHODS:
            raise ValueError(f"unknown acceptance estimator {method!r}")
        if method == "da" and data.kind != "logistic":
            raise ValueError("the data-augmentation estimator requires logistic data")
        self.method = method
        self.data = data
        self.prior = prior
        self.cpm_samples = int(cpm_samples)
        self.cpm_rho = float(cpm_rho)
        self.cpm_size_cap = int(cpm_size_cap)
        self.memoize = memoize and method == "la"
        self._memo: dict[bytes, MarglikResult] = {}

    def init_aux(self, rng: np.random.Generator):
        if self.method == "cpm":
            d_max = self.data.q + min(self.cpm_size_cap, self.data.p)
            return make_cpm_auxiliary(self.cpm_samples, d_max, self.cpm_rho, rng)
        if self.method == "da":
            return sample_pg1(np.zeros(self.data.n), rng)
        return None

    def evaluate(
        self,
        gamma: ModelIndicator,
        aux,
        g: float,
        shape_k: float | None,
    ) -> MarglikResult:
        prior = self.prior.with_g(g)
        if self.method == "la":
            if self.memoize:
                hit = self._memo.get(gamma.key())
                if hit is not None:
                    return hit
            res = log_marglik_la(self.data, gamma, prior, shape_k=shape_k)
            if self.memoize:
                self._memo[gamma.key()] = res
            return res
        if self.method == "cpm":
            return log_marglik_cpm(self.data, gamma, prior, aux, shape_k)
        return da_conditional_logmarglik(self.data, gamma, prior, aux)

    def propose_aux(self, aux, rng: np.random.Generator):
        """Auxiliary proposed jointly with a new model (CPM refresh)."""
        if self.method == "cpm":
            return cpm_refresh(aux, rng)
        return aux


# ---------------------------------------------------------------------------
# Pointwise proposal and acceptance
# ---------------------------------------------------------------------------


@dataclass
class ProposalBundle:
    gamma_prime: ModelIndicator
    log_fwd: float
    log_rev: float
    mask: NeighbourhoodMask
    scores: dict[bytes, float]


@dataclass
class StepInfo:
    alpha: float
    accepted: bool
    failed: bool
    proposed: ModelIndicator | None


def pointwise_propose(
    state: ChainState,
    mask: NeighbourhoodMask,
    tuning: TuningState,
    scorer: ProposalScorer,
    rng: np.random.Generator,
) -> ProposalBundle:
    """Walk the masked coordinates, making a balanced two-model choice at each.

    The reverse-path probability visits the same intermediate models in
    reverse coordinate order, so each step's reverse factor is the staying or
    flipping probability conditioned on the step's outcome and can be
    accumulated in place.
    """
    log_zeta_ratio = float(np.log(tuning.zeta) - np.log1p(-tuning.zeta))
    cur = state.gamma
    s_cur = scorer.score(cur)
    log_fwd = 0.0
    log_rev = 0.0
    for j in mask.active:
        flipped = cur.flip(j)
        s_flip = scorer.score(flipped)
        # mask-probability ratio at the flipped coordinate (k_j = 1 there)
        if cur.bits[j] == 1:
            lmr = np.log(tuning.A[j]) - np.log(tuning.D[j])
        else:
            lmr = np.log(tuning.D[j]) - np.log(tuning.A[j])
        log_ratio = (s_flip - s_cur) + lmr
        lw_flip = min(0.0, log_ratio) + log_zeta_ratio
        log_norm = np.logaddexp(0.0, lw_flip)
        if np.log(rng.random()) < lw_flip - log_norm:
            log_fwd += lw_flip - log_norm
            # reverse step conditions on the flipped model and flips back
            lw_back = min(0.0, -log_ratio) + log_zeta_ratio
            log_rev += lw_back - np.logaddexp(0.0, lw_back)
            cur = flipped
            s_cur = s_flip
        else:
            log_fwd += -log_norm
            # reverse step conditions on the same model and stays again
            log_rev += -log_norm
    return ProposalBundle(
        gamma_prime=cur,
        log_fwd=float(log_fwd),
        log_rev=float(log_rev),
        mask=mask,
        scores=scorer.cache,
    )


def mh_accept(
    state: ChainState,
    bundle: ProposalBundle,
    acceptance: AcceptanceEvaluator,
    tuning: TuningState,
    rng: np.random.Generator,
) -> tuple[ChainState, StepInfo]:
    """Metropolis-Hastings correction of the pointwise proposal.

    The stored estimate of the current model is reused (never re-evaluated);
    the proposed model is evaluated under the refreshed auxiliary, and both
    are swapped in on acceptance.  Estimator failures reject the move.
    """
    gamma_p = bundle.gamma_prime
    if gamma_p == state.gamma:
        # Identity path: every factor of the ratio cancels exactly.
        return state, StepInfo(alpha=1.0, accepted=True, failed=False, proposed=gamma_p)
    aux_p = acceptance.propose_aux(state.aux, rng)
    try:
        res_p = acceptance.evaluate(gamma_p, aux_p, state.g, state.shape_k)
    except EstimatorError:
        return state, StepInfo(alpha=0.0, accepted=False, failed=True, proposed=gamma_p)
    prior = acceptance.prior.with_g(state.g)
    lp_p = log_model_prior(gamma_p, prior)
    log_num = res_p.log_value + lp_p + log_mask_prob(bundle.mask.bits, gamma_p, tuning) + bundle.log_rev
    log_den = (
        state.marglik.log_value
        + state.log_prior
        + log_mask_prob(bundle.mask.bits, state.gamma, tuning)
        + bundle.log_fwd
    )
    alpha = float(np.exp(min(0.0, log_num - log_den)))
    if rng.random() < alpha:
        new_state = ChainState(
            gamma=gamma_p,
            marglik=res_p,
            log_prior=lp_p,
            aux=aux_p,
            g=state.g,
            shape_k=state.shape_k,
        )
        return new_state, StepInfo(alpha=alpha, accepted=True, failed=False, proposed=gamma_p)
    return state, StepInfo(alpha=alpha, accepted=False, failed=False, proposed=gamma_p)


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------


@dataclass
class ChainConfig:
    """Everything one chain needs beyond the data, prior, and RNG."""

    n_iter: int
    burn_in: int = 0
    thin: int = 1
    sampler: str = "parni"
    proposal: str = "adaptive-ala"
    acceptance: str = "cpm"
    epsilon: float | None = None
    zeta0: float = 0.5
    cpm_samples: int = 64
    cpm_rho: float = 0.99
    cpm_size_cap: int = 100
    update_shape: bool = True
    shape_k0: float | None = None
    g0: float | None = None
    budget_seconds: float | None = None
    budget_max_iter: int = 10_000_000
    init_included: tuple[int, ...] = ()

    def validate(self, data: Dataset) -> None:
        if self.sampler not in ("parni", "ads"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.proposal not in PROPOSAL_METHODS:
            raise ValueError(f"unknown proposal estimator {self.proposal!r}")
        if self.acceptance not in ACCEPTANCE_METHODS:
            raise ValueError(f"unknown acceptance estimator {self.acceptance!r}")
        if ("da" in (self.proposal, self.acceptance)) and data.kind != "logistic":
            raise ValueError("data augmentation is only available for logistic data")
        if self.n_iter < 0:
            raise ValueError("n_iter must be non-negative")
        if self.budget_seconds is None and self.burn_in >= max(self.n_iter, 1):
            raise ValueError("burn_in must be smaller than n_iter")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")


@dataclass
class ChainOutput:
    """Thinned traces, final inclusion-probability estimates, and counters."""

    models: np.ndarray
    iterations: np.ndarray
    log_post: np.ndarray
    accepted: np.ndarray
    cum_seconds: np.ndarray
    pip: np.ndarray
    n_iter: int
    burn_in: int
    thin: int
    acceptance_rate: float
    estimator_failures: int
    total_seconds: float
    total_cpu_seconds: float
    meta: dict


def run_chain(
    data: Dataset,
    prior: PriorConfig,
    config: ChainConfig,
    rng: np.random.Generator,
) -> ChainOutput:
    """Run one PARNI or add-delete-swap chain and collect its output.

    Per iteration: model move, then the slab-scale update (hierarchical g),
    then the Weibull shape update, then the auxiliary refresh (data
    augmentation) and all tuning updates.  Tuning is frozen for the whole
    model move.
    """
    from .ads import ads_step  # local import to avoid a module cycle

    config.validate(data)
    shape_k = None
    if data.kind == "weibull":
        # default: empty-model shape MLE, which conditions the eta = 0 expansions
        shape_k = config.shape_k0 if config.shape_k0 is not None else weibull_null_shape(data)
    g = float(config.g0 if config.g0 is not None else prior.g)
    epsilon = config.epsilon if config.epsilon is not None else min(0.1 / data.p, 0.1)

    gamma0 = ModelIndicator.from_included(data.p, config.init_included)
    pi_warm = warm_start_pips(data, gamma0, prior.with_g(g), shape_k)
    tuning = init_tuning(pi_warm, data.n, config.burn_in, epsilon, config.zeta0)

    hyper_static = not prior.hierarchical_g and not (data.kind == "weibull" and config.update_shape)
    scorer = ProposalScorer(
        config.proposal, data, prior,
        memoize=hyper_static and config.proposal in ("la", "ala"),
    )
    acceptance = AcceptanceEvaluator(
        config.acceptance, data, prior,
        cpm_samples=config.cpm_samples, cpm_rho=config.cpm_rho,
        cpm_size_cap=config.cpm_size_cap,
        memoize=hyper_static,
    )

    aux = acceptance.init_aux(rng)
    marglik0 = acceptance.evaluate(gamma0, aux, g, shape_k)
    state = ChainState(
        gamma=gamma0,
        marglik=marglik0,
        log_prior=log_model_prior(gamma0, prior.with_g(g)),
        aux=aux,
        g=g,
        shape_k=shape_k,
    )

    rw_g = hyper.AdaptiveRwState() if prior.hierarchical_g else None
    rw_k = hyper.AdaptiveRwState() if (data.kind == "weibull" and config.update_shape) else None

    rec_iters = [0]
    rec_models = [state.gamma.bits.copy()]
    rec_logpost = [state.log_post]
    rec_accept = [1]
    rec_seconds = [0.0]
    pip_acc = np.zeros(data.p)
    pip_count = 0
    n_accept = 0
    failures = 0

    budget = config.budget_seconds
    n_planned = config.n_iter if budget is None else config.budget_max_iter
    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    elapsed = 0.0
    i = 0
    while i < n_planned:
        if budget is not None and elapsed >= budget:
            break
        i += 1
        scorer.begin_iteration(
            g=state.g,
            shape_k=state.shape_k,
            omega=state.aux if config.proposal == "da" else None,
            eta_guess=tuning.eta_hat,
        )
        if config.sampler == "parni":
            mask = sample_mask(state.gamma, tuning, rng)
            bundle = pointwise_propose(state, mask, tuning, scorer, rng)
            state, info = mh_accept(state, bundle, acceptance, tuning, rng)
        else:
            state, info = ads_step(state, acceptance, rng)
        n_accept += int(info.accepted)
        failures += int(info.failed)

        if rw_g is not None:
            upd = hyper.update_g(
                state.g,
                state.marglik.log_value,
                lambda g_new: acceptance.evaluate(state.gamma, state.aux, g_new, state.shape_k),
                rw_g,
                rng,
            )
            rw_g = upd.rw
            failures += int(upd.failed)
            if upd.accepted:
                state.g = upd.value
                state.marglik = upd.marglik
                state.log_prior = log_model_prior(state.gamma, prior.with_g(state.g))
        if rw_k is not None:
            upd = hyper.update_weibull_shape(
                state.shape_k,
                prior.sigma_k_sq,
                state.marglik.log_value,
                lambda k_new: acceptance.evaluate(state.gamma, state.aux, state.g, k_new),
                rw_k,
                rng,
            )
            rw_k = upd.rw
            failures += int(upd.failed)
            if upd.accepted:
                state.shape_k = upd.value
                state.marglik = upd.marglik
        if acceptance.method == "da":
            _, omega_new = da_gibbs_sweep(
                data, state.gamma, prior.with_g(state.g), state.aux, rng
            )
            state.aux = omega_new
            state.marglik = da_conditional_logmarglik(
                data, state.gamma, prior.with_g(state.g), omega_new
            )

        if config.sampler == "parni":
            update_tuning(tuning, state.gamma, info.alpha, eta_opt=state.marglik.eta_hat)
        if i > config.burn_in:
            pip_acc += state.gamma.bits
            pip_count += 1
        elapsed = time.perf_counter() - wall0
        if i % config.thin == 0:
            rec_iters.append(i)
            rec_models.append(state.gamma.bits.copy())
            rec_logpost.append(state.log_post)
            rec_accept.append(int(info.accepted))
            rec_seconds.append(elapsed)

    total_wall = time.perf_counter() - wall0
    total_cpu = time.process_time() - cpu0
    n_done = i
    pip = pip_acc / pip_count if pip_count else state.gamma.bits.astype(float)
    target = "exact" if config.acceptance in ("cpm", "da") else "laplace"
    return ChainOutput(
        models=np.asarray(rec_models, dtype=np.uint8),
        iterations=np.asarray(rec_iters, dtype=np.int64),
        log_post=np.asarray(rec_logpost, dtype=float),
        accepted=np.asarray(rec_accept, dtype=np.uint8),
        cum_seconds=np.asarray(rec_seconds, dtype=float),
        pip=pip,
        n_iter=n_done,
        burn_in=config.burn_in,
        thin=config.thin,
        acceptance_rate=n_accept / n_done if n_done else 1.0,
        estimator_failures=failures,
        total_seconds=total_wall,
        total_cpu_seconds=total_cpu,
        meta={
            "sampler": config.sampler,
            "proposal": config.proposal,
            "acceptance": config.acceptance,
            "target_distribution": target,
            "kind": data.kind,
            "final_g": state.g,
            "final_shape_k": state.shape_k,
        },
    )


__all__ = [
    "NeighbourhoodMask",
    "TuningState",
    "ChainState",
    "ChainConfig",
    "ChainOutput",
    "ProposalScorer",
    "AcceptanceEvaluator",
    "ProposalBundle",
    "StepInfo",
    "phi_weight",
    "init_tuning",
    "sample_mask",
    "log_mask_prob",
    "update_tuning",
    "pointwise_propose",
    "mh_accept",
    "run_chain",
]
