"""Add-delete-swap baseline Metropolis-Hastings sampler.

A proposal picks one of three move classes with probability 1/3 each
(addition of an excluded covariate, deletion of an included one, or a swap),
uniformly within the class.  At the empty model all mass goes to additions
and at the full model all mass goes to deletions; reverse probabilities apply
the same rule evaluated at the proposed model, making the forward/reverse
accounting exact.
"""

from __future__ import annotations

import numpy as np

from .models import EstimatorError, ModelIndicator, log_model_prior


def _log_move_prob(p: int, size_from: int, move: str) -> float:
    """Log probability of proposing one specific model via the given move."""
    n_out = p - size_from
    if size_from == 0:
        # degenerate: additions only
        return -np.log(n_out)
    if size_from == p:
        return -np.log(size_from)
    third = -np.log(3.0)
    if move == "add":
        return third - np.log(n_out)
    if move == "delete":
        return third - np.log(size_from)
    return third - np.log(size_from) - np.log(n_out)


def ads_propose(
    gamma: ModelIndicator, rng: np.random.Generator
) -> tuple[ModelIndicator, float, float]:
    """Draw one add/delete/swap proposal with exact forward/reverse log-probs."""
    p, k = gamma.p, gamma.size
    included = gamma.included
    excluded = np.flatnonzero(gamma.bits == 0)
    if k == 0:
        move = "add"
    elif k == p:
        move = "delete"
    else:
        move = ("add", "delete", "swap")[rng.integers(3)]

    if move == "add":
        j = excluded[rng.integers(excluded.size)]
        gamma_p = gamma.flip(int(j))
        log_rev = _log_move_prob(p, k + 1, "delete")
    elif move == "delete":
        j = included[rng.integers(included.size)]
        gamma_p = gamma.flip(int(j))
        log_rev = _log_move_prob(p, k - 1, "add")
    else:
        j_in = included[rng.integers(included.size)]
        j_out = excluded[rng.integers(excluded.size)]
        gamma_p = gamma.flip(int(j_in)).flip(int(j_out))
        log_rev = _log_move_prob(p, k, "swap")
    log_fwd = _log_move_prob(p, k, move)
    return gamma_p, float(log_fwd), float(log_rev)


def ads_step(state, acceptance, rng: np.random.Generator):
    """One Metropolis-Hastings step with the add-delete-swap proposal.

    Shares the pseudo-marginal discipline of the informed sampler: the stored
    estimate of the current model is never re-evaluated; the proposal is
    scored under the refreshed auxiliary and swapped in on acceptance.
    """
    from .sampler import ChainState, StepInfo  # local import to avoid a cycle

    gamma_p, log_fwd, log_rev = ads_propose(state.gamma, rng)
    aux_p = acceptance.propose_aux(state.aux, rng)
    try:
        res_p = acceptance.evaluate(gamma_p, aux_p, state.g, state.shape_k)
    except EstimatorError:
        return state, StepInfo(alpha=0.0, accepted=False, failed=True, proposed=gamma_p)
    prior = acceptance.prior.with_g(state.g)
    lp_p = log_model_prior(gamma_p, prior)
    log_ratio = (res_p.log_value + lp_p + log_rev) - (
        state.marglik.log_value + state.log_prior + log_fwd
    )
    alpha = float(np.exp(min(0.0, log_ratio)))
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


__all__ = ["ads_propose", "ads_step"]
