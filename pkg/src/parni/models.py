"""Models, priors, and likelihood derivatives shared by every estimator and sampler.

Likelihood kinds:

* ``logistic``  binary outcomes with a logit link.
* ``cox``       Cox proportional hazards through the partial likelihood,
                with the Breslow convention for tied event times.
* ``weibull``   Weibull survival regression with shape parameter ``k``.
* ``gaussian``  unit-variance Gaussian responses.  The log-likelihood is
                exactly quadratic in the linear predictor, which makes this
                kind a convenient surrogate for validating Newton and
                Laplace code paths.

Every derivative is taken with respect to the linear predictor
``eta = Z @ alpha + X[:, included] @ beta`` so all estimators can share the
same weighted least-squares building blocks: ``ytilde`` is the negated first
derivative of the log-likelihood in ``eta`` and ``W`` the negated second
derivative (diagonal for logistic/weibull/gaussian, dense for cox).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, expit

KINDS = ("logistic", "cox", "weibull", "gaussian")
SURVIVAL_KINDS = ("cox", "weibull")

# Exponent cap keeping exp() finite; only reachable far outside the region
# any line search accepts.
_EXP_CAP = 700.0


class EstimatorError(Exception):
    """Base class for recoverable numerical failures inside estimators."""


class NotPositiveDefiniteError(EstimatorError):
    """A matrix that must be symmetric positive definite failed to factor."""


class NoConvergenceError(EstimatorError):
    """An inner optimisation did not reach its gradient tolerance."""


# ---------------------------------------------------------------------------
# Model indicator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelIndicator:
    """Binary inclusion vector with its cached index list and size."""

    bits: np.ndarray
    included: np.ndarray
    size: int

    @staticmethod
    def from_bits(bits) -> "ModelIndicator":
        b = np.ascontiguousarray(np.asarray(bits, dtype=np.uint8))
        if b.ndim != 1 or b.size < 1:
            raise ValueError("model indicator must be a non-empty 1-d vector")
        if np.any(b > 1):
            raise ValueError("model indicator entries must be 0 or 1")
        b.setflags(write=False)
        inc = np.flatnonzero(b)
        inc.setflags(write=False)
        return ModelIndicator(bits=b, included=inc, size=int(inc.size))

    @staticmethod
    def empty(p: int) -> "ModelIndicator":
        return ModelIndicator.from_bits(np.zeros(p, dtype=np.uint8))

    @staticmethod
    def full(p: int) -> "ModelIndicator":
        return ModelIndicator.from_bits(np.ones(p, dtype=np.uint8))

    @staticmethod
    def from_included(p: int, included) -> "ModelIndicator":
        bits = np.zeros(p, dtype=np.uint8)
        bits[np.asarray(included, dtype=int)] = 1
        return ModelIndicator.from_bits(bits)

    @property
    def p(self) -> int:
        return int(self.bits.size)

    def flip(self, j: int) -> "ModelIndicator":
        bits = self.bits.copy()
        bits[j] ^= 1
        return ModelIndicator.from_bits(bits)

    def key(self) -> bytes:
        return self.bits.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, ModelIndicator) and np.array_equal(self.bits, other.bits)


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorConfig:
    """Coefficient and model-prior settings.

    ``g`` is the slab variance of the free-covariate coefficients.  With
    ``hierarchical_g=True`` the value stored here is only the chain's initial
    state and a half-Cauchy hyper-prior on sqrt(g) is sampled within the
    chain.  Exactly one of ``h`` (fixed prior inclusion probability) or
    ``beta_binomial=(a, b)`` must be given.  ``sigma_k_sq`` is the prior
    variance of log(shape) and is only read by the Weibull model.
    """

    g: float
    sigma_alpha_sq: float = 1.0
    h: float | None = None
    beta_binomial: tuple[float, float] | None = None
    sigma_k_sq: float = 1.0
    hierarchical_g: bool = False

    def __post_init__(self):
        if not (self.g > 0):
            raise ValueError("slab variance g must be positive")
        if not (self.sigma_alpha_sq > 0):
            raise ValueError("sigma_alpha_sq must be positive")
        if not (self.sigma_k_sq > 0):
            raise ValueError("sigma_k_sq must be positive")
        if (self.h is None) == (self.beta_binomial is None):
            raise ValueError("exactly one of h or beta_binomial must be set")
        if self.h is not None and not (0.0 < self.h < 1.0):
            raise ValueError("h must lie strictly inside (0, 1)")
        if self.beta_binomial is not None:
            a, b = self.beta_binomial
            if not (a > 0 and b > 0):
                raise ValueError("beta_binomial parameters must be positive")

    def with_g(self, g: float) -> "PriorConfig":
        return PriorConfig(
            g=float(g),
            sigma_alpha_sq=self.sigma_alpha_sq,
            h=self.h,
            beta_binomial=self.beta_binomial,
            sigma_k_sq=self.sigma_k_sq,
            hierarchical_g=self.hierarchical_g,
        )


def prior_variance_diag(prior: PriorConfig, q: int, p_gamma: int) -> np.ndarray:
    """Diagonal of the coefficient prior covariance for a q + p_gamma vector."""
    return np.concatenate(
        [np.full(q, prior.sigma_alpha_sq), np.full(p_gamma, prior.g)]
    )


def log_model_prior(gamma: ModelIndicator, prior: PriorConfig) -> float:
    """log p(gamma) under the fixed-h or Beta-binomial model prior."""
    p, k = gamma.p, gamma.size
    if prior.h is not None:
        return k * np.log(prior.h) + (p - k) * np.log1p(-prior.h)
    a, b = prior.beta_binomial
    return float(betaln(a + k, b + p - k) - betaln(a, b))


def log_coeff_prior(theta: np.ndarray, gamma: ModelIndicator, prior: PriorConfig) -> float:
    """Gaussian log-density of (alpha, beta_gamma) under the block-diagonal prior."""
    theta = np.asarray(theta, dtype=float)
    q = theta.size - gamma.size
    if q < 0:
        raise ValueError("theta shorter than the number of included covariates")
    v = prior_variance_diag(prior, q, gamma.size)
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * v) + theta**2 / v))


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardization:
    """Column centring/scaling applied to X at construction time."""

    mean: np.ndarray
    scale: np.ndarray


@dataclass(frozen=True)
class CoxRiskSets:
    """Sorted-time structures for partial-likelihood evaluation.

    The observations are sorted by ascending time once; all risk-set sums are
    suffix sums in that order.  ``group_start``/``group_size`` describe each
    distinct event time (Breslow multiplicities); ``groups_upto[s]`` counts
    the event groups whose time is <= the time at sorted position ``s``.
    """

    order: np.ndarray
    group_start: np.ndarray
    group_size: np.ndarray
    groups_upto: np.ndarray
    event_idx: np.ndarray  # original-order indices of events


def _build_cox_risk_sets(time: np.ndarray, event: np.ndarray) -> CoxRiskSets:
    order = np.argsort(time, kind="stable")
    ts = time[order]
    ds = event[order].astype(float)
    starts = np.flatnonzero(np.r_[True, ts[1:] != ts[:-1]])
    block_id = np.cumsum(np.r_[True, ts[1:] != ts[:-1]]) - 1
    events_per_block = np.add.reduceat(ds, starts)
    has_event = events_per_block > 0
    group_start = starts[has_event]
    group_size = events_per_block[has_event]
    groups_by_block = np.cumsum(has_event)
    groups_upto = groups_by_block[block_id]
    return CoxRiskSets(
        order=order,
        group_start=group_start,
        group_size=group_size,
        groups_upto=groups_upto,
        event_idx=np.flatnonzero(event),
    )


@dataclass(frozen=True)
class Dataset:
    """Immutable data bundle: free design X, fixed design Z, and responses.

    ``y`` is set for logistic/gaussian kinds; ``time``/``event`` for the
    survival kinds.  ``standardization`` records the centring/scaling applied
    to X (Z is never standardized).  Safe to share across chains.
    """

    kind: str
    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray | None = None
    time: np.ndarray | None = None
    event: np.ndarray | None = None
    names: tuple[str, ...] = ()
    standardization: Standardization | None = None
    cox: CoxRiskSets | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    @property
    def q(self) -> int:
        return int(self.Z.shape[1])


def build_dataset(
    kind: str,
    X,
    Z=None,
    y=None,
    time=None,
    event=None,
    names=None,
    standardize: bool = True,
) -> Dataset:
    """Validate inputs, optionally standardize X, and freeze a Dataset."""
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("X must be an n x p matrix with n, p >= 1")
    n = X.shape[0]
    Z = np.zeros((n, 0)) if Z is None else np.ascontiguousarray(np.asarray(Z, dtype=float))
    if Z.ndim != 2 or Z.shape[0] != n:
        raise ValueError("Z must share the row count of X")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Z)):
        raise ValueError("design matrices must be finite")

    std = None
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0, ddof=0)
        if np.any(scale == 0):
            j = int(np.flatnonzero(scale == 0)[0])
            raise ValueError(f"free covariate column {j} is constant and cannot be standardized")
        X = (X - mean) / scale
        std = Standardization(mean=mean, scale=scale)

    ydat = tdat = ddat = None
    cox = None
    if kind in ("logistic", "gaussian"):
        if y is None:
            raise ValueError(f"{kind} data require a response vector y")
        ydat = np.asarray(y, dtype=float).ravel()
        if ydat.size != n:
            raise ValueError("y must have length n")
        if kind == "logistic" and not np.all((ydat == 0) | (ydat == 1)):
            raise ValueError("logistic responses must lie in {0, 1}")
    else:
        if time is None or event is None:
            raise ValueError("survival data require time and event vectors")
        tdat = np.asarray(time, dtype=float).ravel()
        ddat = np.asarray(event, dtype=float).ravel()
        if tdat.size != n or ddat.size != n:
            raise ValueError("time and event must have length n")
        if not np.all(tdat > 0):
            raise ValueError("survival times must be strictly positive")
        if not np.all((ddat == 0) | (ddat == 1)):
            raise ValueError("event flags must lie in {0, 1}")
        if kind == "cox":
            cox = _build_cox_risk_sets(tdat, ddat)

    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise ValueError("names must match the number of free covariates")

    X.setflags(write=False)
    Z.setflags(write=False)
    return Dataset(
        kind=kind, X=X, Z=Z, y=ydat, time=tdat, event=ddat,
        names=names, standardization=std, cox=cox,
    )


def design_matrix(data: Dataset, gamma: ModelIndicator) -> np.ndarray:
    """J_gamma = (Z  X_gamma), an n x (q + p_gamma) matrix."""
    if gamma.p != data.p:
        raise ValueError("model indicator length does not match the data")
    return np.hstack([data.Z, data.X[:, gamma.included]])


def linear_predictor(data: Dataset, gamma: ModelIndicator, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    d = data.q + gamma.size
    if theta.size != d:
        raise ValueError(f"theta has length {theta.size}, expected {d}")
    if d == 0:
        return np.zeros(data.n)
    return design_matrix(data, gamma) @ theta


# ---------------------------------------------------------------------------
# Log-likelihoods in eta
# ---------------------------------------------------------------------------


def _check_shape_k(kind: str, shape_k):
    if kind == "weibull":
        if shape_k is None or not (shape_k > 0):
            raise ValueError("weibull likelihood requires a positive shape_k")
    elif shape_k is not None:
        raise ValueError(f"shape_k is only meaningful for the weibull kind, not {kind!r}")


def loglik_eta(data: Dataset, eta: np.ndarray, shape_k: float | None = None) -> float:
    """Log-likelihood of the observed responses at a given linear predictor."""
    _check_shape_k(data.kind, shape_k)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (data.n,):
        raise ValueError("eta must be a length-n vector")
    kind = data.kind
    if kind == "logistic":
        return float(eta @ data.y - np.logaddexp(0.0, eta).sum())
    if kind == "gaussian":
        r = data.y - eta
        return float(-0.5 * (r @ r) - 0.5 * data.n * np.log(2.0 * np.pi))
    if kind == "weibull":
        k = float(shape_k)
        logt = np.log(data.time)
        u = np.exp(np.minimum(k * (eta + logt), _EXP_CAP))
        d = data.event
        return float(
            np.sum(d) * np.log(k) + (k - 1.0) * (d @ logt) + k * (eta @ d) - u.sum()
        )
    rs = data.cox
    shift = eta.max()
    xs = np.exp(eta[rs.order] - shift)
    risk = np.cumsum(xs[::-1])[::-1][rs.group_start]
    return float(
        eta[rs.event_idx].sum() - (np.log(risk) + shift) @ rs.group_size
    )


def loglik_eta_batch(data: Dataset, etas: np.ndarray, shape_k: float | None = None) -> np.ndarray:
    """Row-wise log-likelihood for an m x n matrix of linear predictors."""
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    kind = data.kind
    if kind == "logistic":
        return etas @ data.y - np.logaddexp(0.0, etas).sum(axis=1)
    if kind == "gaussian":
        r = data.y[None, :] - etas
        return -0.5 * np.sum(r * r, axis=1) - 0.5 * data.n * np.log(2.0 * np.pi)
    if kind == "weibull":
        k = float(shape_k)
        logt = np.log(data.time)
        u = np.exp(np.minimum(k * (etas + logt[None, :]), _EXP_CAP))
        d = data.event
        const = float(np.sum(d) * np.log(k) + (k - 1.0) * np.sum(d * logt))
        return const + k * (etas @ d) - u.sum(axis=1)
    # cox partial likelihood, Breslow ties; shift-invariant so centre each row
    rs = data.cox
    shift = etas.max(axis=1, keepdims=True)
    xs = np.exp(etas[:, rs.order] - shift)
    suffix = np.cumsum(xs[:, ::-1], axis=1)[:, ::-1]
    risk = suffix[:, rs.group_start]
    ll_events = etas[:, rs.event_idx].sum(axis=1)
    return ll_events - ((np.log(risk) + shift) * rs.group_size[None, :]).sum(axis=1)


def log_likelihood(
    data: Dataset,
    gamma: ModelIndicator,
    theta: np.ndarray,
    shape_k: float | None = None,
) -> float:
    """Log-likelihood of the selected model at coefficient vector theta."""
    return loglik_eta(data, linear_predictor(data, gamma, theta), shape_k)


# ---------------------------------------------------------------------------
# Derivatives with respect to eta
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoxCurvature:
    """Structured partial-likelihood curvature W = sum_e m_e (diag(pi_e) - pi_e pi_e').

    Never materialises the dense n x n matrix on the hot paths: with the
    observations in sorted-time order, every product against W reduces to
    suffix cumulative sums, so W @ M and J' W J cost O(n d) instead of
    O(n^2 d).
    """

    order: np.ndarray          # ascending-time permutation
    xs: np.ndarray             # exp(eta - shift) in sorted order
    a_pos: np.ndarray          # sum_{e <= position} m_e / S_e
    rg: np.ndarray             # per event group: m_e / S_e^2
    group_start: np.ndarray
    groups_upto: np.ndarray

    def weighted(self, M: np.ndarray) -> np.ndarray:
        """W @ M for an n x d matrix M in original observation order."""
        Ms = M[self.order]
        xm = self.xs[:, None] * Ms
        B = np.cumsum(xm[::-1], axis=0)[::-1][self.group_start]
        P = np.vstack([np.zeros((1, Ms.shape[1])), np.cumsum(self.rg[:, None] * B, axis=0)])
        out_sorted = self.xs[:, None] * (self.a_pos[:, None] * Ms - P[self.groups_upto])
        out = np.empty_like(out_sorted)
        out[self.order] = out_sorted
        return out

    def quad(self, J: np.ndarray) -> np.ndarray:
        Js = J[self.order]
        term1 = (Js * (self.xs * self.a_pos)[:, None]).T @ Js
        B = np.cumsum((self.xs[:, None] * Js)[::-1], axis=0)[::-1][self.group_start]
        return term1 - (B * self.rg[:, None]).T @ B

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.weighted(v[:, None])[:, 0]

    def dense(self) -> np.ndarray:
        n = self.order.size
        r2 = np.concatenate([[0.0], np.cumsum(self.rg)])
        q_min = r2[np.minimum.outer(self.groups_upto, self.groups_upto)]
        w_sorted = np.diag(self.xs * self.a_pos) - np.outer(self.xs, self.xs) * q_min
        W = np.empty((n, n))
        W[np.ix_(self.order, self.order)] = w_sorted
        return W


@dataclass
class GlmDerivatives:
    """Negated first/second derivatives of the log-likelihood in eta.

    ``w_diag`` holds the curvature diagonal for the kinds whose Hessian in
    eta is diagonal; ``w_cox`` holds the structured curvature of the cox
    partial likelihood.  Exactly one of the two is set.
    """

    ytilde: np.ndarray
    w_diag: np.ndarray | None = None
    w_cox: CoxCurvature | None = None
    _response: np.ndarray | None = None

    def weighted(self, J: np.ndarray) -> np.ndarray:
        """W @ J without materialising W."""
        if self.w_diag is not None:
            return J * self.w_diag[:, None]
        return self.w_cox.weighted(J)

    def quad(self, J: np.ndarray) -> np.ndarray:
        """J^T W J."""
        if self.w_diag is not None:
            return J.T @ (J * self.w_diag[:, None])
        return self.w_cox.quad(J)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self.w_diag is not None:
            return self.w_diag * v
        return self.w_cox.matvec(v)

    def dense(self) -> np.ndarray:
        if self.w_diag is not None:
            return np.diag(self.w_diag)
        return self.w_cox.dense()

    def working_response(self, eta: np.ndarray) -> np.ndarray:
        """W eta - ytilde, cached: it does not depend on the model being scored."""
        if self._response is None:
            self._response = self.matvec(eta) - self.ytilde
        return self._response


def eta_derivatives(data: Dataset, eta: np.ndarray, shape_k: float | None = None) -> GlmDerivatives:
    """ytilde_i = -dl/deta_i and W_il = -d^2 l / deta_i deta_l at the given eta."""
    _check_shape_k(data.kind, shape_k)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (data.n,):
        raise ValueError("eta must be a length-n vector")
    kind = data.kind
    if kind == "logistic":
        mu = expit(eta)
        return GlmDerivatives(ytilde=mu - data.y, w_diag=mu * (1.0 - mu))
    if kind == "gaussian":
        return GlmDerivatives(ytilde=eta - data.y, w_diag=np.ones(data.n))
    if kind == "weibull":
        k = float(shape_k)
        u = np.exp(np.minimum(k * (eta + np.log(data.time)), _EXP_CAP))
        return GlmDerivatives(ytilde=k * (u - data.event), w_diag=k * k * u)
    # cox: pi_ej = exp(eta_j) / risk-sum_e for j in the risk set of event group e;
    # grad_j = d_j - sum_e m_e pi_ej, curvature = sum_e m_e (diag(pi_e) - pi_e pi_e^T)
    rs = data.cox
    n = data.n
    shift = eta.max()
    xs = np.exp(eta[rs.order] - shift)
    suffix = np.cumsum(xs[::-1])[::-1]
    risk = suffix[rs.group_start]
    r1 = np.concatenate([[0.0], np.cumsum(rs.group_size / risk)])
    a_pos = r1[rs.groups_upto]
    ytilde = np.zeros(n)
    ytilde[rs.order] = xs * a_pos
    ytilde -= np.asarray(data.event, dtype=float)
    curv = CoxCurvature(
        order=rs.order,
        xs=xs,
        a_pos=a_pos,
        rg=rs.group_size / risk**2,
        group_start=rs.group_start,
        groups_upto=rs.groups_upto,
    )
    return GlmDerivatives(ytilde=ytilde, w_cox=curv)
