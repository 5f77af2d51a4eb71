"""Dense SPD linear algebra and the Newton/IRLS optimiser used by all estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .models import (
    Dataset,
    GlmDerivatives,
    ModelIndicator,
    NoConvergenceError,
    NotPositiveDefiniteError,
    PriorConfig,
    design_matrix,
    eta_derivatives,
    log_coeff_prior,
    loglik_eta,
    prior_variance_diag,
)


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor of a symmetric positive-definite matrix."""

    chol: np.ndarray
    logdet: float

    @property
    def dim(self) -> int:
        return int(self.chol.shape[0])

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.dim == 0:
            return np.zeros_like(b)
        return cho_solve((self.chol, True), b)

    def solve_lt(self, b: np.ndarray) -> np.ndarray:
        """Solve L^T x = b; maps standard normals to N(0, M^{-1}) draws."""
        if self.dim == 0:
            return np.zeros_like(b)
        return solve_triangular(self.chol, b, trans="T", lower=True)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))


def spd_factor(M: np.ndarray) -> SpdFactor:
    """Cholesky-factor a symmetric matrix, failing if it is not numerically PD."""
    M = np.asarray(M, dtype=float)
    if M.shape != (M.shape[0], M.shape[0]):
        raise ValueError("matrix must be square")
    if M.shape[0] == 0:
        return SpdFactor(chol=np.zeros((0, 0)), logdet=0.0)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return SpdFactor(chol=L, logdet=float(2.0 * np.sum(np.log(np.diag(L)))))


def spd_factor_safe(M: np.ndarray) -> SpdFactor:
    """spd_factor with one diagonal-jitter retry on failure."""
    try:
        return spd_factor(M)
    except NotPositiveDefiniteError:
        M = np.asarray(M, dtype=float)
        jitter = 1e-8 * (1.0 + float(np.max(np.diag(M))) if M.size else 1.0)
        return spd_factor(M + jitter * np.eye(M.shape[0]))


# ---------------------------------------------------------------------------
# Negated log-posterior and its derivatives in theta
# ---------------------------------------------------------------------------


def neg_log_posterior(
    data: Dataset,
    gamma: ModelIndicator,
    prior: PriorConfig,
    theta: np.ndarray,
    shape_k: float | None = None,
    J: np.ndarray | None = None,
) -> float:
    if J is None:
        J = design_matrix(data, gamma)
    eta = J @ theta if theta.size else np.zeros(data.n)
    return -loglik_eta(data, eta, shape_k) - log_coeff_prior(theta, gamma, prior)


def grad_hessian(
    data: Dataset,
    gamma: ModelIndicator,
    prior: PriorConfig,
    theta: np.ndarray,
    shape_k: float | None = None,
    J: np.ndarray | None = None,
    derivs: GlmDerivatives | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of the negated log-posterior at theta."""
    if J is None:
        J = design_matrix(data, gamma)
    if derivs is None:
        eta = J @ theta if theta.size else np.zeros(data.n)
        derivs = eta_derivatives(data, eta, shape_k)
    vinv = 1.0 / prior_variance_diag(prior, data.q, gamma.size)
    grad = J.T @ derivs.ytilde + vinv * theta
    H = derivs.quad(J)
    H[np.diag_indices_from(H)] += vinv
    return grad, H


def newton_one_step(
    data: Dataset,
    gamma: ModelIndicator,
    prior: PriorConfig,
    theta0: np.ndarray,
    shape_k: float | None = None,
    form: str = "direct",
) -> np.ndarray:
    """One Newton step on the negated log-posterior from theta0.

    ``form="direct"`` computes theta0 - H^{-1} grad.  ``form="irls"`` computes
    the algebraically identical weighted-least-squares update
    H^{-1} J^T (W eta0 - ytilde), which never touches theta0 except through
    its linear predictor.
    """
    theta0 = np.asarray(theta0, dtype=float)
    J = design_matrix(data, gamma)
    if theta0.size == 0:
        return theta0.copy()
    eta0 = J @ theta0
    derivs = eta_derivatives(data, eta0, shape_k)
    vinv = 1.0 / prior_variance_diag(prior, data.q, gamma.size)
    H = derivs.quad(J)
    H[np.diag_indices_from(H)] += vinv
    factor = spd_factor(H)
    if form == "direct":
        grad = J.T @ derivs.ytilde + vinv * theta0
        return theta0 - factor.solve(grad)
    if form == "irls":
        rhs = J.T @ (derivs.matvec(eta0) - derivs.ytilde)
        return factor.solve(rhs)
    raise ValueError(f"unknown Newton form {form!r}")


@dataclass
class MapFit:
    """Posterior mode, its negated-Hessian factor, and the fitted predictor."""

    theta: np.ndarray
    hessian: SpdFactor
    eta: np.ndarray
    converged: bool
    n_iter: int


def map_estimate(
    data: Dataset,
    gamma: ModelIndicator,
    prior: PriorConfig,
    theta_init: np.ndarray | None = None,
    shape_k: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
    max_halvings: int = 30,
) -> MapFit:
    """Newton iteration with step halving on the negated log-posterior.

    Stops when the gradient max-norm drops below ``tol``; returns the best
    iterate with ``converged=False`` when the iteration or line-search budget
    runs out.
    """
    J = design_matrix(data, gamma)
    d = J.shape[1]
    if d == 0:
        return MapFit(
            theta=np.zeros(0),
            hessian=SpdFactor(chol=np.zeros((0, 0)), logdet=0.0),
            eta=np.zeros(data.n),
            converged=True,
            n_iter=0,
        )
    theta = np.zeros(d) if theta_init is None else np.asarray(theta_init, dtype=float).copy()
    if theta.size != d:
        raise ValueError(f"theta_init has length {theta.size}, expected {d}")

    vinv = 1.0 / prior_variance_diag(prior, data.q, gamma.size)

    def objective(t):
        with np.errstate(over="ignore"):
            return neg_log_posterior(data, gamma, prior, t, shape_k, J=J)

    f = objective(theta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        derivs = eta_derivatives(data, J @ theta, shape_k)
        grad = J.T @ derivs.ytilde + vinv * theta
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        H = derivs.quad(J)
        H[np.diag_indices_from(H)] += vinv
        step = -spd_factor_safe(H).solve(grad)
        scale = 1.0
        improved = False
        for _ in range(max_halvings + 1):
            cand = theta + scale * step
            fc = objective(cand)
            if np.isfinite(fc) and fc <= f + 1e-12 * (1.0 + abs(f)):
                theta, f = cand, fc
                improved = True
                break
            scale *= 0.5
        if not improved:
            break

    derivs = eta_derivatives(data, J @ theta, shape_k)
    grad = J.T @ derivs.ytilde + vinv * theta
    converged = bool(np.max(np.abs(grad)) < tol)
    H = derivs.quad(J)
    H[np.diag_indices_from(H)] += vinv
    return MapFit(
        theta=theta,
        hessian=spd_factor_safe(H),
        eta=J @ theta,
        converged=converged,
        n_iter=it,
    )


def weibull_null_shape(data: Dataset, log_bounds: tuple[float, float] = (-8.0, 4.0)) -> float:
    """Maximum-likelihood shape of the coefficient-free Weibull model.

    A robust chain initialisation: the null-model shape rescales the time
    axis so curvature evaluations at eta = 0 are well conditioned even when
    observed times span many orders of magnitude.
    """
    from scipy.optimize import minimize_scalar

    if data.kind != "weibull":
        raise ValueError("null-shape initialisation applies to weibull data only")
    zero = np.zeros(data.n)
    res = minimize_scalar(
        lambda s: -loglik_eta(data, zero, float(np.exp(s))),
        bounds=log_bounds,
        method="bounded",
    )
    return float(np.exp(res.x))


__all__ = [
    "SpdFactor",
    "spd_factor",
    "spd_factor_safe",
    "neg_log_posterior",
    "grad_hessian",
    "newton_one_step",
    "MapFit",
    "map_estimate",
    "weibull_null_shape",
    "NoConvergenceError",
    "NotPositiveDefiniteError",
]
