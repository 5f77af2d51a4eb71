"""Exact sampling from the Polya-gamma distribution PG(1, z).

The sampler follows the alternating-series rejection method for the tilted
Jacobi variable J*(1, |z|/2): mix a truncated inverse-Gaussian proposal on
(0, t] with a truncated exponential proposal on (t, inf), then accept or
reject by bounding the Jacobi series with its partial sums.  A PG(1, z) draw
is the accepted Jacobi draw divided by 4.

Every draw is exact, so Gibbs sweeps built on this sampler target the exact
conditional distributions.  All randomness flows through a caller-supplied
``numpy.random.Generator``; there is no module-level state.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr

# Devroye-style switch point between the small-x and large-x series.
_TRUNC = 0.64
_MAX_SERIES_TERMS = 500
_MAX_REJECTION_ROUNDS = 10_000


def _series_coef(n, x):
    """n-th alternating-series coefficient a_n(x), piecewise in x."""
    x = np.asarray(x, dtype=float)
    half = n + 0.5
    small = np.pi * half * (2.0 / (np.pi * x)) ** 1.5 * np.exp(-2.0 * half * half / x)
    large = np.pi * half * np.exp(-0.5 * half * half * np.pi * np.pi * x)
    return np.where(x <= _TRUNC, small, large)


def _trunc_inverse_gaussian(c: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draws from IG(mu=1/c, lambda=1) truncated to (0, _TRUNC]."""
    out = np.empty(c.shape[0])
    t = _TRUNC

    # mu > t: propose from the c=0 (one-sided stable) kernel, thin by the tilt.
    small_c = np.flatnonzero(c < 1.0 / t)
    pending = small_c
    rounds = 0
    while pending.size:
        m = pending.size
        e1 = rng.standard_exponential(m)
        e2 = rng.standard_exponential(m)
        ok = e1 * e1 <= 2.0 * e2 / t
        x = t / (1.0 + t * e1) ** 2
        ok &= rng.random(m) <= np.exp(-0.5 * c[pending] ** 2 * x)
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
        rounds += 1
        if rounds > _MAX_REJECTION_ROUNDS:  # pragma: no cover
            raise RuntimeError("truncated inverse-Gaussian sampler failed to terminate")

    # mu <= t: draw untruncated IG by Michael's method, retry until <= t.
    big_c = np.flatnonzero(c >= 1.0 / t)
    pending = big_c
    rounds = 0
    while pending.size:
        m = pending.size
        mu = 1.0 / c[pending]
        y = rng.standard_normal(m) ** 2
        muy = mu * y
        x = mu + 0.5 * mu * muy - 0.5 * mu * np.sqrt(4.0 * muy + muy * muy)
        swap = rng.random(m) > mu / (mu + x)
        x[swap] = mu[swap] ** 2 / x[swap]
        ok = x <= t
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
        rounds += 1
        if rounds > _MAX_REJECTION_ROUNDS:  # pragma: no cover
            raise RuntimeError("truncated inverse-Gaussian sampler failed to terminate")
    return out


def _series_accept(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Alternating-series accept/reject decision for each proposal in x."""
    m = x.shape[0]
    s = _series_coef(0, x)
    y = rng.random(m) * s
    accept = np.zeros(m, dtype=bool)
    undecided = np.arange(m)
    n = 0
    while undecided.size:
        n += 1
        if n > _MAX_SERIES_TERMS:  # pragma: no cover
            raise RuntimeError("alternating series failed to separate")
        coef = _series_coef(n, x[undecided])
        if n % 2 == 1:
            s[undecided] -= coef
            done = y[undecided] <= s[undecided]
            accept[undecided[done]] = True
        else:
            s[undecided] += coef
            done = y[undecided] > s[undecided]
        undecided = undecided[~done]
    return accept


def sample_pg1(z, rng: np.random.Generator):
    """Exact draw(s) from PG(1, z); z may be a scalar or an array.

    The distribution depends on z only through |z|.  Returns a float for
    scalar input and an array of matching shape otherwise.
    """
    z_arr = np.asarray(z, dtype=float)
    scalar = z_arr.ndim == 0
    flat = np.atleast_1d(z_arr).ravel()
    if not np.all(np.isfinite(flat)):
        raise ValueError("z must be finite")

    c = 0.5 * np.abs(flat)
    t = _TRUNC
    k = np.pi * np.pi / 8.0 + 0.5 * c * c
    log_p = np.log(np.pi / (2.0 * k)) - k * t
    # Mass of the inverse-Gaussian branch: 2 exp(-c) P(IG(1/c, 1) <= t),
    # assembled in log space from the IG distribution function.
    b = (t * c - 1.0) / np.sqrt(t)
    a = -(t * c + 1.0) / np.sqrt(t)
    log_q = np.log(2.0) + np.logaddexp(log_ndtr(b) - c, log_ndtr(a) + c)
    p_frac = 1.0 / (1.0 + np.exp(log_q - log_p))

    out = np.empty(flat.shape[0])
    pending = np.arange(flat.shape[0])
    rounds = 0
    while pending.size:
        m = pending.size
        x = np.empty(m)
        use_exp = rng.random(m) < p_frac[pending]
        n_exp = int(np.count_nonzero(use_exp))
        if n_exp:
            x[use_exp] = t + rng.standard_exponential(n_exp) / k[pending[use_exp]]
        if m - n_exp:
            x[~use_exp] = _trunc_inverse_gaussian(c[pending[~use_exp]], rng)
        ok = _series_accept(x, rng)
        out[pending[ok]] = 0.25 * x[ok]
        pending = pending[~ok]
        rounds += 1
        if rounds > _MAX_REJECTION_ROUNDS:  # pragma: no cover
            raise RuntimeError("Polya-gamma sampler failed to terminate")

    if scalar:
        return float(out[0])
    return out.reshape(z_arr.shape)


def pg_mean(z) -> np.ndarray | float:
    """E[PG(1, z)] = tanh(z/2) / (2 z), with the limit 1/4 at z = 0."""
    z_arr = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(z_arr == 0.0, 0.25, np.tanh(z_arr / 2.0) / (2.0 * z_arr))
    return float(m) if z_arr.ndim == 0 else m


__all__ = ["sample_pg1", "pg_mean"]
