import numpy as np
import pytest
from scipy.integrate import quad

from oracles import batch_means_se

from parni.estimators import MarglikResult
from parni.hyper import AdaptiveRwState, log_half_cauchy_sq, update_g, update_weibull_shape
from parni.models import NoConvergenceError


def flat_propose(_):
    return MarglikResult(log_value=0.0, method="stub")


class _FixedRng:
    """Degenerate generator used to force specific proposals."""

    def __init__(self, z=0.0, u=0.5):
        self.z, self.u = z, u

    def standard_normal(self):
        return self.z

    def random(self):
        return self.u


class TestDensity:
    def test_transformed_half_cauchy_integrates_to_one(self):
        total, err = quad(lambda nu: np.exp(log_half_cauchy_sq(np.exp(nu))), -40, 40, limit=200)
        assert abs(total - 1.0) < 1e-6
        assert err < 1e-6

    def test_density_formula(self):
        g = 2.7
        assert log_half_cauchy_sq(g) == pytest.approx(
            np.log(np.sqrt(g) / (np.pi * (1 + g))), abs=1e-12
        )


class TestAdaptiveRw:
    def test_variance_positive_and_diminishing_steps(self):
        rw = AdaptiveRwState()
        deltas = []
        for _ in range(200):
            new = rw.adapted(1.0)
            deltas.append(abs(new.log_variance - rw.log_variance))
            rw = new
        assert rw.variance > 0
        assert deltas[-1] < deltas[0]
        assert deltas[150] == pytest.approx(151 ** -0.7 * (1.0 - 0.234), abs=1e-12)


class TestUpdateG:
    def test_forced_zero_step_accepts(self):
        upd = update_g(1.5, 0.0, flat_propose, AdaptiveRwState(), _FixedRng(z=0.0, u=0.5))
        assert upd.alpha == pytest.approx(1.0)
        assert upd.accepted
        assert upd.value == pytest.approx(1.5)

    def test_flat_likelihood_targets_half_cauchy_sq(self):
        rng = np.random.default_rng(3)
        rw = AdaptiveRwState()
        g = 1.0
        lml = 0.0
        n_iter = 40_000
        vals = np.empty(n_iter)
        for i in range(n_iter):
            upd = update_g(g, lml, flat_propose, rw, rng)
            g, rw = upd.value, upd.rw
            vals[i] = g / (1 + g)
        target, _ = quad(
            lambda nu: (np.exp(nu) / (1 + np.exp(nu))) * np.exp(log_half_cauchy_sq(np.exp(nu))),
            -40, 40, limit=200,
        )
        assert abs(vals.mean() - target) < 4 * batch_means_se(vals)

    def test_adaptation_reaches_target_rate(self):
        rng = np.random.default_rng(4)
        rw = AdaptiveRwState(log_variance=np.log(25.0))  # deliberately bad start
        g = 1.0
        alphas = []
        for _ in range(10_000):
            upd = update_g(g, 0.0, flat_propose, rw, rng)
            g, rw = upd.value, upd.rw
            alphas.append(upd.alpha)
        assert abs(np.mean(alphas[-3000:]) - 0.234) < 0.05

    def test_estimator_failure_rejects_but_adapts(self):
        def failing(_):
            raise NoConvergenceError("mode search failed")

        rw = AdaptiveRwState()
        upd = update_g(2.0, 0.0, failing, rw, np.random.default_rng(0))
        assert upd.failed and not upd.accepted
        assert upd.value == 2.0
        assert upd.rw.iteration == 1

    def test_detailed_balance_flux_on_halves(self):
        # flat likelihood: flux across nu = 0 balances in both directions
        rng = np.random.default_rng(9)
        rw = AdaptiveRwState()
        g = 1.0
        up = down = 0
        prev_side = g >= 1.0
        for _ in range(60_000):
            upd = update_g(g, 0.0, flat_propose, rw, rng)
            g, rw = upd.value, upd.rw
            side = g >= 1.0
            if side and not prev_side:
                up += 1
            elif prev_side and not side:
                down += 1
            prev_side = side
        assert abs(up - down) <= 1


class TestUpdateShape:
    def test_identity_proposal_accepts(self):
        upd = update_weibull_shape(1.2, 1.0, 0.0, flat_propose, AdaptiveRwState(), _FixedRng())
        assert upd.alpha == pytest.approx(1.0)
        assert upd.value == pytest.approx(1.2)

    def test_flat_likelihood_targets_gaussian_prior(self):
        sigma_k_sq = 0.8
        rng = np.random.default_rng(11)
        rw = AdaptiveRwState()
        k = 1.0
        n_iter = 40_000
        s_vals = np.empty(n_iter)
        for i in range(n_iter):
            upd = update_weibull_shape(k, sigma_k_sq, 0.0, flat_propose, rw, rng)
            k, rw = upd.value, upd.rw
            s_vals[i] = np.log(k)
        assert abs(s_vals.mean()) < 4 * batch_means_se(s_vals)
        se_var = 4 * batch_means_se(s_vals**2)
        assert abs(np.mean(s_vals**2) - sigma_k_sq) < se_var

    def test_accepted_marglik_is_proposed_value(self):
        # the stored estimate must switch to the value evaluated at the new k
        def tagged(k_new):
            return MarglikResult(log_value=100.0 + k_new, method="stub")

        rng = np.random.default_rng(2)
        upd = update_weibull_shape(1.0, 1.0, 100.0 + 1.0, tagged, AdaptiveRwState(), rng)
        if upd.accepted:
            assert upd.marglik.log_value == pytest.approx(100.0 + upd.value)
        else:
            assert upd.marglik is None
