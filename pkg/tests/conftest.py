import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from parni.models import PriorConfig, build_dataset
from parni.simulate import SimConfig, gen_logistic, gen_survival


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def logistic_toy():
    """n=60, p=5 logistic data with two live coefficients."""
    r = np.random.default_rng(5)
    X = r.standard_normal((60, 5))
    eta = 1.2 * X[:, 0] - 1.5 * X[:, 2]
    y = (r.random(60) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return build_dataset("logistic", X, y=y, standardize=False)


@pytest.fixture(scope="session")
def cox_toy():
    r = np.random.default_rng(6)
    X = r.standard_normal((50, 4))
    T = r.exponential(np.exp(-0.8 * X[:, 0] + X[:, 1]))
    c = np.quantile(T, 0.75)
    return build_dataset("cox", X, time=np.minimum(T, c) + 1e-3, event=(T <= c).astype(float), standardize=False)


@pytest.fixture(scope="session")
def weibull_toy():
    r = np.random.default_rng(7)
    X = r.standard_normal((50, 4))
    T = np.exp(-0.7 * X[:, 0] + 0.5 * r.standard_normal(50))
    c = np.quantile(T, 0.8)
    return build_dataset("weibull", X, time=np.minimum(T, c), event=(T <= c).astype(float), standardize=False)


@pytest.fixture(scope="session")
def gaussian_toy():
    r = np.random.default_rng(8)
    X = r.standard_normal((40, 4))
    y = X[:, 0] - 0.5 * X[:, 3] + r.standard_normal(40)
    return build_dataset("gaussian", X, y=y, standardize=False)


@pytest.fixture(scope="session")
def p8_fixture():
    """The small exhaustive-enumeration benchmark: n=150, p=8 logistic."""
    data = gen_logistic(SimConfig(n=150, p=8, kind="logistic", seed=1))
    prior = PriorConfig(g=1.0, h=0.02, sigma_alpha_sq=100.0)
    return data, prior


@pytest.fixture(scope="session")
def survival_small():
    return gen_survival(SimConfig(n=80, p=6, kind="cox", seed=9))


def toy_for_kind(kind, rng, n=40, p=4):
    """Fresh random small dataset of the requested kind."""
    X = rng.standard_normal((n, p))
    if kind == "logistic":
        eta = X[:, 0] - X[:, 1]
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        return build_dataset("logistic", X, y=y, standardize=False)
    if kind == "gaussian":
        y = X[:, 0] + 0.5 * rng.standard_normal(n)
        return build_dataset("gaussian", X, y=y, standardize=False)
    T = np.exp(-0.6 * X[:, 0] + 0.7 * rng.standard_normal(n))
    c = np.quantile(T, 0.8)
    return build_dataset(kind, X, time=np.minimum(T, c), event=(T <= c).astype(float), standardize=False)
