import numpy as np
import pytest

from psmatch import settings
from psmatch.models import Dataset

T4_SCORES = np.array([0.62, 0.50, 0.40, 0.71])
T4_W = np.array([1, 0, 1, 0])
T4_Y = np.array([5.0, 1.0, 3.0, 2.0])

# Intercept plus a covariate laid out so the logistic fit is symmetric about
# zero and pairs units (0, 3) and (1, 2), the same matches the T4 scores give.
T4_CSV = "y,w,x1,x2\n5,1,1,4\n1,0,1,-4\n3,1,1,-5\n2,0,1,5\n"


@pytest.fixture(autouse=True)
def strict_dual_form():
    previous = settings.DUAL_FORM_STRICT
    settings.DUAL_FORM_STRICT = True
    yield
    settings.DUAL_FORM_STRICT = previous


@pytest.fixture
def t4():
    """
    The four-unit example: scores, arms, outcomes and a Dataset whose single
    covariate is the score itself.
    """
    ds = Dataset(T4_SCORES.reshape(-1, 1), T4_W, T4_Y)
    return ds, T4_SCORES.copy()


@pytest.fixture
def t4_csv(tmp_path):
    path = tmp_path / "t4.csv"
    path.write_text(T4_CSV)
    return path


def random_instance(rng: np.random.Generator, n_max: int = 60, k: int = 2, ties: bool = False):
    """
    A random dataset with at least two units per arm plus a score vector. With
    ties, scores are drawn from a coarse grid so duplicates are common.
    """
    n = int(rng.integers(4, n_max + 1))
    w = np.zeros(n, dtype=int)
    treated = int(rng.integers(2, n - 1))
    w[rng.permutation(n)[:treated]] = 1
    x = rng.normal(size=(n, k))
    y = rng.normal(size=n) + x.sum(axis=1)
    if ties:
        scores = rng.integers(1, 10, size=n) / 10.0
    else:
        scores = rng.uniform(0.05, 0.95, size=n)
    return Dataset(x, w, y), scores


@pytest.fixture
def instances():
    def factory(count: int = 1000, seed: int = 0, **kwargs):
        rng = np.random.default_rng(seed)
        for _ in range(count):
            yield random_instance(rng, **kwargs)
    return factory
