"""共通フィクスチャと凸部分問題のオラクル"""
import numpy as np
import pytest

from cdl.model import Hyperparams
from dataio.planted import generate_planted


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def planted():
    """雑音なしの小さな合成データ（n_b = K）"""
    return generate_planted(d=20, m=12, K=6, L=3, samples_per_class=5, noise=0.0, rng_seed=7)


@pytest.fixture(scope="session")
def noisy_planted():
    return generate_planted(d=16, m=10, K=5, L=3, samples_per_class=6, noise=0.05, rng_seed=11)


@pytest.fixture
def fast_hp():
    return Hyperparams(max_iters=15)


def gradient_descent(grad, x0, step, iters=20000, tol=1e-13):
    """凸二次関数の勾配降下（解の変化が tol を下回ったら停止）"""
    x = x0.copy()
    for _ in range(iters):
        x_next = x - step * grad(x)
        if np.linalg.norm(x_next - x) <= tol * max(1.0, np.linalg.norm(x)):
            return x_next
        x = x_next
    return x


def projected_gradient(grad, project, x0, step, iters=20000, tol=1e-14):
    """射影勾配法"""
    x = project(x0.copy())
    for _ in range(iters):
        x_next = project(x - step * grad(x))
        if np.linalg.norm(x_next - x) <= tol * max(1.0, np.linalg.norm(x)):
            return x_next
        x = x_next
    return x
