import numpy as np
import pytest

from trapcascade import PathKey, path_stream


@pytest.fixture
def rng():
    return path_stream(20240817, PathKey((), 99))


def binom_stderr(p_hat: float, n: int) -> float:
    return float(np.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n))


def mean_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))
