from __future__ import annotations

import numpy as np
import pytest

from mediboot.model import Dataset, demean
from mediboot.rng import RngStream


def make_dataset(n=50, theta=0.4, beta_m=0.5, beta_x=0.3, seed=0, demeaned=True):
    gen = RngStream(seed, path=(99,)).generator()
    x = gen.standard_normal(n)
    m = theta * x + gen.standard_normal(n)
    y = beta_x * x + beta_m * m + gen.standard_normal(n)
    d = Dataset(x, m, y)
    return demean(d) if demeaned else d


def noiseless_dataset(n=12, theta=0.5, beta_m=0.3, beta_x=0.2):
    """y is an exact function of (x, m); the mediator equation carries a
    deterministic disturbance orthogonal to x so the design stays regular."""
    x = np.arange(n, dtype=float)
    x -= x.mean()
    v = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    v -= v.mean()
    v -= (v @ x) / (x @ x) * x
    m = theta * x + v
    y = beta_x * x + beta_m * m
    return Dataset(x, m, y, demeaned=True)


def dataset_with_fit(n, theta, beta_m, s_v2=1.0, s_u2=1.0, beta_x=0.0, seed=0, xtx=None):
    """Dataset whose OLS fit reproduces the given parameter values exactly.

    Built by orthogonalization: v is orthogonal to x with v'v = s_v2*(n-2),
    u orthogonal to (x, m) with u'u = s_u2*(n-3)."""
    gen = RngStream(seed, path=(98,)).generator()
    x = gen.standard_normal(n)
    x -= x.mean()
    if xtx is not None:
        x *= np.sqrt(xtx / (x @ x))
    v = gen.standard_normal(n)
    v -= v.mean()
    v -= (v @ x) / (x @ x) * x
    if s_v2 > 0:
        v *= np.sqrt(s_v2 * (n - 2) / (v @ v))
    else:
        v[:] = 0.0
    m = theta * x + v
    u = gen.standard_normal(n)
    u -= u.mean()
    u -= (u @ x) / (x @ x) * x
    u -= (u @ v) / (v @ v) * v if s_v2 > 0 else 0.0
    if s_u2 > 0:
        u *= np.sqrt(s_u2 * (n - 3) / (u @ u))
    else:
        u[:] = 0.0
    y = beta_x * x + beta_m * m + u
    return Dataset(x, m, y, demeaned=True)


class ForcedStream:
    """RngStream stand-in whose generator returns scripted draws."""

    def __init__(self, generator):
        self._generator = generator

    def generator(self):
        return self._generator


@pytest.fixture
def dataset():
    return make_dataset()
