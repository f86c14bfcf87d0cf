"""Distribution kernel: CDFs, quantiles and samplers used by the solvers.

Only the five families the methodology needs are exposed: normal, Student-t,
chi-square, F and binomial tails.  Evaluation is delegated to the scipy
special functions (regularized incomplete beta / gamma), which stay well
inside the accuracy budgets asserted by the test suite (normal 1e-12,
t / chi-square 1e-10).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterError


@dataclass(frozen=True)
class Rng:
    """Named, reproducible random stream (PCG64 behind a seed sequence).

    Child streams are derived through spawn keys, so parallel work can split
    off independent, platform-stable streams without sharing state.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()
    algorithm: str = "pcg64"

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "Rng":
        return Rng(self.seed, self.spawn_key + (int(index),), self.algorithm)


def normal_cdf(x):
    """Standard normal CDF."""
    return special.ndtr(x)


def t_cdf(x, df):
    """Student-t CDF; ``df=inf`` falls back to the normal."""
    df = float(df)
    if not df > 0:
        raise ParameterError(f"t degrees of freedom must be > 0, got {df}")
    if np.isinf(df):
        return special.ndtr(x)
    return special.stdtr(df, x)


def chisq_cdf(x, k):
    """Chi-square CDF with k degrees of freedom (regularized lower gamma)."""
    if np.any(np.asarray(x) < 0):
        raise ParameterError("chi-square argument must be >= 0")
    if not k > 0:
        raise ParameterError(f"chi-square dof must be > 0, got {k}")
    return special.gammainc(k / 2.0, np.asarray(x) / 2.0)


def f_cdf(x, d1, d2):
    """F-distribution CDF via the regularized incomplete beta."""
    if d1 <= 0 or d2 <= 0:
        raise ParameterError("F degrees of freedom must be positive")
    if np.any(np.asarray(x) < 0):
        raise ParameterError("F argument must be >= 0")
    return special.fdtr(d1, d2, x)


def quantile(dist: str, p: float, *, df=None, k=None, d1=None, d2=None) -> float:
    """Inverse CDF for one of the supported families.

    The returned x satisfies |CDF(x) - p| <= 1e-9 on the interior.
    """
    if not 0.0 < p < 1.0:
        raise ParameterError(f"quantile level must be in (0, 1), got {p}")
    if dist == "normal":
        return float(special.ndtri(p))
    if dist == "t":
        if df is None:
            raise ParameterError("t quantile needs df")
        df = float(df)
        if not df > 0:
            raise ParameterError(f"t degrees of freedom must be > 0, got {df}")
        if np.isinf(df):
            return float(special.ndtri(p))
        return float(special.stdtrit(df, p))
    if dist == "chisq":
        if k is None or not k > 0:
            raise ParameterError(f"chi-square dof must be > 0, got {k}")
        return float(2.0 * special.gammaincinv(k / 2.0, p))
    if dist == "f":
        if d1 is None or d2 is None or d1 <= 0 or d2 <= 0:
            raise ParameterError("F degrees of freedom must be positive")
        return float(special.fdtri(d1, d2, p))
    raise ParameterError(f"unknown distribution {dist!r}")


def binom_tail(M: int, p: float, m: int) -> float:
    """Upper tail P[Bin(M, p) >= m], exact via the incomplete-beta identity."""
    if not 0 <= m <= M:
        raise ParameterError(f"need 0 <= m <= M, got m={m}, M={M}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"success probability must be in [0, 1], got {p}")
    if m == 0:
        return 1.0
    return float(special.betainc(m, M - m + 1, p))


def sample_normal(rng: Rng, n: int) -> np.ndarray:
    """n iid standard normal draws, deterministic given the Rng."""
    if n < 0:
        raise ParameterError("sample size must be >= 0")
    return rng.generator().standard_normal(n)


def sample_t(rng: Rng, n: int, df: float) -> np.ndarray:
    """n iid Student-t draws, deterministic given the Rng."""
    if n < 0:
        raise ParameterError("sample size must be >= 0")
    if not df > 0:
        raise ParameterError(f"t degrees of freedom must be > 0, got {df}")
    g = rng.generator()
    if np.isinf(df):
        return g.standard_normal(n)
    return g.standard_t(df, n)
