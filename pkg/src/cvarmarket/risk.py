"""Empirical VaR / CVaR estimators and a Gaussian closed form.

CVaR is the average of the upper ``1 - alpha`` probability tail of the
empirical distribution. When the VaR sample is an atom that straddles the
``alpha`` level, only the fraction of its mass lying above ``alpha`` enters
the tail. This is well defined for the atoms produced by zero-clipped
samplers, where ``E[X | X > VaR]`` is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

# alpha * n is snapped to the nearest integer within this tolerance before ceil()
_INDEX_SNAP = 1e-9


@dataclass(frozen=True)
class RiskEstimate:
    var: float
    cvar: float
    alpha: float
    n_samples: int


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _sorted_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one sample")
    return np.sort(x)


def _var_index(alpha: float, n: int) -> int:
    """1-based rank of the VaR order statistic, ``ceil(alpha * n)``."""
    an = alpha * n
    nearest = round(an)
    if abs(an - nearest) <= _INDEX_SNAP * max(1.0, an):
        an = nearest
    return max(1, min(n, math.ceil(an)))


def _var_cvar_sorted(x: np.ndarray, alpha: float) -> tuple[float, float]:
    n = x.size
    k = _var_index(alpha, n)
    var = float(x[k - 1])
    # (F(v) - alpha) * n * v + sum(z > v), regrouped around v; exact for constant samples
    n_le = int(np.searchsorted(x, var, side="right"))
    excess = float((x[n_le:] - var).sum())
    return var, var + excess / ((1.0 - alpha) * n)


def var_alpha(samples, alpha: float) -> float:
    """Smallest sample ``z`` with empirical CDF ``F(z) >= alpha``."""
    alpha = _check_alpha(alpha)
    x = _sorted_samples(samples)
    return float(x[_var_index(alpha, x.size) - 1])


def cvar_alpha(samples, alpha: float) -> float:
    """Average of the upper ``1 - alpha`` tail of the empirical distribution.

    Parameters
    ----------
    samples : array_like
        Realizations of the variable. Not modified.
    alpha : float
        Confidence level in (0, 1).

    Returns
    -------
    float
        ``[(F(v) - alpha) * n * v + sum(z_i > v)] / ((1 - alpha) * n)`` with
        ``v = var_alpha(samples, alpha)``.
    """
    alpha = _check_alpha(alpha)
    return _var_cvar_sorted(_sorted_samples(samples), alpha)[1]


def estimate_risk(samples, alpha: float) -> RiskEstimate:
    """VaR and CVaR from a single sort."""
    alpha = _check_alpha(alpha)
    x = _sorted_samples(samples)
    var, cvar = _var_cvar_sorted(x, alpha)
    return RiskEstimate(var=var, cvar=cvar, alpha=alpha, n_samples=int(x.size))


def gaussian_cvar(mean: float, std: float, alpha: float) -> float:
    """CVaR of an unclipped normal: ``mean + std * pdf(z_alpha) / (1 - alpha)``."""
    alpha = _check_alpha(alpha)
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    if std == 0:
        return float(mean)
    unit = NormalDist()
    z = unit.inv_cdf(alpha)
    return float(mean + std * unit.pdf(z) / (1.0 - alpha))
