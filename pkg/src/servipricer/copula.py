"""Frank copula: conditional-inversion sampling, log-density, Kendall's tau."""

from __future__ import annotations

import numpy as np
from scipy import integrate

_SMALL_THETA = 1e-7


def frank_sample(u, w, theta: float):
    """Map independent uniforms (u, w) to a Frank(theta) pair (u, v).

    ``v`` solves C(v | u) = w, the conditional distribution of the second
    coordinate given the first.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if abs(theta) < _SMALL_THETA:
        return u, w.copy()
    eu = np.exp(-theta * u)
    v = -np.log1p(w * np.expm1(-theta) / (w + (1.0 - w) * eu)) / theta
    return u, np.clip(v, 0.0, 1.0)


def frank_logpdf(u, v, theta: float):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(theta) < _SMALL_THETA:
        # first-order expansion around independence
        return np.log1p(theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v) / 2.0)
    a = -np.expm1(-theta)
    bu = -np.expm1(-theta * u)
    bv = -np.expm1(-theta * v)
    den = a - bu * bv
    return np.log(theta * a) - theta * (u + v) - 2.0 * np.log(np.abs(den))


def frank_tau(theta: float) -> float:
    """Kendall's tau, 1 - 4/theta * (1 - D1(theta)) with the Debye function D1."""
    if abs(theta) < _SMALL_THETA:
        return theta / 9.0
    debye, _ = integrate.quad(lambda t: t / np.expm1(t) if t else 1.0, 0.0, abs(theta))
    d1 = debye / abs(theta)
    tau = 1.0 - 4.0 / abs(theta) * (1.0 - d1)
    return tau if theta > 0 else -tau
