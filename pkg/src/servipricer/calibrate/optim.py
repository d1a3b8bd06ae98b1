"""Maximum-likelihood plumbing: reparameterization, quasi-Newton, numeric Hessian."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special, stats

Z95 = float(stats.norm.ppf(0.975))

MAX_ITER = 500
GTOL = 1e-8
# convergence is declared when the per-observation gradient is below this
GRAD_ACCEPT = 1e-5


@dataclass(frozen=True)
class Param:
    """A named parameter and the map from its unconstrained value."""

    name: str
    transform: str = "identity"  # "log", "logit" or "identity"

    def to_natural(self, x):
        if self.transform == "log":
            return np.exp(x)
        if self.transform == "logit":
            return special.expit(x)
        return x

    def to_free(self, value):
        if self.transform == "log":
            return np.log(value)
        if self.transform == "logit":
            return special.logit(value)
        return value

    def derivative(self, x):
        """d natural / d free, for the delta method."""
        if self.transform == "log":
            return np.exp(x)
        if self.transform == "logit":
            s = special.expit(x)
            return s * (1.0 - s)
        return 1.0


def _steps(x: np.ndarray, rel: float) -> np.ndarray:
    return rel * np.maximum(1.0, np.abs(x))


def central_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, rel: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return g


def numeric_hessian(f: Callable[[np.ndarray], float], x: np.ndarray, rel: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _steps(x, rel)
    f0 = f(x)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


@dataclass
class MaxLikResult:
    params: tuple[Param, ...]
    x: np.ndarray  # free-scale optimum
    loglik: float
    loglik_start: float
    converged: bool
    iterations: int
    message: str
    hessian: np.ndarray  # of the total log-likelihood, free scale
    n_obs: int

    @property
    def natural(self) -> dict[str, float]:
        return {p.name: float(p.to_natural(v)) for p, v in zip(self.params, self.x)}

    def covariance(self) -> np.ndarray:
        return np.linalg.inv(-self.hessian)

    def free_std_errors(self) -> np.ndarray:
        try:
            var = np.diag(self.covariance())
        except np.linalg.LinAlgError:
            return np.full(self.x.size, math.nan)
        return np.sqrt(np.where(var > 0, var, math.nan))

    def std_errors(self) -> dict[str, float]:
        se = self.free_std_errors()
        return {p.name: float(abs(p.derivative(v)) * s) for p, v, s in zip(self.params, self.x, se)}

    def ci95(self) -> dict[str, tuple[float, float]]:
        se = self.free_std_errors()
        out = {}
        for p, v, s in zip(self.params, self.x, se):
            lo, hi = p.to_natural(v - Z95 * s), p.to_natural(v + Z95 * s)
            out[p.name] = (float(lo), float(hi))
        return out


def maximize(loglik: Callable[[np.ndarray], float], x0: Sequence[float], params: Sequence[Param],
             n_obs: int) -> MaxLikResult:
    """Maximize ``loglik`` (a total log-likelihood on the free scale).

    The optimizer sees the per-observation negative log-likelihood so that
    tolerances do not depend on sample size.
    """
    x0 = np.asarray(x0, dtype=float)
    scale = 1.0 / max(n_obs, 1)

    def objective(x):
        val = loglik(x)
        return -val * scale if np.isfinite(val) else 1e300

    def gradient(x):
        return central_gradient(objective, x)

    start = loglik(x0)
    res = optimize.minimize(objective, x0, jac=gradient, method="BFGS",
                            options={"gtol": GTOL, "maxiter": MAX_ITER})
    x = np.asarray(res.x, dtype=float)
    grad_norm = float(np.max(np.abs(gradient(x))))
    converged = bool(res.success or grad_norm < GRAD_ACCEPT) and res.nit < MAX_ITER
    H = numeric_hessian(lambda z: loglik(z), x)
    message = res.message if not converged else "converged"
    return MaxLikResult(tuple(params), x, float(loglik(x)), float(start), converged,
                        int(res.nit), str(message), H, n_obs)
