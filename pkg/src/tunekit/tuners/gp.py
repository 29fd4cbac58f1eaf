"""Gaussian-process regression surrogate.

Anisotropic squared-exponential kernel with per-dimension lengthscales,
signal variance and (optionally fitted) noise variance. Inputs are expected
in the [0, 1]-scaled numeric encoding of the search space; targets are
standardized internally. Hyperparameters maximize the log marginal
likelihood by derivative-free local search restarted from random points in
fixed log-scale boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from ..errors import GPFitError

JITTER_FLOOR = 1e-8
JITTER_CAP = 1e-4

# boxes for standardized targets (sd 1): lengthscales, signal sd, noise sd
LOG_LS_BOUNDS = (math.log(1e-2), math.log(10.0))
LOG_SIGNAL_BOUNDS = (math.log(1e-3), math.log(10.0))
LOG_NOISE_BOUNDS = (math.log(1e-6), math.log(1.0))


def _sq_dists(A: np.ndarray, B: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    a = A / lengthscales
    b = B / lengthscales
    return (
        np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T
    ).clip(min=0.0)


def _kernel(A, B, lengthscales, signal_var):
    return signal_var * np.exp(-0.5 * _sq_dists(A, B, lengthscales))


def _chol_with_jitter(K: np.ndarray, noise_var: float):
    n = K.shape[0]
    jitter = JITTER_FLOOR
    while jitter <= JITTER_CAP:
        try:
            return cho_factor(K + (noise_var + jitter) * np.eye(n), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GPFitError("kernel matrix not positive definite after jitter escalation")


def _log_marginal_likelihood(X, z, lengthscales, signal_var, noise_var) -> float:
    K = _kernel(X, X, lengthscales, signal_var)
    return _lml_from_gram(K, z, noise_var)


def _lml_from_gram(K: np.ndarray, z: np.ndarray, noise_var: float) -> float:
    cf, _ = _chol_with_jitter(K, noise_var)
    alpha = cho_solve(cf, z)
    log_det = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    n = len(z)
    return float(-0.5 * z @ alpha - 0.5 * log_det - 0.5 * n * math.log(2.0 * math.pi))


@dataclass
class GPSurrogate:
    X: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    signal_sd: float
    noise_sd: float
    y_mean: float
    y_sd: float
    _chol: object = None
    _alpha: np.ndarray | None = None

    @property
    def prior_sd(self) -> float:
        """Signal standard deviation on the original target scale."""
        return self.signal_sd * self.y_sd

    def _factorize(self):
        z = (self.y - self.y_mean) / self.y_sd
        K = _kernel(self.X, self.X, self.lengthscales, self.signal_sd**2)
        self._chol, _ = _chol_with_jitter(K, self.noise_sd**2)
        self._alpha = cho_solve(self._chol, z)

    def predict(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation of the latent function."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        k = _kernel(Xq, self.X, self.lengthscales, self.signal_sd**2)
        mean_z = k @ self._alpha
        v = cho_solve(self._chol, k.T)
        var_z = self.signal_sd**2 - np.einsum("ij,ji->i", k, v)
        sd_z = np.sqrt(np.clip(var_z, 0.0, None))
        return self.y_mean + self.y_sd * mean_z, self.y_sd * sd_z

    def log_marginal_likelihood(self) -> float:
        z = (self.y - self.y_mean) / self.y_sd
        return _log_marginal_likelihood(
            self.X, z, self.lengthscales, self.signal_sd**2, self.noise_sd**2
        )


def gp_fit(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator | None = None,
    optimize: bool = True,
    noise: float | str = "fit",
    restarts: int = 10,
    lengthscales: np.ndarray | float | None = None,
    signal_sd: float | None = None,
) -> GPSurrogate:
    """Fit the surrogate. ``noise='fit'`` optimizes the noise sd in its box;
    a float pins it (0 keeps only the numerical jitter floor).

    With ``optimize=False`` the given hyperparameters are used as-is.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, dim = X.shape
    if n < 2:
        raise GPFitError("gp fit needs at least two points")
    y_mean = float(np.mean(y))
    y_sd = float(np.std(y))
    if y_sd < 1e-12:
        y_sd = 1.0
    z = (y - y_mean) / y_sd

    fit_noise = noise == "fit"
    fixed_noise_sd = None if fit_noise else float(noise) / y_sd  # standardized scale

    if not optimize:
        ls = np.full(dim, 0.3) if lengthscales is None else np.broadcast_to(
            np.asarray(lengthscales, dtype=float), (dim,)
        ).copy()
        gp = GPSurrogate(
            X=X,
            y=y,
            lengthscales=ls,
            signal_sd=1.0 if signal_sd is None else float(signal_sd) / y_sd,
            noise_sd=0.0 if fixed_noise_sd is None else fixed_noise_sd,
            y_mean=y_mean,
            y_sd=y_sd,
        )
        gp._factorize()
        return gp

    rng = rng or np.random.default_rng()
    n_ls = dim
    lo = np.array([LOG_LS_BOUNDS[0]] * n_ls + [LOG_SIGNAL_BOUNDS[0]])
    hi = np.array([LOG_LS_BOUNDS[1]] * n_ls + [LOG_SIGNAL_BOUNDS[1]])
    if fit_noise:
        lo = np.append(lo, LOG_NOISE_BOUNDS[0])
        hi = np.append(hi, LOG_NOISE_BOUNDS[1])

    def objective(theta: np.ndarray) -> float:
        theta = np.clip(theta, lo, hi)
        ls = np.exp(theta[:n_ls])
        sv = math.exp(2.0 * theta[n_ls])
        nv = math.exp(2.0 * theta[n_ls + 1]) if fit_noise else (fixed_noise_sd or 0.0) ** 2
        try:
            return -_log_marginal_likelihood(X, z, ls, sv, nv)
        except GPFitError:
            return 1e12

    default = np.array([math.log(0.3)] * n_ls + [0.0] + ([math.log(1e-2)] if fit_noise else []))
    starts = [default]
    for _ in range(max(0, restarts - 1)):
        starts.append(rng.uniform(lo, hi))
    best_theta, best_val = None, math.inf
    for x0 in starts:
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"maxiter": 120 * len(lo), "xatol": 1e-3, "fatol": 1e-4},
        )
        if res.fun < best_val:
            best_val, best_theta = res.fun, np.clip(res.x, lo, hi)
    if best_theta is None or not math.isfinite(best_val):
        raise GPFitError("marginal-likelihood optimization failed")
    ls = np.exp(best_theta[:n_ls])
    sv = math.exp(best_theta[n_ls])
    nv = math.exp(best_theta[n_ls + 1]) if fit_noise else (fixed_noise_sd or 0.0)
    gp = GPSurrogate(
        X=X, y=y, lengthscales=ls, signal_sd=sv, noise_sd=nv, y_mean=y_mean, y_sd=y_sd
    )
    gp._factorize()
    return gp


def gp_predict(gp: GPSurrogate, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return gp.predict(Xq)
