"""Gaussian-process regression with an ARD Matérn-5/2 kernel.

Inputs are unit-cube encodings; targets are standardised per fit (zero mean,
unit variance) so that all hyperparameters and priors are dimensionless.
``GPHyper`` therefore lives on the standardised scale and predictions are
mapped back to cost units on the way out.

Hyperparameters are either marginalised with slice sampling
(``sample_hyperparameters``) or point-estimated (``fit_map``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .errors import DimensionMismatch, NotPositiveDefinite, TooFewSamples

SQRT5 = math.sqrt(5.0)
LOG_2PI = math.log(2.0 * math.pi)
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)  # relative to the mean diagonal
NOISE_PRIOR_SCALE = 0.1
BURN_IN = 50


@dataclass(frozen=True)
class GPHyper:
    lengthscales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 0.0
    mean_const: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0) or not self.signal_variance > 0 or self.noise_variance < 0:
            raise ValueError("lengthscales and signal variance must be positive, noise non-negative")

    @classmethod
    def default(cls, d: int) -> "GPHyper":
        return cls(np.ones(d), 1.0, NOISE_PRIOR_SCALE**2, 0.0)

    def to_vector(self) -> np.ndarray:
        """Unconstrained parameterisation used by the samplers."""
        return np.concatenate(
            [
                np.log(self.lengthscales),
                [math.log(self.signal_variance), 0.5 * math.log(max(self.noise_variance, 1e-300)), self.mean_const],
            ]
        )

    @classmethod
    def from_vector(cls, theta) -> "GPHyper":
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[:-3]), math.exp(theta[-3]), math.exp(2.0 * theta[-2]), float(theta[-1]))

    def __eq__(self, other):
        if not isinstance(other, GPHyper):
            return NotImplemented
        return (
            np.array_equal(self.lengthscales, other.lengthscales)
            and self.signal_variance == other.signal_variance
            and self.noise_variance == other.noise_variance
            and self.mean_const == other.mean_const
        )

    __hash__ = None


def scaled_distance(X1, X2, lengthscales) -> np.ndarray:
    A = np.atleast_2d(X1) / lengthscales
    B = np.atleast_2d(X2) / lengthscales
    sq = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2.0 * A @ B.T
    return np.sqrt(np.maximum(sq, 0.0))


def matern52_from_r(r, signal_variance):
    s5r = SQRT5 * r
    return signal_variance * (1.0 + s5r + (5.0 / 3.0) * r**2) * np.exp(-s5r)


def gram(X1, X2, hyper: GPHyper) -> np.ndarray:
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    d = hyper.lengthscales.shape[0]
    if X1.shape[1] != d or X2.shape[1] != d:
        raise DimensionMismatch(f"kernel expects {d} dimensions")
    return matern52_from_r(scaled_distance(X1, X2, hyper.lengthscales), hyper.signal_variance)


def matern52(x1, x2, hyper: GPHyper) -> float:
    """ARD Matérn-5/2 covariance between two points."""
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.shape != x2.shape or x1.shape[0] != hyper.lengthscales.shape[0]:
        raise DimensionMismatch("points and lengthscales must share a dimension")
    r = math.sqrt(float(np.sum(((x1 - x2) / hyper.lengthscales) ** 2)))
    return float(matern52_from_r(r, hyper.signal_variance))


def standardize(y) -> tuple[np.ndarray, float, float]:
    y = np.asarray(y, dtype=float)
    mu = float(y.mean())
    sd = float(y.std())
    if not sd > 1e-12 * max(1.0, abs(mu)):
        sd = 1.0
    return (y - mu) / sd, mu, sd


def _cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    scale = float(np.mean(np.diag(K)))
    eye = np.eye(K.shape[0])
    for j in JITTERS:
        jitter = j * scale
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefinite("Gram matrix not positive definite after jitter escalation")


@dataclass(frozen=True)
class GPPosterior:
    X_train: np.ndarray
    y_train: np.ndarray  # standardised
    hyper: GPHyper
    chol: np.ndarray
    alpha_vec: np.ndarray
    y_mean: float
    y_std: float
    jitter: float

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and latent variance in cost units for rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.X_train.shape[1]:
            raise DimensionMismatch(f"expected {self.X_train.shape[1]} coordinates, got {X.shape[1]}")
        Ks = gram(self.X_train, X, self.hyper)
        mean = self.hyper.mean_const + Ks.T @ self.alpha_vec
        v = solve_triangular(self.chol, Ks, lower=True)
        var = self.hyper.signal_variance - (v**2).sum(0)
        var = np.maximum(var, 0.0)
        return self.y_mean + self.y_std * mean, self.y_std**2 * var


def fit_posterior(X, y, hyper: GPHyper) -> GPPosterior:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X and y must be non-empty and aligned")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    ys, mu, sd = standardize(y)
    K = gram(X, X, hyper) + hyper.noise_variance * np.eye(X.shape[0])
    L, jitter = _cholesky(K)
    alpha = cho_solve((L, True), ys - hyper.mean_const)
    return GPPosterior(X, ys, hyper, L, alpha, mu, sd, jitter)


def posterior_predict(post: GPPosterior, x) -> tuple[float, float]:
    """Mean and variance (cost units) at a single point."""
    m, v = post.predict(np.asarray(x, dtype=float).reshape(1, -1))
    return float(m[0]), float(v[0])


def _lml_standardized(X, ys, hyper: GPHyper) -> float:
    K = gram(X, X, hyper) + hyper.noise_variance * np.eye(X.shape[0])
    L, _ = _cholesky(K)
    r = ys - hyper.mean_const
    a = cho_solve((L, True), r)
    return float(-0.5 * r @ a - np.log(np.diag(L)).sum() - 0.5 * X.shape[0] * LOG_2PI)


def log_marginal_likelihood(X, y, hyper: GPHyper) -> float:
    """Log evidence of the standardised targets under ``hyper``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ys, _, _ = standardize(y)
    return _lml_standardized(X, ys, hyper)


def log_prior(theta: np.ndarray) -> float:
    """Priors in the unconstrained parameterisation.

    log-lengthscales and log-signal-variance ~ N(0, 1); noise std ~ half-normal(0.1)
    (with the log-Jacobian); constant mean ~ N(0, 1).
    """
    log_ls, log_sig, log_noise_sd, mean = theta[:-3], theta[-3], theta[-2], theta[-1]
    lp = -0.5 * float(np.sum(log_ls**2)) - 0.5 * log_sig**2 - 0.5 * mean**2
    sd = math.exp(log_noise_sd)
    lp += -0.5 * (sd / NOISE_PRIOR_SCALE) ** 2 + log_noise_sd
    return lp


def _log_post(theta, X, ys) -> float:
    if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) > 25):
        return -np.inf
    try:
        return _lml_standardized(X, ys, GPHyper.from_vector(theta)) + log_prior(theta)
    except (NotPositiveDefinite, ValueError, OverflowError):
        return -np.inf


def _slice_sweep(theta, logp, current, rng, width=1.0, max_steps=10, max_shrink=60):
    """One coordinate-wise stepping-out slice-sampling sweep (Neal, 2003)."""
    theta = theta.copy()
    for i in range(theta.shape[0]):
        level = current + math.log(rng.random())
        lo = theta[i] - width * rng.random()
        hi = lo + width
        probe = theta.copy()
        for _ in range(max_steps):
            probe[i] = lo
            if logp(probe) <= level:
                break
            lo -= width
        for _ in range(max_steps):
            probe[i] = hi
            if logp(probe) <= level:
                break
            hi += width
        x0 = theta[i]
        for _ in range(max_shrink):
            probe[i] = lo + (hi - lo) * rng.random()
            lp = logp(probe)
            if lp > level:
                theta[i] = probe[i]
                current = lp
                break
            if probe[i] < x0:
                lo = probe[i]
            else:
                hi = probe[i]
        else:
            probe[i] = x0
    return theta, current


def sample_hyperparameters(X, y, n_draws: int = 10, seed: int = 0, burn_in: int = BURN_IN) -> list[GPHyper]:
    """Posterior draws of the kernel hyperparameters by slice sampling.

    Proposals whose Gram matrix cannot be factorised are rejected like any
    other out-of-slice point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise TooFewSamples("hyperparameter sampling needs at least 2 training points")
    ys, _, _ = standardize(y)
    rng = np.random.default_rng(seed)
    theta = GPHyper.default(X.shape[1]).to_vector()
    logp = lambda t: _log_post(t, X, ys)  # noqa: E731
    current = logp(theta)
    if not np.isfinite(current):
        raise NotPositiveDefinite("initial hyperparameters give a singular Gram matrix")
    draws = []
    for step in range(burn_in + n_draws):
        theta, current = _slice_sweep(theta, logp, current, rng)
        if step >= burn_in:
            draws.append(GPHyper.from_vector(theta))
    return draws


def fit_map(X, y, n_starts: int = 4, seed: int = 0) -> GPHyper:
    """Multi-start Nelder-Mead maximisation of the (prior-penalised) log evidence."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ys, _, _ = standardize(y)
    rng = np.random.default_rng(seed)
    base = GPHyper.default(X.shape[1]).to_vector()
    best_theta, best_val = base, _log_post(base, X, ys)

    def objective(t):
        v = _log_post(t, X, ys)
        return -v if np.isfinite(v) else 1e300

    for k in range(n_starts):
        start = base if k == 0 else base + rng.normal(0.0, 0.7, size=base.shape)
        res = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"maxiter": 200 * base.shape[0], "xatol": 1e-4, "fatol": 1e-6},
        )
        val = -res.fun
        if val > best_val:
            best_theta, best_val = res.x, val
    return GPHyper.from_vector(best_theta)
