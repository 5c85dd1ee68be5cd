"""Gaussian-process regression, one model per response.

Inputs live in the unit space of the circuit. Targets are oriented responses
(always minimized) and get standardized to zero mean and unit variance before
fitting; all public predictions are de-standardized again.

Hyperparameters are handled in log space::

    theta = [log l_1, ..., log l_D, log signal_variance, log noise_variance]

"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize
import yaml
from scipy.spatial.distance import cdist

from occsearch import (
    ConditioningError,
    DimensionMismatch,
    DuplicateInputs,
    InsufficientData,
    ValidationError,
    output,
)
from occsearch.utils import array_checksum

JITTERS = (0.0,) + tuple(10.0 ** e for e in range(-10, -3))
NOISE_FLOOR = 1e-8

LENGTHSCALE_BOUNDS = (1e-2, 20.0)
SIGNAL_BOUNDS = (1e-2, 1e2)
NOISE_BOUNDS = (NOISE_FLOOR, 1.0)

DEFAULT_RESTARTS = 8


class Kernel(object):
    """Stationary ARD kernel expressed through the scaled distance r².

    `profile(r2)` returns the unit-variance kernel value k and the helper
    g = -2 dk/d(r²), which gives both derivatives needed here:

        dk/dx_j       = -g (x_j - x'_j) / l_j²
        dk/d(log l_j) =  g (x_j - x'_j)² / l_j²

    """

    name = None

    @classmethod
    def get(cls, name):
        for kernel in (Matern52, SquaredExponential):
            if kernel.name == name:
                return kernel()
        raise ValidationError.from_context(
            "unknown kernel {!r}".format(name), "kernel"
        )

    def profile(self, r2):
        raise NotImplementedError


class Matern52(Kernel):

    name = "matern52"

    def profile(self, r2):
        r = np.sqrt(r2)
        decay = np.exp(-math.sqrt(5.0) * r)
        k = (1.0 + math.sqrt(5.0) * r + 5.0 / 3.0 * r2) * decay
        g = 5.0 / 3.0 * (1.0 + math.sqrt(5.0) * r) * decay
        return k, g


class SquaredExponential(Kernel):

    name = "squared_exponential"

    def profile(self, r2):
        k = np.exp(-0.5 * r2)
        return k, k


KERNELS = [Matern52.name, SquaredExponential.name]


@dataclass(frozen=True, eq=False)
class KernelParams:
    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        lengthscales = np.atleast_1d(np.asarray(self.lengthscales, float))
        object.__setattr__(self, "lengthscales", lengthscales)
        if not np.all(lengthscales > 0) or not self.signal_variance > 0:
            raise ValidationError.from_context(
                "kernel lengthscales and signal variance must be positive"
            )
        if not self.noise_variance >= 0:
            raise ValidationError.from_context(
                "noise variance must not be negative"
            )

    @property
    def theta(self):
        return np.log(
            np.concatenate(
                [
                    self.lengthscales,
                    [self.signal_variance, self.noise_variance],
                ]
            )
        )

    @classmethod
    def from_theta(cls, theta):
        values = np.exp(np.asarray(theta, dtype=float))
        return cls(values[:-2], float(values[-2]), float(values[-1]))

    def as_dict(self):
        return {
            "lengthscales": [float(v) for v in self.lengthscales],
            "signal_variance": float(self.signal_variance),
            "noise_variance": float(self.noise_variance),
        }


def _cholesky(K, noise_variance):
    """Lower Cholesky factor of K + (noise + jitter) I and the jitter used."""
    n = len(K)
    for jitter in JITTERS:
        try:
            L = scipy.linalg.cholesky(
                K + (noise_variance + jitter) * np.eye(n), lower=True
            )
        except np.linalg.LinAlgError:
            continue
        if jitter:
            output.annotate(
                "surrogate: factorization needed jitter {:g}".format(jitter),
                debug=True,
            )
        return L, jitter
    raise ConditioningError.from_context(n, JITTERS[-1])


def _scaled_sqdist(A, B, lengthscales):
    return cdist(A / lengthscales, B / lengthscales, "sqeuclidean")


def log_marginal_likelihood(
    params, inputs, targets, kernel=Matern52.name, gradient=False
):
    """Exact Gaussian log marginal likelihood of `targets`.

    With `gradient=True` returns (value, d value / d theta).

    """
    kernel = Kernel.get(kernel)
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    n, D = X.shape
    if params.lengthscales.shape != (D,):
        raise DimensionMismatch.from_context(D, params.lengthscales.size)

    k_unit, g_unit = kernel.profile(
        _scaled_sqdist(X, X, params.lengthscales)
    )
    K = params.signal_variance * k_unit
    L, _ = _cholesky(K, params.noise_variance)
    alpha = scipy.linalg.cho_solve((L, True), y)
    value = (
        -0.5 * y @ alpha
        - np.sum(np.log(np.diag(L)))
        - 0.5 * n * math.log(2 * math.pi)
    )
    if not gradient:
        return float(value)

    K_inv = scipy.linalg.cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - K_inv
    G = params.signal_variance * g_unit
    grad = np.empty(D + 2)
    for j in range(D):
        dj2 = (X[:, j, None] - X[None, :, j]) ** 2 / params.lengthscales[j] ** 2
        grad[j] = 0.5 * np.sum(W * G * dj2)
    grad[D] = 0.5 * np.sum(W * K)
    grad[D + 1] = 0.5 * params.noise_variance * np.trace(W)
    return float(value), grad


@dataclass(frozen=True, eq=False)
class TrainedSurrogate:
    inputs: np.ndarray
    targets: np.ndarray  # standardized
    target_mean: float
    target_std: float
    params: Optional[KernelParams]
    kernel: str
    chol: Optional[np.ndarray]
    alpha: Optional[np.ndarray]
    jitter: float = 0.0
    log_likelihood: float = 0.0

    @property
    def constant(self):
        return self.params is None

    @property
    def dimension(self):
        return self.inputs.shape[1]

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise DimensionMismatch.from_context(
                self.dimension, X.shape[-1] if X.ndim else 0
            )
        return X

    def _cross(self, X):
        k_unit, g_unit = Kernel.get(self.kernel).profile(
            _scaled_sqdist(X, self.inputs, self.params.lengthscales)
        )
        return self.params.signal_variance * k_unit

    def predict_mean(self, X):
        X = self._check(X)
        if self.constant:
            return np.full(len(X), self.target_mean)
        scaled = self._cross(X) @ self.alpha
        return self.target_mean + self.target_std * scaled

    def predict(self, X, standardized=False):
        """Posterior mean and standard deviation at the rows of `X`."""
        X = self._check(X)
        if self.constant:
            return np.full(len(X), self.target_mean), np.zeros(len(X))
        Ks = self._cross(X)
        mean = Ks @ self.alpha
        v = scipy.linalg.solve_triangular(self.chol, Ks.T, lower=True)
        var = self.params.signal_variance - np.sum(v * v, axis=0)
        std = np.sqrt(np.clip(var, 0.0, None))
        if standardized:
            return mean, std
        return self.target_mean + self.target_std * mean, self.target_std * std

    def mean_gradient(self, X):
        """Gradient of the posterior mean at the rows of `X` (m × D)."""
        X = self._check(X)
        if self.constant:
            return np.zeros_like(X)
        ls2 = self.params.lengthscales ** 2
        diff = X[:, None, :] - self.inputs[None, :, :]
        r2 = np.sum(diff * diff / ls2, axis=2)
        _, g = Kernel.get(self.kernel).profile(r2)
        coef = self.params.signal_variance * g * self.alpha[None, :]
        grad = -np.einsum("mn,mnd->md", coef, diff) / ls2
        return self.target_std * grad

    def dump(self, path):
        """Write hyperparameters and a training-set checksum as YAML."""
        raw = self.target_mean + self.target_std * self.targets
        data = {
            "kernel": self.kernel,
            "n": int(len(self.targets)),
            "dimension": int(self.dimension),
            "target_mean": float(self.target_mean),
            "target_std": float(self.target_std),
            "params": self.params.as_dict() if self.params else None,
            "jitter": float(self.jitter),
            "log_likelihood": float(self.log_likelihood),
            "checksum": array_checksum(self.inputs, raw),
        }
        with open(path, "w") as f:
            yaml.safe_dump(data, f, sort_keys=True)


def predict(model, x):
    """Posterior (mean, std) at a single unit-space point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch.from_context(model.dimension, x.size)
    mean, std = model.predict(x[None, :])
    return float(mean[0]), float(std[0])


def posterior_mean_grad(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch.from_context(model.dimension, x.size)
    return model.mean_gradient(x[None, :])[0]


def _training_data(inputs, targets):
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(targets, dtype=float).ravel()
    if len(X) != len(y):
        raise ValidationError.from_context(
            "{} inputs but {} targets".format(len(X), len(y))
        )
    if len(y) < 2:
        raise InsufficientData.from_context(len(y))
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
        raise ValidationError.from_context("training data must be finite")
    _, first, counts = np.unique(
        X, axis=0, return_index=True, return_counts=True
    )
    if np.any(counts > 1):
        raise DuplicateInputs.from_context(sorted(first[counts > 1]))
    return X, y


def _standardize(y):
    mean = float(np.mean(y))
    std = float(np.std(y))
    if std <= 1e-12 * max(1.0, abs(mean)):
        return mean, 0.0, np.zeros_like(y)
    return mean, std, (y - mean) / std


def condition(inputs, targets, params, kernel=Matern52.name):
    """Build a TrainedSurrogate for fixed hyperparameters."""
    X, y = _training_data(inputs, targets)
    Kernel.get(kernel)
    mean, std, z = _standardize(y)
    if std == 0.0:
        return TrainedSurrogate(
            X, z, mean, 0.0, None, kernel, None, None, 0.0, 0.0
        )
    if params.lengthscales.shape != (X.shape[1],):
        raise DimensionMismatch.from_context(
            X.shape[1], params.lengthscales.size
        )
    k_unit, _ = Kernel.get(kernel).profile(
        _scaled_sqdist(X, X, params.lengthscales)
    )
    L, jitter = _cholesky(
        params.signal_variance * k_unit, params.noise_variance
    )
    alpha = scipy.linalg.cho_solve((L, True), z)
    value = (
        -0.5 * z @ alpha
        - np.sum(np.log(np.diag(L)))
        - 0.5 * len(z) * math.log(2 * math.pi)
    )
    return TrainedSurrogate(
        X, z, mean, std, params, kernel, L, alpha, jitter, float(value)
    )


def hyperparameter_bounds(dimension):
    return [tuple(np.log(LENGTHSCALE_BOUNDS))] * dimension + [
        tuple(np.log(SIGNAL_BOUNDS)),
        tuple(np.log(NOISE_BOUNDS)),
    ]


def restart_thetas(dimension, restarts, rng):
    """Initial log-hyperparameters: fixed defaults, then random draws."""
    thetas = [
        np.log(np.concatenate([np.full(dimension, 0.3), [1.0, 1e-3]]))
    ]
    for _ in range(max(restarts, 1) - 1):
        thetas.append(
            np.concatenate(
                [
                    rng.uniform(np.log(0.05), np.log(2.0), dimension),
                    [rng.uniform(np.log(0.2), np.log(5.0))],
                    [rng.uniform(np.log(1e-6), np.log(1e-2))],
                ]
            )
        )
    return thetas


def fit(
    inputs, targets, restarts=DEFAULT_RESTARTS, rng=None, kernel=Matern52.name
):
    """Fit hyperparameters by maximizing the log marginal likelihood."""
    X, y = _training_data(inputs, targets)
    Kernel.get(kernel)
    if rng is None:
        rng = np.random.default_rng(0)
    mean, std, z = _standardize(y)
    if std == 0.0:
        output.annotate("surrogate: constant targets", debug=True)
        return condition(X, y, None, kernel)

    def objective(theta):
        try:
            value, grad = log_marginal_likelihood(
                KernelParams.from_theta(theta), X, z, kernel, gradient=True
            )
        except ConditioningError:
            return 1e10, np.zeros_like(theta)
        return -value, -grad

    bounds = hyperparameter_bounds(X.shape[1])
    best_theta, best_value = None, -np.inf
    for theta0 in restart_thetas(X.shape[1], restarts, rng):
        start_value = -objective(theta0)[0]
        if start_value > best_value:
            best_theta, best_value = theta0, start_value
        result = scipy.optimize.minimize(
            objective,
            theta0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 200},
        )
        value = -objective(result.x)[0]
        if value > best_value:
            best_theta, best_value = result.x, value

    params = KernelParams.from_theta(best_theta)
    model = condition(X, y, params, kernel)
    output.annotate(
        "surrogate: n={} restarts={} log-likelihood={:.4f} jitter={:g}".format(
            len(y), restarts, model.log_likelihood, model.jitter
        ),
        debug=True,
    )
    return model
