"""Candidate scoring and selection.

All searches minimize: surrogates are trained on oriented responses, so the
lowest Lower Confidence Bound marks the point most likely to fail its spec.

"""

import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from occsearch import SelectionExhausted, ValidationError, output

DEFAULT_KAPPA = 2.0
DEFAULT_STEPS = 50
DEFAULT_STEP_SIZE = 0.05
DEFAULT_DELTA = 1e-6
MIN_GAIN = 1e-9
MAX_HALVINGS = 20


class Origin(enum.Enum):
    EVALUATION = "evaluation"
    REFINED = "refined"


def lcb(mean, std, kappa=DEFAULT_KAPPA):
    """Lower Confidence Bound mean - kappa * std (scalars or arrays)."""
    std = np.asarray(std, dtype=float)
    if np.any(std < 0):
        raise ValidationError.from_context(
            "standard deviation must not be negative", "std"
        )
    if kappa < 0:
        raise ValidationError.from_context(
            "kappa must not be negative", "kappa"
        )
    score = np.asarray(mean, dtype=float) - kappa * std
    if score.ndim == 0:
        return float(score)
    return score


@dataclass(frozen=True, eq=False)
class CandidatePool:
    points: np.ndarray  # unit space, m × D
    mean: np.ndarray
    std: np.ndarray
    score: np.ndarray
    origin: Tuple[Origin, ...]

    def __len__(self):
        return len(self.origin)

    @classmethod
    def score_points(cls, model, points, kappa=DEFAULT_KAPPA, origin=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mean, std = model.predict(points)
        if origin is None:
            origin = Origin.EVALUATION
        origins = (origin,) * len(points)
        return cls(points, mean, std, lcb(mean, std, kappa), origins)

    def concat(self, other):
        return CandidatePool(
            np.vstack([self.points, other.points]),
            np.concatenate([self.mean, other.mean]),
            np.concatenate([self.std, other.std]),
            np.concatenate([self.score, other.score]),
            self.origin + other.origin,
        )

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return CandidatePool(
            self.points[indices],
            self.mean[indices],
            self.std[indices],
            self.score[indices],
            tuple(self.origin[i] for i in indices),
        )

    def refined(self):
        return self.subset(
            [i for i, o in enumerate(self.origin) if o is Origin.REFINED]
        )

    def ranking(self, kappa=None):
        """Indices from best to worst LCB with deterministic tie-breaks."""
        score = self.score if kappa is None else lcb(self.mean, self.std, kappa)
        # lexsort: last key is primary.
        columns = reversed(range(self.points.shape[1]))
        keys = tuple(self.points[:, j] for j in columns)
        return np.lexsort(keys + (self.mean, score))

    def top(self, count, kappa=None):
        return self.subset(self.ranking(kappa)[:count])


def _project_gradient(X, grad, continuous_dims):
    grad = grad.copy()
    grad[:, continuous_dims:] = 0.0
    unit = X[:, :continuous_dims]
    g = grad[:, :continuous_dims]
    # Descending along -grad must not leave the box.
    g[(unit <= 0.0) & (g > 0)] = 0.0
    g[(unit >= 1.0) & (g < 0)] = 0.0
    return grad


def refine_pool(
    model,
    seeds,
    steps=DEFAULT_STEPS,
    step_size=DEFAULT_STEP_SIZE,
    kappa=DEFAULT_KAPPA,
    continuous_dims=None,
):
    """Descend the posterior mean from every seed point.

    Continuous coordinates move along the normalized negative gradient with
    backtracking; a step is accepted only if it strictly lowers the mean.
    Coordinates past `continuous_dims` (the corner) stay fixed.

    Returns the seeds plus every point that actually moved.

    """
    if steps < 0:
        raise ValidationError.from_context(
            "steps must not be negative", "steps"
        )
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if continuous_dims is None:
        continuous_dims = seeds.shape[1]
    pool = CandidatePool.score_points(model, seeds, kappa)
    if steps == 0 or model.constant:
        return pool

    X = seeds.copy()
    mean = model.predict_mean(X)
    active = np.ones(len(X), dtype=bool)
    for _ in range(steps):
        idx = np.flatnonzero(active)
        if not idx.size:
            break
        grad = _project_gradient(
            X[idx], model.mean_gradient(X[idx]), continuous_dims
        )
        norm = np.linalg.norm(grad, axis=1)
        moving = norm > 0
        active[idx[~moving]] = False
        idx, grad, norm = idx[moving], grad[moving], norm[moving]
        if not idx.size:
            break
        direction = -grad / norm[:, None]

        eta = np.full(len(idx), float(step_size))
        accepted = np.zeros(len(idx), dtype=bool)
        new_X = X[idx].copy()
        new_mean = mean[idx].copy()
        for _ in range(MAX_HALVINGS):
            pending = np.flatnonzero(~accepted)
            if not pending.size:
                break
            trial = X[idx[pending]] + eta[pending, None] * direction[pending]
            box = trial[:, :continuous_dims]
            trial[:, :continuous_dims] = np.clip(box, 0.0, 1.0)
            trial_mean = model.predict_mean(trial)
            better = trial_mean < mean[idx[pending]]
            new_X[pending[better]] = trial[better]
            new_mean[pending[better]] = trial_mean[better]
            accepted[pending[better]] = True
            eta[pending[~better]] /= 2.0

        gain = mean[idx] - new_mean
        X[idx[accepted]] = new_X[accepted]
        mean[idx[accepted]] = new_mean[accepted]
        active[idx[~accepted | (gain < MIN_GAIN)]] = False

    moved = np.any(X != seeds, axis=1)
    output.annotate(
        "refine: {} of {} seed(s) moved".format(int(moved.sum()), len(seeds)),
        debug=True,
    )
    if not moved.any():
        return pool
    return pool.concat(
        CandidatePool.score_points(model, X[moved], kappa, Origin.REFINED)
    )


def select_index(pool, history, kappa=DEFAULT_KAPPA, delta=DEFAULT_DELTA):
    """Index of the best pool point not within `delta` of `history`."""
    if not len(pool):
        raise SelectionExhausted.from_context(0, delta)
    history = np.asarray(history, dtype=float)
    fresh = np.ones(len(pool), dtype=bool)
    if history.size:
        history = history.reshape(-1, pool.points.shape[1])
        fresh = cdist(pool.points, history).min(axis=1) > delta
    for i in pool.ranking(kappa):
        if fresh[i]:
            return int(i)
    raise SelectionExhausted.from_context(len(pool), delta)


def select_candidate(pool, history, kappa, model, delta=DEFAULT_DELTA):
    """Next configuration point to simulate, in physical units."""
    index = select_index(pool, history, kappa, delta)
    return model.denormalize(pool.points[index])
