"""Designs of experiments over a circuit's input space.

Two designs are built from three ingredients:

* the Fixed Planning (FP) training set: a two-level orthogonal array plus
  Latin hypercube samples filling the budget;
* the evaluation set: the two-level full factorial plus Latin hypercube
  samples up to the target size (5000 by default).

Process corners are assigned round-robin over the valid corner labels, in the
order the points appear in the final design.

"""

import csv
import enum
import itertools
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg
from scipy.stats import qmc

from occsearch import (
    BudgetError,
    CapabilityError,
    EmptyDesign,
    ValidationError,
    output,
)
from occsearch.hyperspace import ConfigurationPoint

FULL_FACTORIAL_CAP = 2 ** 20


class Provenance(enum.Enum):
    FULL_FACTORIAL = "FF"
    LHS = "LHS"
    OA = "OA"


@dataclass(frozen=True, eq=False)
class DesignSet:
    """Points of a design as raw arrays.

    `oc_values` holds physical OC values (n × d), `corner_codes` the integer
    corner pairs (n × 2, or n × 0 for circuits without a corner).

    """

    model: object
    oc_values: np.ndarray
    corner_codes: np.ndarray
    provenance: Tuple[Provenance, ...]

    def __len__(self):
        return len(self.provenance)

    @property
    def points(self):
        result = []
        for values, code in zip(self.oc_values, self.corner_codes):
            code = tuple(int(c) for c in code) if code.size else None
            result.append(ConfigurationPoint(tuple(values.tolist()), code))
        return result

    def normalized(self):
        if self.model.corner is None:
            return self.model.normalize_many(self.oc_values)
        return self.model.normalize_many(self.oc_values, self.corner_codes)

    def count(self, provenance):
        return sum(1 for p in self.provenance if p is provenance)

    def concat(self, other):
        return DesignSet(
            self.model,
            np.vstack([self.oc_values, other.oc_values]),
            np.vstack([self.corner_codes, other.corner_codes]),
            self.provenance + other.provenance,
        )

    def with_round_robin_corners(self):
        return DesignSet(
            self.model,
            self.oc_values,
            round_robin_codes(self.model, len(self)),
            self.provenance,
        )

    def crossed_with_corners(self):
        """Every point once per valid corner, corners varying fastest."""
        if self.model.corner is None:
            return self
        codes = np.asarray(self.model.corner.codes, dtype=int)
        k = len(codes)
        return DesignSet(
            self.model,
            np.repeat(self.oc_values, k, axis=0),
            np.tile(codes, (len(self), 1)),
            tuple(p for p in self.provenance for _ in range(k)),
        )

    def deduplicated(self):
        """Drop repeated points, keeping the first occurrence."""
        unit = self.normalized()
        seen = set()
        keep = []
        for i, row in enumerate(unit):
            key = row.tobytes()
            if key in seen:
                continue
            seen.add(key)
            keep.append(i)
        if len(keep) == len(self):
            return self
        output.annotate(
            "design: dropped {} duplicate point(s)".format(
                len(self) - len(keep)
            ),
            debug=True,
        )
        return DesignSet(
            self.model,
            self.oc_values[keep],
            self.corner_codes[keep],
            tuple(self.provenance[i] for i in keep),
        )

    def to_csv(self, path):
        model = self.model
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(model.oc_names + ["corner", "provenance"])
            for point, tag in zip(self.points, self.provenance):
                writer.writerow(
                    [repr(v) for v in point.oc_values]
                    + [model.corner_label(point), tag.value]
                )


def round_robin_codes(model, n):
    if model.corner is None:
        return np.zeros((n, 0), dtype=int)
    codes = np.asarray(model.corner.codes, dtype=int)
    return codes[np.arange(n) % len(codes)]


def _design(model, unit, provenance):
    """Scale a unit-cube sample to the OC ranges; corners round-robin."""
    unit = np.asarray(unit, dtype=float)
    values = qmc.scale(unit, model.lower, model.upper)
    # Keep vertices exact.
    values = np.where(unit == 0.0, model.lower, values)
    values = np.where(unit == 1.0, model.upper, values)
    return DesignSet(
        model,
        values,
        round_robin_codes(model, len(unit)),
        (provenance,) * len(unit),
    )


def full_factorial(model, levels=2, cap=FULL_FACTORIAL_CAP):
    """All `levels`^d combinations of equally spaced OC levels."""
    if levels < 2:
        raise ValidationError.from_context(
            "full factorial needs at least 2 levels, got {}".format(levels)
        )
    d = model.continuous_dims
    size = levels ** d
    if size > cap:
        raise BudgetError.from_context(
            "full factorial too large", size, cap
        )
    grid = np.linspace(0.0, 1.0, levels)
    unit = np.array(list(itertools.product(grid, repeat=d)), dtype=float)
    return _design(model, unit, Provenance.FULL_FACTORIAL)


def latin_hypercube(model, n, rng):
    """`n` samples with exactly one sample per stratum and dimension."""
    if n < 1:
        raise EmptyDesign.from_context("Latin hypercube")
    sampler = qmc.LatinHypercube(d=model.continuous_dims, rng=rng)
    return _design(model, sampler.random(n), Provenance.LHS)


def _next_power_of_two(n):
    power = 1
    while power < n:
        power *= 2
    return power


def orthogonal_array(model, strength2_runs):
    """Two-level strength-2 orthogonal array from a Sylvester-Hadamard matrix.

    Column j of the array is column j+1 of the Hadamard matrix of order
    `strength2_runs`; -1 maps to the OC minimum, +1 to the maximum.

    """
    d = model.continuous_dims
    runs = strength2_runs
    valid = runs >= 4 and runs >= d + 1 and runs == _next_power_of_two(runs)
    if not valid:
        suggestion = _next_power_of_two(max(runs, d + 1, 4))
        raise CapabilityError.from_context(runs, d, suggestion)
    hadamard = scipy.linalg.hadamard(runs)
    unit = (hadamard[:, 1 : d + 1] + 1) / 2.0
    return _design(model, unit, Provenance.OA)


def minimum_oa_runs(model):
    """Size of the smallest (saturated) two-level array for the model."""
    return _next_power_of_two(max(4, model.continuous_dims + 1))


def fixed_planning_set(model, budget, rng):
    """OA plus LHS points, `budget` points in total."""
    if budget < 8:
        raise BudgetError.from_context(
            "fixed planning budget too small", budget, 8
        )
    runs = minimum_oa_runs(model)
    if runs > budget:
        raise BudgetError.from_context(
            "fixed planning budget below the smallest orthogonal array",
            budget,
            runs,
        )
    design = orthogonal_array(model, runs)
    if budget > runs:
        design = design.concat(latin_hypercube(model, budget - runs, rng))
    design = design.with_round_robin_corners().deduplicated()
    output.annotate(
        "FP design: {} OA + {} LHS points".format(
            design.count(Provenance.OA), design.count(Provenance.LHS)
        ),
        debug=True,
    )
    return design


def evaluation_minimum(model):
    """Two-level full factorial size times the number of valid corners."""
    corners = len(model.corner.codes) if model.corner is not None else 1
    return 2 ** model.continuous_dims * corners


def evaluation_set(model, target, rng):
    """Every vertex at every corner, plus LHS up to `target` points."""
    size = evaluation_minimum(model)
    if target < size:
        raise BudgetError.from_context(
            "evaluation target below the full factorial at all corners",
            target,
            size,
        )
    design = full_factorial(model, 2).crossed_with_corners()
    if target > size:
        design = design.concat(latin_hypercube(model, target - size, rng))
    return design.deduplicated()
