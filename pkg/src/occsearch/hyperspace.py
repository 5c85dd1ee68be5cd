"""The mixed continuous/categorical input space of a circuit.

Operating conditions (OCs) are continuous ranges, the process corner (PC) is a
categorical value encoded as a pair of small integers. Everything that is
handed to a surrogate lives in the *unit space*: OCs mapped affinely to
[0, 1] followed by the two corner integers divided by the largest code value.

"""

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from occsearch import (
    ConfigurationError,
    DimensionMismatch,
    NonFiniteResponse,
    OutOfBounds,
    ValidationError,
)


class Direction(enum.Enum):
    """Which side of the threshold a response has to stay on."""

    LOWER_BOUND = "lower"  # response must exceed the threshold
    UPPER_BOUND = "upper"  # response must stay below the threshold


class Worst(enum.Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class Backend(enum.Enum):
    SYNTHETIC = "synthetic"
    EXTERNAL = "external"


@dataclass(frozen=True)
class OperatingCondition:
    name: str
    min: float
    max: float

    def __post_init__(self):
        if not self.min < self.max:
            raise ConfigurationError.from_context(
                "min ({!r}) must be strictly below max ({!r})".format(
                    self.min, self.max
                ),
                "oc:{}".format(self.name),
            )


@dataclass(frozen=True)
class ProcessCorner:
    name: str
    labels: Tuple[str, ...]
    encoding: Dict[str, Tuple[int, int]]
    valid: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        section = "corner:{}".format(self.name)
        if not self.labels:
            raise ConfigurationError.from_context("no corner labels", section)
        if len(set(self.labels)) != len(self.labels):
            raise ConfigurationError.from_context(
                "duplicate corner labels", section
            )
        if set(self.encoding) != set(self.labels):
            raise ConfigurationError.from_context(
                "every label needs exactly one code pair", section
            )
        codes = [tuple(self.encoding[label]) for label in self.labels]
        for code in codes:
            if len(code) != 2 or any(int(c) != c or c < 0 for c in code):
                raise ConfigurationError.from_context(
                    "code {!r} is not a pair of non-negative integers".format(
                        code
                    ),
                    section,
                )
        if len(set(codes)) != len(codes):
            raise ConfigurationError.from_context(
                "corner encoding is not injective", section
            )
        if not self.valid:
            object.__setattr__(self, "valid", tuple(codes))
        elif set(map(tuple, self.valid)) != set(codes):
            raise ConfigurationError.from_context(
                "valid combinations do not match the labelled codes", section
            )

    def encode(self, label):
        try:
            return tuple(self.encoding[label])
        except KeyError:
            raise ValidationError.from_context(
                "unknown corner label {!r}".format(label), self.name
            )

    def decode(self, code):
        code = tuple(int(c) for c in code)
        for label in self.labels:
            if tuple(self.encoding[label]) == code:
                return label
        raise ValidationError.from_context(
            "invalid corner code {!r}".format(code), self.name
        )

    @property
    def codes(self):
        """Code pairs in label order."""
        return [tuple(self.encoding[label]) for label in self.labels]

    @property
    def max_code(self):
        return max(1, max(max(code) for code in self.codes))

    def snap(self, unit_pair):
        """Nearest valid code for a pair of unit-space corner coordinates."""
        target = np.asarray(unit_pair, dtype=float) * self.max_code
        codes = np.asarray(self.codes, dtype=float)
        distance = np.sum((codes - target) ** 2, axis=1)
        return self.codes[int(np.argmin(distance))]


@dataclass(frozen=True)
class ResponseSpec:
    name: str
    threshold: float
    direction: Direction
    # Backend specific settings, e.g. the synthetic base function.
    options: Dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def worst(self):
        return worst_direction(self)

    def margin(self, value):
        return margin(self, value)

    def violated(self, value):
        return margin(self, value) <= 0

    def orient(self, value):
        """Map a response value into the minimization convention."""
        if self.worst is Worst.MINIMIZE:
            return value
        return -value

    def unorient(self, value):
        return self.orient(value)


@dataclass(frozen=True)
class ConfigurationPoint:
    """One OCC: OC values in declaration order plus the corner code."""

    oc_values: Tuple[float, ...]
    corner_code: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(
            self, "oc_values", tuple(float(v) for v in self.oc_values)
        )
        if self.corner_code is not None:
            object.__setattr__(
                self, "corner_code", tuple(int(c) for c in self.corner_code)
            )


@dataclass(frozen=True)
class CircuitModel:
    name: str
    ocs: Tuple[OperatingCondition, ...]
    specs: Tuple[ResponseSpec, ...]
    corner: Optional[ProcessCorner] = None
    backend: str = Backend.SYNTHETIC.value
    # Raw backend settings ([external], [coefficients:*], ...).
    settings: Dict[str, Dict[str, str]] = field(
        default_factory=dict, compare=False
    )

    def __post_init__(self):
        if not self.ocs:
            raise ConfigurationError.from_context(
                "at least one operating condition is required", "oc"
            )
        names = [oc.name for oc in self.ocs]
        if len(set(names)) != len(names):
            raise ConfigurationError.from_context(
                "operating condition names must be unique", "oc"
            )
        if not self.specs:
            raise ConfigurationError.from_context(
                "at least one response specification is required", "response"
            )
        names = [spec.name for spec in self.specs]
        if len(set(names)) != len(names):
            raise ConfigurationError.from_context(
                "response names must be unique", "response"
            )

    @property
    def continuous_dims(self):
        return len(self.ocs)

    @property
    def dimension(self):
        """Number of unit-space coordinates."""
        return len(self.ocs) + (2 if self.corner is not None else 0)

    @property
    def oc_names(self):
        return [oc.name for oc in self.ocs]

    @property
    def response_names(self):
        return [spec.name for spec in self.specs]

    @property
    def lower(self):
        return np.array([oc.min for oc in self.ocs])

    @property
    def upper(self):
        return np.array([oc.max for oc in self.ocs])

    @property
    def corner_codes(self):
        if self.corner is None:
            return [None]
        return self.corner.codes

    def corner_label(self, point):
        if self.corner is None:
            return ""
        return self.corner.decode(point.corner_code)

    def spec(self, name):
        for spec in self.specs:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def validate(self, point):
        if len(point.oc_values) != len(self.ocs):
            raise DimensionMismatch.from_context(
                len(self.ocs), len(point.oc_values)
            )
        for oc, value in zip(self.ocs, point.oc_values):
            if not math.isfinite(value) or not oc.min <= value <= oc.max:
                raise OutOfBounds.from_context(oc.name, value, oc.min, oc.max)
        if self.corner is None:
            if point.corner_code is not None:
                raise ValidationError.from_context(
                    "circuit has no process corner", "corner"
                )
        else:
            if point.corner_code is None:
                raise ValidationError.from_context(
                    "corner code missing", self.corner.name
                )
            self.corner.decode(point.corner_code)
        return point

    def normalize(self, point):
        return normalize(point, self)

    def unit_oc_values(self, oc_values):
        """OC coordinates (m × d) mapped into the unit box."""
        oc_values = np.asarray(oc_values, dtype=float)
        return (oc_values - self.lower) / (self.upper - self.lower)

    def normalize_many(self, oc_values, corner_codes=None):
        """Vectorised normalization of already validated raw arrays."""
        unit = self.unit_oc_values(oc_values)
        if self.corner is None:
            return unit
        codes = np.asarray(corner_codes, dtype=float).reshape(-1, 2)
        return np.hstack([unit, codes / self.corner.max_code])

    def denormalize(self, vector):
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.dimension,):
            raise DimensionMismatch.from_context(self.dimension, vector.size)
        d = self.continuous_dims
        unit = np.clip(vector[:d], 0.0, 1.0)
        values = self.lower + unit * (self.upper - self.lower)
        # Keep the endpoints exact.
        values = np.where(unit == 0.0, self.lower, values)
        values = np.where(unit == 1.0, self.upper, values)
        code = None
        if self.corner is not None:
            code = self.corner.snap(vector[d:])
        return ConfigurationPoint(tuple(values.tolist()), code)


def normalize(point, model):
    """Map a valid point into the unit space of `model`."""
    model.validate(point)
    values = np.asarray(point.oc_values, dtype=float)
    unit = (values - model.lower) / (model.upper - model.lower)
    if model.corner is None:
        return unit
    code = np.asarray(point.corner_code, dtype=float) / model.corner.max_code
    return np.concatenate([unit, code])


def margin(spec, value):
    """Signed distance to the threshold; positive means satisfied."""
    if not math.isfinite(value):
        raise NonFiniteResponse.from_context(spec.name, value)
    if spec.direction is Direction.LOWER_BOUND:
        return value - spec.threshold
    return spec.threshold - value


def worst_direction(spec):
    if spec.direction is Direction.LOWER_BOUND:
        return Worst.MINIMIZE
    return Worst.MAXIMIZE
