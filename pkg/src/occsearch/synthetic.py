"""Closed-form benchmark circuit with known extrema.

Every response is a base function of the unit OC coordinates ``u`` followed
by the per-corner affine transform ``a * R + b``. Base functions (``d`` OCs,
``i = 0 .. d-1``)::

    multimodal  1.5 + 0.45 mean_i sin(2 pi u_i + 0.7 i)
                    + 0.25 mean_i cos(3 pi u_i)
                    - 2.0 exp(-mean_i (u_i - c_i)^2 / (2 * 0.15^2))
                with c_i = 0.72 for even i, 0.28 for odd i

    ridge       10 + 4 tanh(8 (p - 0.5)) + 0.6 sin(2 pi p)
                with p = sum_i w_i u_i / sum_i w_i, w_i = 1 + (i mod 3)

    affine      5 + sum_i beta_i u_i + 0.3 sum_i u_i u_{i+1}
                with beta_i = (-1)^i (1 + 0.25 i)

"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import yaml

from occsearch import (
    ConfigurationError,
    DegenerateResponse,
    OracleUnstable,
    UnsupportedBackend,
    ValidationError,
    output,
)
from occsearch.circuit import ConfigSection, parse_pair
from occsearch.hyperspace import Backend, ConfigurationPoint, Worst

DEFAULT_DENSITY = 9
MAX_DENSITY = 17
STABILITY = 0.1  # percent of the response range
POLISH_STARTS = 8
SWEEP_LEVELS = 401
SWEEPS = 3
CHUNK = 2 ** 16


def dip_centre(d):
    return np.where(np.arange(d) % 2 == 0, 0.72, 0.28)


def multimodal(u):
    u = np.atleast_2d(u)
    i = np.arange(u.shape[1])
    centre = dip_centre(u.shape[1])
    waves = 0.45 * np.mean(np.sin(2 * np.pi * u + 0.7 * i), axis=1)
    ripple = 0.25 * np.mean(np.cos(3 * np.pi * u), axis=1)
    dip = 2.0 * np.exp(-np.mean((u - centre) ** 2, axis=1) / (2 * 0.15 ** 2))
    return 1.5 + waves + ripple - dip


# Extra polish starts for the oracle.
multimodal.landmarks = lambda d: [dip_centre(d)]


def ridge(u):
    u = np.atleast_2d(u)
    w = 1.0 + np.arange(u.shape[1]) % 3
    p = u @ w / w.sum()
    return 10.0 + 4.0 * np.tanh(8.0 * (p - 0.5)) + 0.6 * np.sin(2 * np.pi * p)


def affine(u):
    u = np.atleast_2d(u)
    i = np.arange(u.shape[1])
    beta = np.where(i % 2 == 0, 1.0, -1.0) * (1.0 + 0.25 * i)
    pairs = np.sum(u[:, :-1] * u[:, 1:], axis=1)
    return 5.0 + u @ beta + 0.3 * pairs


FUNCTIONS = {
    "multimodal": multimodal,
    "ridge": ridge,
    "affine": affine,
}


def corner_transform(values, coefficients):
    """Elementwise a * R + b with one (a, b) pair per response."""
    values = np.asarray(values, dtype=float)
    coefficients = np.asarray(coefficients, dtype=float).reshape(-1, 2)
    return coefficients[:, 0] * values + coefficients[:, 1]


@dataclass(frozen=True)
class Extrema:
    """True extrema of one response over all OCs and corners."""

    response: str
    minimum: float
    maximum: float
    argmin: ConfigurationPoint
    argmax: ConfigurationPoint

    @property
    def range(self):
        return self.maximum - self.minimum

    def worst(self, spec):
        if spec.worst is Worst.MINIMIZE:
            return self.minimum
        return self.maximum


class SyntheticCircuit(object):
    def __init__(self, model):
        if model.backend != Backend.SYNTHETIC.value:
            raise UnsupportedBackend.from_context(
                model.backend, "synthetic evaluation"
            )
        self.model = model
        self.functions = []
        for spec in model.specs:
            name = spec.options.get("function")
            if name not in FUNCTIONS:
                raise ConfigurationError.from_context(
                    "expected one of {}, got {!r}".format(
                        ", ".join(sorted(FUNCTIONS)), name
                    ),
                    "response:{}.function".format(spec.name),
                )
            self.functions.append(FUNCTIONS[name])
        self.coefficients = self._load_coefficients()

    def _load_coefficients(self):
        """(a, b) per corner label and response; identity if not given."""
        model = self.model
        labels = model.corner.labels if model.corner else ("",)
        table = {label: [(1.0, 0.0)] * len(model.specs) for label in labels}
        for r, spec in enumerate(model.specs):
            section = "coefficients:{}".format(spec.name)
            if section not in model.settings:
                continue
            values = ConfigSection(section, model.settings[section])
            for key in values:
                if key not in table:
                    raise ConfigurationError.from_context(
                        "unknown corner label", "{}.{}".format(section, key)
                    )
            for label in labels:
                if label not in values:
                    raise ConfigurationError.from_context(
                        "missing coefficients", "{}.{}".format(section, label)
                    )
                a, b = values.convert(label, parse_pair)
                if a == 0:
                    raise ConfigurationError.from_context(
                        "coefficient a must not be zero",
                        "{}.{}".format(section, label),
                    )
                table[label] = list(table[label])
                table[label][r] = (a, b)
        return {label: tuple(pairs) for label, pairs in table.items()}

    def corner_coefficients(self, label):
        try:
            return self.coefficients[label]
        except KeyError:
            raise ValidationError.from_context(
                "unknown corner label {!r}".format(label), "corner"
            )

    def base_responses(self, unit):
        """Base values (m × responses) for unit OC coordinates (m × d)."""
        unit = np.atleast_2d(np.asarray(unit, dtype=float))
        return np.column_stack([f(unit) for f in self.functions])

    def corner_transform(self, values, label):
        return corner_transform(values, self.corner_coefficients(label))

    def evaluate(self, point):
        """Response vector of one validated configuration point."""
        model = self.model
        model.validate(point)
        unit = model.unit_oc_values([point.oc_values])
        base = self.base_responses(unit)[0]
        values = self.corner_transform(base, model.corner_label(point))
        return tuple(float(v) for v in values)


def base_responses(circuit, point):
    """Base response vector of `point` before the corner transform."""
    circuit.model.validate(point)
    unit = circuit.model.unit_oc_values([point.oc_values])
    return tuple(float(v) for v in circuit.base_responses(unit)[0])


def _grid_chunks(d, density):
    total = density ** d
    for start in range(0, total, CHUNK):
        index = np.arange(start, min(start + CHUNK, total))
        coords = np.unravel_index(index, (density,) * d)
        yield np.column_stack(coords) / (density - 1.0)


class _Candidates(object):
    """The `keep` lowest values seen so far and their points."""

    def __init__(self, keep):
        self.keep = keep
        self.values = np.empty(0)
        self.points = None

    def update(self, values, points):
        if self.points is not None:
            values = np.concatenate([self.values, values])
            points = np.vstack([self.points, points])
        if len(values) > self.keep:
            best = np.argpartition(values, self.keep)[: self.keep]
            values, points = values[best], points[best]
        order = np.lexsort(tuple(points.T[::-1]) + (values,))
        self.values, self.points = values[order], points[order]


def _sweep(function, sign, start, value):
    """Cyclic exhaustive line searches along each coordinate."""
    point = np.array(start, dtype=float)
    levels = np.linspace(0.0, 1.0, SWEEP_LEVELS)
    for _ in range(SWEEPS):
        for j in range(len(point)):
            trial = np.repeat(point[None, :], SWEEP_LEVELS, axis=0)
            trial[:, j] = levels
            values = sign * function(trial)
            k = int(np.argmin(values))
            if values[k] < value:
                point, value = trial[k].copy(), values[k]
    return value, point


def _polish(function, sign, start, start_value):
    def objective(u):
        return sign * function(np.clip(u, 0.0, 1.0)[None, :])[0]

    start_value, start = _sweep(function, sign, start, start_value)
    d = len(start)
    result = scipy.optimize.minimize(
        objective,
        start,
        method="Powell",
        bounds=[(0.0, 1.0)] * d,
        options={"xtol": 1e-8, "ftol": 1e-12, "direc": np.eye(d)},
    )
    point = np.clip(result.x, 0.0, 1.0)
    value = objective(point)
    if value < start_value:
        return value, point
    return start_value, start


def _base_extrema(circuit, density, polish=True):
    """Per base response: (min, argmin, max, argmax) in unit coordinates."""
    d = circuit.model.continuous_dims
    n = len(circuit.functions)
    candidates = [
        (_Candidates(POLISH_STARTS), _Candidates(POLISH_STARTS))
        for _ in range(n)
    ]
    for unit in _grid_chunks(d, density):
        values = circuit.base_responses(unit)
        for r in range(n):
            candidates[r][0].update(values[:, r], unit)
            candidates[r][1].update(-values[:, r], unit)

    result = []
    for r, function in enumerate(circuit.functions):
        extrema = []
        landmarks = getattr(function, "landmarks", lambda d: [])(d)
        for sign, found in zip((1.0, -1.0), candidates[r]):
            best_value, best_point = found.values[0], found.points[0]
            if polish:
                for value, start in zip(found.values, found.points):
                    value, point = _polish(function, sign, start, value)
                    if value < best_value:
                        best_value, best_point = value, point
                for start in landmarks:
                    value = sign * function(start[None, :])[0]
                    value, point = _polish(function, sign, start, value)
                    if value < best_value:
                        best_value, best_point = value, point
            extrema.append((sign * best_value, best_point))
        result.append(extrema)
    return result


def _change(fine, coarse):
    """Largest move of either extremum, in percent of the fine range."""
    (fmin, _), (fmax, _) = fine
    (cmin, _), (cmax, _) = coarse
    spread = fmax - fmin
    moved = max(abs(fmin - cmin), abs(fmax - cmax))
    if spread <= 0:
        return 0.0 if moved == 0 else math.inf
    return 100.0 * moved / spread


def _point(model, unit, label):
    values = model.lower + unit * (model.upper - model.lower)
    values = np.where(unit == 0.0, model.lower, values)
    values = np.where(unit == 1.0, model.upper, values)
    code = model.corner.encode(label) if model.corner else None
    return ConfigurationPoint(tuple(values.tolist()), code)


def oracle_extrema(
    circuit, density=DEFAULT_DENSITY, max_density=MAX_DENSITY, polish=True
):
    """True extrema per response over the OC box and all corners.

    The base responses are evaluated on a regular grid of `density` levels
    per OC and polished locally. The result is accepted once it agrees with
    the nested grid of (density + 1) // 2 levels within 0.1% of the range;
    otherwise the density is doubled up to `max_density`.

    """
    if density < 2:
        raise ValidationError.from_context(
            "grid density must be at least 2", "density"
        )
    model = circuit.model
    while True:
        output.step(
            "oracle",
            "grid density {} ({} points)".format(
                density, density ** model.continuous_dims
            ),
        )
        fine = _base_extrema(circuit, density, polish)
        coarse = _base_extrema(circuit, (density + 1) // 2, polish)
        changes = [_change(f, c) for f, c in zip(fine, coarse)]
        worst = int(np.argmax(changes))
        if changes[worst] <= STABILITY:
            break
        if 2 * density - 1 > max_density:
            raise OracleUnstable.from_context(
                model.specs[worst].name, density, changes[worst]
            )
        density = 2 * density - 1

    labels = model.corner.labels if model.corner else ("",)
    result = {}
    for r, spec in enumerate(model.specs):
        (base_min, unit_min), (base_max, unit_max) = fine[r]
        best_min = best_max = None
        for label in labels:
            a, b = circuit.corner_coefficients(label)[r]
            low = (a * base_min + b, unit_min)
            high = (a * base_max + b, unit_max)
            if a < 0:
                low, high = high, low
            if best_min is None or low[0] < best_min[0]:
                best_min = (low[0], low[1], label)
            if best_max is None or high[0] > best_max[0]:
                best_max = (high[0], high[1], label)
        if not best_max[0] > best_min[0]:
            raise DegenerateResponse.from_context(
                best_max[0] - best_min[0], spec.name
            )
        result[spec.name] = Extrema(
            spec.name,
            float(best_min[0]),
            float(best_max[0]),
            _point(model, best_min[1], best_min[2]),
            _point(model, best_max[1], best_max[2]),
        )
    return result


def _point_dict(model, point):
    data = {"oc": dict(zip(model.oc_names, point.oc_values))}
    if model.corner is not None:
        data["corner"] = model.corner_label(point)
    return data


def write_extrema(path, model, extrema):
    data = {"version": 1, "circuit": model.name, "responses": {}}
    for spec in model.specs:
        e = extrema[spec.name]
        data["responses"][spec.name] = {
            "min": e.minimum,
            "max": e.maximum,
            "argmin": _point_dict(model, e.argmin),
            "argmax": _point_dict(model, e.argmax),
        }
    with open(path, "w") as f:
        yaml.safe_dump(data, f, sort_keys=False)


def read_extrema(path, model):
    """Load an extrema file written by `write_extrema` for `model`."""
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError.from_context(
            "cannot read extrema file: {}".format(e), path
        )

    def point(entry):
        values = tuple(float(entry["oc"][name]) for name in model.oc_names)
        code = None
        if model.corner is not None:
            code = model.corner.encode(entry["corner"])
        return ConfigurationPoint(values, code)

    try:
        if data.get("version") != 1:
            raise ValueError(
                "unsupported version {!r}".format(data.get("version"))
            )
        result = {}
        for spec in model.specs:
            entry = data["responses"][spec.name]
            result[spec.name] = Extrema(
                spec.name,
                float(entry["min"]),
                float(entry["max"]),
                point(entry["argmin"]),
                point(entry["argmax"]),
            )
    except (
        AttributeError, KeyError, TypeError, ValueError, ValidationError
    ) as e:
        raise ConfigurationError.from_context(
            "invalid extrema file: {}".format(e), path
        )
    return result

