"""Relative value errors, Table-style summaries and run artifacts.

The run log is a CSV file with the columns::

    seed, stage, <oc names...>, corner, <response names...>,
    margin_<response>...

Floats are written with ``repr`` so a summary regenerated from the log is
byte-identical to the one written by the run.

"""

import csv
import math
import os.path
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from occsearch import (
    DegenerateResponse,
    LogError,
    ValidationError,
    output,
)
from occsearch.circuit import RESOURCES
from occsearch.hyperspace import ConfigurationPoint, Worst
from occsearch.planner import (
    FP,
    RunState,
    detect_violation,
    stage_index,
    stage_label,
)
from occsearch.template import TemplateEngine
from occsearch.utils import format_decimal

LOG = "log.csv"
FAILED_LOG = "failed.csv"
SUMMARY = "summary.txt"
EXTREMA = "extrema.yaml"
DESIGN = "fp-design-seed{seed}.csv"
SURROGATE = "surrogate-seed{seed}-{response}.yaml"


def rve(found, true_worst, true_range):
    """Relative value error in percent of the true response range."""
    if not true_range > 0:
        raise DegenerateResponse.from_context(true_range)
    return 100.0 * abs(found - true_worst) / true_range


@dataclass
class ResponseOutcome:
    response: str
    value: float
    point: ConfigurationPoint
    stage: str
    rve: Optional[float] = None


@dataclass
class SeedOutcome:
    """Worst case found by one seed up to and including a stage."""

    seed: int
    stage: str
    responses: Dict[str, ResponseOutcome] = field(default_factory=dict)

    @property
    def rves(self):
        return [r.rve for r in self.responses.values()]


def seed_outcome(state, stage=None, extrema=None):
    until = None if stage is None else stage_index(stage)
    outcome = SeedOutcome(state.seed, stage or "all")
    for r, spec in enumerate(state.model.specs):
        best = state.best(spec, until)
        if best is None:
            continue
        rec = best[1]
        value = rec.values[r]
        error = None
        if extrema is not None:
            e = extrema[spec.name]
            error = rve(value, e.worst(spec), e.range)
        outcome.responses[spec.name] = ResponseOutcome(
            spec.name, value, rec.point, rec.stage, error
        )
    return outcome


def _all_rves(outcomes):
    if not outcomes:
        raise ValidationError.from_context("no outcomes to aggregate")
    rves = [v for o in outcomes for v in o.rves]
    if not rves or any(v is None for v in rves):
        raise ValidationError.from_context("true extrema are not known")
    return rves


def arve(outcomes):
    """Mean RVE over all seeds and responses."""
    rves = _all_rves(outcomes)
    return math.fsum(rves) / len(rves)


def mrve(outcomes):
    return max(_all_rves(outcomes))


def summarize(values):
    """(min, max, average) of per-seed values."""
    values = list(values)
    if not values:
        raise ValidationError.from_context("nothing to summarize")
    low, high = min(values), max(values)
    average = math.fsum(values) / len(values)
    return low, high, min(max(average, low), high)


def checkpoints(states):
    """FP, AP 1 and the last AP iteration present in the data."""
    last = max(
        (stage_index(rec.stage) for s in states for rec in s.records),
        default=0,
    )
    stages = [FP]
    if last >= 1:
        stages.append("AP1")
    if last > 1:
        stages.append("AP{}".format(last))
    return stages


def describe_point(model, point):
    parts = [
        "{}={}".format(name, format_decimal(v))
        for name, v in zip(model.oc_names, point.oc_values)
    ]
    if model.corner is not None:
        label = model.corner_label(point)
        parts.append("{}={}".format(model.corner.name, label))
    return " ".join(parts)


def summary_data(model, states, extrema=None):
    states = sorted(states, key=lambda s: s.seed)
    blocks = []
    for stage in checkpoints(states):
        outcomes = [seed_outcome(s, stage, extrema) for s in states]
        rows = []
        for spec in model.specs:
            values = [
                o.responses[spec.name].value
                for o in outcomes
                if spec.name in o.responses
            ]
            low, high, average = summarize(values)
            row = {
                "response": spec.name,
                "worst": "min" if spec.worst is Worst.MINIMIZE else "max",
                "min": low,
                "max": high,
                "average": average,
            }
            if extrema is not None:
                per_response = [
                    SeedOutcome(
                        o.seed, stage, {spec.name: o.responses[spec.name]}
                    )
                    for o in outcomes
                ]
                row["true_worst"] = extrema[spec.name].worst(spec)
                row["arve"] = arve(per_response)
                row["mrve"] = mrve(per_response)
            rows.append(row)
        block = {"stage": stage_label(stage), "rows": rows, "extrema": False}
        if extrema is not None:
            block.update(
                extrema=True, arve=arve(outcomes), mrve=mrve(outcomes)
            )
        blocks.append(block)

    violations = []
    for state in states:
        found = detect_violation(state, model.specs)
        for spec in model.specs:
            v = found[spec.name]
            if not v.violated:
                continue
            violations.append(
                {
                    "response": spec.name,
                    "seed": state.seed,
                    "stage": stage_label(v.stage),
                    "value": v.value,
                    "margin": v.margin,
                    "count": v.count,
                    "point": describe_point(model, v.point),
                }
            )
    return {
        "circuit": model.name,
        "seeds": [s.seed for s in states],
        "simulations": sum(len(s) for s in states),
        "blocks": blocks,
        "violations": violations,
    }


def render_summary(model, states, extrema=None):
    engine = TemplateEngine.get("jinja2", RESOURCES)
    return engine.template("summary.txt", summary_data(model, states, extrema))


def log_header(model):
    return (
        ["seed", "stage"]
        + model.oc_names
        + ["corner"]
        + model.response_names
        + ["margin_{}".format(name) for name in model.response_names]
    )


def write_log(path, model, states):
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(log_header(model))
            for state in sorted(states, key=lambda s: s.seed):
                for rec in state.records:
                    writer.writerow(
                        [state.seed, rec.stage]
                        + [repr(v) for v in rec.point.oc_values]
                        + [model.corner_label(rec.point)]
                        + [repr(v) for v in rec.values]
                        + [repr(m) for m in rec.margins(model.specs)]
                    )
    except OSError as e:
        raise LogError.from_context(path, e.strerror)


def read_log(path, model):
    """Rebuild the per-seed states of a run log."""
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise LogError.from_context(path, e.strerror)
    if not rows:
        raise LogError.from_context(path, "empty file")
    if rows[0] != log_header(model):
        raise LogError.from_context(path, "columns do not match the circuit")
    if len(rows) == 1:
        raise LogError.from_context(path, "no simulations recorded")

    d = model.continuous_dims
    n = len(model.specs)
    states = {}
    for number, row in enumerate(rows[1:], 2):
        try:
            if len(row) != len(rows[0]):
                raise ValueError("expected {} fields".format(len(rows[0])))
            seed = int(row[0])
            stage = row[1]
            stage_index(stage)
            values = tuple(float(v) for v in row[2 : 2 + d])
            label = row[2 + d]
            code = model.corner.encode(label) if model.corner else None
            responses = tuple(float(v) for v in row[3 + d : 3 + d + n])
            state = states.setdefault(seed, RunState(model, seed))
            state.record(ConfigurationPoint(values, code), responses, stage)
        except (ValueError, ValidationError) as e:
            raise LogError.from_context(
                path, "line {}: {}".format(number, e)
            )
    result = [states[seed] for seed in sorted(states)]
    for state in result:
        state.iteration = max(stage_index(r.stage) for r in state.records)
    return result


def emit_report(report, out):
    """Write log, summary and partial logs of failed seeds to `out`."""
    model = report.model
    write_log(os.path.join(out, LOG), model, report.states)
    partial = [
        e.state
        for e in report.failures
        if getattr(e, "state", None) is not None and len(e.state)
    ]
    if partial:
        write_log(os.path.join(out, FAILED_LOG), model, partial)
    summary = render_summary(model, report.states, report.extrema)
    path = os.path.join(out, SUMMARY)
    try:
        with open(path, "w") as f:
            f.write(summary)
    except OSError as e:
        raise LogError.from_context(path, e.strerror)
    output.step("report", "wrote {}".format(path))
    return summary


def dump_artifacts(report, out):
    """Write each seed's FP design and last surrogates next to the log."""
    paths = []
    for state in report.states:
        if state.design is not None:
            path = os.path.join(out, DESIGN.format(seed=state.seed))
            state.design.to_csv(path)
            paths.append(path)
        for name in sorted(state.surrogates):
            path = os.path.join(
                out, SURROGATE.format(seed=state.seed, response=name)
            )
            state.surrogates[name].dump(path)
            paths.append(path)
    output.step("report", "dumped {} file(s)".format(len(paths)))
    return paths


def violated(states, model) -> List[str]:
    """Names of responses with at least one violating simulation."""
    names = []
    for spec in model.specs:
        for state in states:
            if detect_violation(state, [spec])[spec.name].violated:
                names.append(spec.name)
                break
    return names
