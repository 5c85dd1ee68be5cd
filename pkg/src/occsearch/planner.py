"""Fixed planning followed by adaptive planning, per seed.

Every seed runs the same pipeline with its own random stream::

    FP design -> simulate -> [fit per response -> propose -> simulate] x N

Seeds run in parallel; inside a seed everything is sequential and goes
through a single simulator channel.

"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from occsearch import (
    ConfigurationError,
    InsufficientData,
    ReportingException,
    RunFailed,
    SelectionExhausted,
    SimulatorFault,
    output,
)
from occsearch.acquisition import (
    DEFAULT_DELTA,
    DEFAULT_KAPPA,
    DEFAULT_STEP_SIZE,
    DEFAULT_STEPS,
    CandidatePool,
    refine_pool,
    select_candidate,
)
from occsearch.circuit import ConfigSection
from occsearch.hyperspace import ConfigurationPoint, normalize
from occsearch.sampling import (
    evaluation_minimum,
    evaluation_set,
    fixed_planning_set,
)
from occsearch.simulator import get_simulator
from occsearch.surrogate import DEFAULT_RESTARTS, KERNELS, Matern52, fit
from occsearch.utils import Timer

FP = "FP"


def ap_stage(iteration):
    return "AP{}".format(iteration)


def stage_index(stage):
    """FP -> 0, AP<i> -> i."""
    if stage == FP:
        return 0
    if stage.startswith("AP") and stage[2:].isdigit() and int(stage[2:]) > 0:
        return int(stage[2:])
    raise ValueError("unknown stage {!r}".format(stage))


def stage_label(stage):
    """Display form: FP, AP 1, AP 10."""
    index = stage_index(stage)
    return FP if index == 0 else "AP {}".format(index)


def parse_seeds(value):
    """`10` means seeds 0..9; `3, 5, 8` lists seeds explicitly."""
    value = str(value).strip()
    if "," in value:
        return tuple(int(v) for v in value.split(",") if v.strip())
    count = int(value)
    if count < 1:
        raise ValueError("need at least one seed")
    return tuple(range(count))


@dataclass
class RunConfig:
    circuit: object
    fp_budget: int = 100
    ap_iterations: int = 10
    eval_target: int = 5000
    seeds: Tuple[int, ...] = tuple(range(10))
    kappa: float = DEFAULT_KAPPA
    gd_steps: int = DEFAULT_STEPS
    gd_step_size: float = DEFAULT_STEP_SIZE
    refine_seeds: int = 64
    restarts: int = DEFAULT_RESTARTS
    kernel: str = Matern52.name
    jobs: Optional[int] = None
    oracle_density: int = 9
    delta: float = DEFAULT_DELTA

    # [run] option -> conversion
    OPTIONS = {
        "fp_budget": int,
        "ap_iterations": int,
        "eval_target": int,
        "seeds": parse_seeds,
        "kappa": float,
        "gd_steps": int,
        "gd_step_size": float,
        "refine_seeds": int,
        "restarts": int,
        "kernel": str.strip,
        "jobs": int,
        "oracle_density": int,
    }

    @classmethod
    def from_circuit(cls, circuit, **overrides):
        """Defaults < [run] section of the circuit file < overrides."""
        section = ConfigSection("run", circuit.settings.get("run", {}))
        for key in section:
            if key not in cls.OPTIONS:
                raise ConfigurationError.from_context(
                    "unknown option", "run.{}".format(key)
                )
        values = {}
        for key, conversion in cls.OPTIONS.items():
            value = section.convert(key, conversion)
            if value is not None:
                values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "seeds" in values:
            values["seeds"] = tuple(values["seeds"])
        config = cls(circuit, **values)
        config.validate()
        return config

    @classmethod
    def convert_overrides(cls, raw):
        """Convert textual overrides, e.g. command line flags."""
        given = {k: v for k, v in raw.items() if v is not None}
        section = ConfigSection("run", given)
        return {k: section.convert(k, cls.OPTIONS[k]) for k in given}

    def validate(self):
        def check(condition, field, message):
            if not condition:
                raise ConfigurationError.from_context(
                    message, "run.{}".format(field)
                )

        check(self.fp_budget >= 8, "fp_budget", "must be at least 8")
        check(self.ap_iterations >= 0, "ap_iterations", "must not be negative")
        minimum = evaluation_minimum(self.circuit)
        check(
            self.eval_target >= minimum,
            "eval_target",
            "must cover every vertex at every corner ({} points)".format(
                minimum
            ),
        )
        check(len(self.seeds) > 0, "seeds", "at least one seed is required")
        check(
            len(set(self.seeds)) == len(self.seeds), "seeds", "seeds repeat"
        )
        check(self.kappa >= 0, "kappa", "must not be negative")
        check(self.gd_steps >= 0, "gd_steps", "must not be negative")
        check(self.gd_step_size > 0, "gd_step_size", "must be positive")
        check(self.refine_seeds >= 1, "refine_seeds", "must be positive")
        check(self.restarts >= 1, "restarts", "must be positive")
        check(self.kernel in KERNELS, "kernel", "unknown kernel")
        check(self.jobs is None or self.jobs >= 1, "jobs", "must be positive")
        check(self.oracle_density >= 2, "oracle_density", "must be at least 2")
        return self

    @property
    def workers(self):
        if self.jobs is not None:
            return self.jobs
        return max(1, min(len(self.seeds), os.cpu_count() or 1))

    @property
    def simulation_count(self):
        """Simulations of a fault-free run."""
        per_seed = self.fp_budget + self.ap_iterations * len(self.circuit.specs)
        return len(self.seeds) * per_seed


@dataclass(frozen=True)
class Record:
    point: ConfigurationPoint
    values: Tuple[float, ...]
    stage: str

    def margins(self, specs):
        return tuple(spec.margin(v) for spec, v in zip(specs, self.values))


@dataclass
class Violation:
    """Worst simulated value of one response and whether it fails its spec."""

    response: str
    violated: bool
    value: Optional[float] = None
    point: Optional[ConfigurationPoint] = None
    stage: Optional[str] = None
    margin: Optional[float] = None
    count: int = 0


class RunState(object):
    """Everything simulated for one seed."""

    def __init__(self, model, seed):
        self.model = model
        self.seed = seed
        self.records: List[Record] = []
        self.iteration = 0
        # (stage, oriented best per response) after FP and every AP round
        self.trace: List[Tuple[str, Tuple[float, ...]]] = []
        self.faults: List[Tuple[str, ReportingException]] = []
        self.evaluation = None
        self.design = None
        # last surrogate fitted per response
        self.surrogates = {}
        self._unit = []

    def __len__(self):
        return len(self.records)

    def record(self, point, values, stage):
        self.model.validate(point)
        self.records.append(Record(point, tuple(values), stage))
        self._unit.append(normalize(point, self.model))

    def unit_inputs(self):
        return np.array(self._unit, dtype=float).reshape(
            len(self._unit), self.model.dimension
        )

    def targets(self, spec):
        """Oriented values of one response over all records."""
        r = self.model.specs.index(spec)
        return np.array([spec.orient(rec.values[r]) for rec in self.records])

    def best(self, spec, until=None):
        """First record with the lowest oriented value of `spec`."""
        r = self.model.specs.index(spec)
        best = None
        for rec in self.records:
            if until is not None and stage_index(rec.stage) > until:
                continue
            value = spec.orient(rec.values[r])
            if best is None or value < best[0]:
                best = (value, rec)
        return best

    @property
    def best_so_far(self) -> Dict[str, Tuple[float, Record]]:
        result = {}
        for spec in self.model.specs:
            best = self.best(spec)
            if best is not None:
                result[spec.name] = best
        return result

    @property
    def violations(self) -> Dict[str, List[Record]]:
        result = {}
        for r, spec in enumerate(self.model.specs):
            result[spec.name] = [
                rec for rec in self.records if spec.violated(rec.values[r])
            ]
        return result

    def checkpoint(self, stage):
        best = self.best_so_far
        self.trace.append(
            (
                stage,
                tuple(best[s.name][0] for s in self.model.specs),
            )
        )


def _report_violations(state, records):
    for rec in records:
        for spec, value in zip(state.model.specs, rec.values):
            if spec.violated(value):
                message = "{} violates {} (value {:.4f}, margin {:.4f})".format(
                    stage_label(rec.stage), spec.name, value, spec.margin(value)
                )
                output.annotate(
                    "seed {}: {}".format(state.seed, message),
                    debug=True,
                )


def run_fixed_planning(config, seed, simulator=None, rng=None):
    """Simulate the FP design of `seed` and return the new state."""
    model = config.circuit
    if rng is None:
        rng = np.random.default_rng(seed)
    state = RunState(model, seed)
    design = fixed_planning_set(model, config.fp_budget, rng)
    state.design = design
    own = simulator is None
    if own:
        simulator = get_simulator(model)
    try:
        for point in design.points:
            values = simulator.simulate(point)
            state.record(point, values, FP)
    except SimulatorFault as e:
        e.state = state
        raise
    finally:
        if own:
            simulator.close()
    state.checkpoint(FP)
    _report_violations(state, state.records)
    return state


def propose(state, config, rng):
    """One candidate per response, all from the data as of now."""
    model = state.model
    if state.evaluation is None:
        design = evaluation_set(model, config.eval_target, rng)
        state.evaluation = design.normalized()
    X = state.unit_inputs()
    history = X
    proposals = []
    for spec in model.specs:
        surrogate = fit(
            X, state.targets(spec), config.restarts, rng, config.kernel
        )
        state.surrogates[spec.name] = surrogate
        pool = CandidatePool.score_points(
            surrogate, state.evaluation, config.kappa
        )
        seeds = pool.top(config.refine_seeds).points
        refined = refine_pool(
            surrogate,
            seeds,
            config.gd_steps,
            config.gd_step_size,
            config.kappa,
            model.continuous_dims,
        )
        pool = pool.concat(refined.refined())
        point = select_candidate(
            pool, history, config.kappa, model, config.delta
        )
        proposals.append(point)
        history = np.vstack([history, normalize(point, model)])
    return proposals


def run_adaptive_iteration(state, config, rng, simulator):
    """Propose and simulate one candidate per response.

    A simulator fault or an exhausted pool discards the whole iteration; the
    fault is kept in `state.faults`.

    """
    if len(state) < 2:
        raise InsufficientData.from_context(len(state))
    state.iteration += 1
    stage = ap_stage(state.iteration)
    try:
        proposals = propose(state, config, rng)
        results = [simulator.simulate(point) for point in proposals]
    except (SimulatorFault, SelectionExhausted) as e:
        e.affected_seed = state.seed
        state.faults.append((stage, e))
        output.step(
            "seed {}".format(state.seed),
            "{} discarded: {}".format(stage_label(stage), e),
            red=True,
        )
    else:
        start = len(state.records)
        for point, values in zip(proposals, results):
            state.record(point, values, stage)
        _report_violations(state, state.records[start:])
    state.checkpoint(stage)
    return state


def run_seed(config, seed):
    rng = np.random.default_rng(seed)
    timer = Timer("seed {}".format(seed))
    context = "seed {}".format(seed)
    with get_simulator(config.circuit) as simulator:
        with timer.step("fp"):
            state = run_fixed_planning(config, seed, simulator, rng)
        output.step(
            context, "FP: {} simulations".format(len(state)), debug=True
        )
        for i in range(1, config.ap_iterations + 1):
            try:
                with timer.step("ap"):
                    run_adaptive_iteration(state, config, rng, simulator)
            except ReportingException as e:
                e.state = state
                raise
            best = ", ".join(
                "{}={:.4f}".format(s.name, s.unorient(v))
                for s, v in zip(config.circuit.specs, state.trace[-1][1])
            )
            output.step(
                context,
                "AP {}/{}: {}".format(i, config.ap_iterations, best),
                debug=True,
            )
    output.step(context, timer.humanize("fp", "ap", "total"), debug=True)
    return state


@dataclass
class RunReport:
    config: RunConfig
    states: List[RunState]
    failures: List[ReportingException] = field(default_factory=list)
    extrema: Optional[dict] = None

    @property
    def model(self):
        return self.config.circuit

    @property
    def seeds(self):
        return [s.seed for s in self.states]


def run(config, extrema=None):
    """Run all seeds; seeds that fail are reported and left out."""
    config.validate()
    get_simulator(config.circuit).close()
    output.step(
        "main",
        "{} seed(s), FP {}, {} AP iteration(s), {} worker(s)".format(
            len(config.seeds),
            config.fp_budget,
            config.ap_iterations,
            config.workers,
        ),
    )
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {
            seed: pool.submit(run_seed, config, seed) for seed in config.seeds
        }
        states, failures = [], []
        for seed in sorted(futures):
            try:
                states.append(futures[seed].result())
                output.step("seed {}".format(seed), "done")
            except ReportingException as e:
                e.affected_seed = seed
                failures.append(e)
                output.step(
                    "seed {}".format(seed), "failed: {}".format(e), red=True
                )
    if not states:
        raise RunFailed.from_context(config.seeds)
    return RunReport(config, states, failures, extrema)


def detect_violation(state, specs):
    """Per response: worst value found, where, when and whether it fails."""
    result = {}
    violations = state.violations if len(state) else {}
    for spec in specs:
        best = state.best(spec)
        if best is None:
            result[spec.name] = Violation(spec.name, False)
            continue
        r = state.model.specs.index(spec)
        rec = best[1]
        value = rec.values[r]
        result[spec.name] = Violation(
            spec.name,
            spec.violated(value),
            value,
            rec.point,
            rec.stage,
            spec.margin(value),
            len(violations.get(spec.name, [])),
        )
    return result
