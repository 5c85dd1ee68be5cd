import argparse
import os
import os.path
import sys
from typing import Optional

import occsearch
from occsearch import ReportingException
from occsearch._output import NullBackend, TerminalBackend, output
from occsearch.circuit import load_circuit
from occsearch.planner import RunConfig, run
from occsearch.report import (
    EXTREMA,
    LOG,
    SUMMARY,
    dump_artifacts,
    emit_report,
    read_log,
    render_summary,
    violated,
)
from occsearch.synthetic import (
    MAX_DENSITY,
    SyntheticCircuit,
    oracle_extrema,
    read_extrema,
    write_extrema,
)
from occsearch.utils import locked

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 3

LOCKFILE = ".occsearch-lock"


def report_errors(errors):
    """Report errors once, listing all seeds that hit the same one."""
    pending = list(errors)
    while pending:
        first = pending.pop(0)
        same = [first] + [e for e in pending if first.should_merge(e)]
        pending = [e for e in pending if not first.should_merge(e)]
        error, seeds = first.merge(same)
        output.line("")
        error.report()
        if seeds:
            output.tabular(
                "Affected seeds", ", ".join(str(s) for s in seeds), red=True
            )


def cmd_run(
    circuit,
    out,
    seeds=None,
    fp_budget=None,
    ap_iterations=None,
    kappa=None,
    eval_target=None,
    jobs=None,
    extrema=None,
    dump=False,
):
    output.section("Preparing")
    output.step("main", "Loading circuit `{}` ...".format(circuit))
    model = load_circuit(circuit)
    overrides = RunConfig.convert_overrides(
        dict(
            seeds=seeds,
            fp_budget=fp_budget,
            ap_iterations=ap_iterations,
            kappa=kappa,
            eval_target=eval_target,
            jobs=jobs,
        )
    )
    config = RunConfig.from_circuit(model, **overrides)
    os.makedirs(out, exist_ok=True)
    with locked(os.path.join(out, LOCKFILE)):
        known = None
        if extrema:
            known = read_extrema(extrema, model)
        elif model.backend == "synthetic":
            output.section("Oracle")
            known = oracle_extrema(
                SyntheticCircuit(model),
                config.oracle_density,
                max(MAX_DENSITY, config.oracle_density),
            )
            write_extrema(os.path.join(out, EXTREMA), model, known)

        output.section("Searching")
        result = run(config, known)
        report_errors(result.failures)

        output.section("Summary")
        summary = emit_report(result, out)
        if dump:
            dump_artifacts(result, out)
        output.annotate(summary.rstrip("\n"))
        if violated(result.states, model):
            output.section("SPECIFICATION VIOLATED", red=True)
            return EXIT_VIOLATION
    output.section("No violation found", green=True)
    return EXIT_OK


def cmd_oracle(circuit, out, density=None):
    model = load_circuit(circuit)
    synthetic = SyntheticCircuit(model)
    if density is None:
        density = RunConfig.from_circuit(model).oracle_density
    found = oracle_extrema(synthetic, density, max(MAX_DENSITY, density))
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, EXTREMA)
    write_extrema(path, model, found)
    for name, e in found.items():
        output.tabular(
            name, "min {:.6f}  max {:.6f}".format(e.minimum, e.maximum)
        )
    output.step("oracle", "wrote {}".format(path))
    return EXIT_OK


def cmd_report(circuit, out, extrema=None):
    model = load_circuit(circuit)
    states = read_log(os.path.join(out, LOG), model)
    if extrema is None and os.path.exists(os.path.join(out, EXTREMA)):
        extrema = os.path.join(out, EXTREMA)
    known = read_extrema(extrema, model) if extrema else None
    summary = render_summary(model, states, known)
    with open(os.path.join(out, SUMMARY), "w") as f:
        f.write(summary)
    output.annotate(summary.rstrip("\n"))
    return EXIT_OK


def main(args: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        description=(
            "occsearch v{}: worst-case operating condition search"
        ).format(occsearch.__version__),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.set_defaults(func=parser.print_usage)

    parser.add_argument(
        "-d", "--debug", action="store_true", help="Enable debug mode."
    )

    subparsers = parser.add_subparsers()

    def common(p):
        p.add_argument(
            "--circuit",
            required=True,
            help="Circuit description file or name of a bundled circuit.",
        )
        p.add_argument(
            "--out", default="out", help="Directory for all artifacts."
        )

    # Run
    p = subparsers.add_parser("run", help="Search for worst-case conditions.")
    common(p)
    p.add_argument(
        "--seeds",
        default=None,
        help="Number of seeds (0..n-1) or a comma separated seed list.",
    )
    p.add_argument("--fp-budget", default=None)
    p.add_argument("--ap-iterations", default=None)
    p.add_argument("--kappa", default=None)
    p.add_argument("--eval-target", default=None)
    p.add_argument(
        "-j",
        "--jobs",
        default=None,
        help="Seeds running in parallel. Defaults to the number of CPUs.",
    )
    p.add_argument(
        "--extrema",
        default=None,
        help="Extrema file with true worst cases (enables ARVE/MRVE).",
    )
    p.add_argument(
        "--dump",
        action="store_true",
        help="Also write FP designs and fitted surrogates to --out.",
    )
    p.set_defaults(func=cmd_run)

    # Oracle
    p = subparsers.add_parser(
        "oracle", help="Compute true extrema of a synthetic circuit."
    )
    common(p)
    p.add_argument("--density", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    # Report
    p = subparsers.add_parser(
        "report", help="Regenerate the summary from a stored run log."
    )
    common(p)
    p.add_argument("--extrema", default=None)
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(args)

    # Consume global arguments
    output.enable_debug = args.debug

    # Pass over to function
    if args.func.__name__ == "print_usage":
        args.func()
        return EXIT_ERROR

    if isinstance(output.backend, NullBackend):
        output.backend = TerminalBackend()

    func_args = dict(args._get_kwargs())
    del func_args["func"]
    del func_args["debug"]
    try:
        return args.func(**func_args)
    except ReportingException as e:
        e.report()
        return EXIT_ERROR
    except Exception:
        output.error("Unexpected exception", exc_info=sys.exc_info())
        return EXIT_ERROR
