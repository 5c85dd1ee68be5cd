import os
import shlex
import sys
import textwrap

import pytest

from occsearch.circuit import load_circuit
from occsearch.hyperspace import (
    CircuitModel,
    Direction,
    OperatingCondition,
    ProcessCorner,
    ResponseSpec,
)


@pytest.fixture
def circuit_2d():
    return load_circuit("synthetic-2d")


@pytest.fixture
def circuit_7d():
    return load_circuit("synthetic")


@pytest.fixture
def plain_circuit():
    """Two OCs on different scales, no corner, one affine response."""
    return CircuitModel(
        name="plain",
        ocs=(
            OperatingCondition("vdd", 1.0, 2.0),
            OperatingCondition("temp", -40.0, 125.0),
        ),
        specs=(
            ResponseSpec(
                "gain", 4.0, Direction.LOWER_BOUND, {"function": "affine"}
            ),
        ),
    )


@pytest.fixture
def corner():
    labels = ("nominal", "ss", "ff", "sf", "fs", "sg")
    codes = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
    return ProcessCorner("process", labels, dict(zip(labels, codes)))


@pytest.fixture
def write_circuit(tmp_path):
    """Write an INI circuit description and return its path."""

    def write(content, name="circuit.cfg"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(content))
        return str(path)

    return write


STUB = """\
import sys
import time

mode = sys.argv[1]
for line in sys.stdin:
    parts = line.split()
    if mode == "echo":
        print("9.80 30.81 -33.72", flush=True)
    elif mode == "err":
        print("ERR convergence", flush=True)
    elif mode == "short":
        print("9.80 30.81", flush=True)
    elif mode == "nan":
        print("9.80 nan -33.72", flush=True)
    elif mode == "sleep":
        time.sleep(30)
    elif mode == "exit":
        sys.exit(0)
    elif mode == "record":
        with open(sys.argv[2], "a") as f:
            f.write(line)
        print("9.80 30.81 -33.72", flush=True)
"""


@pytest.fixture
def stub_command(tmp_path):
    """Command line of a scripted simulator process in the given mode."""
    script = tmp_path / "stub_simulator.py"
    script.write_text(STUB)

    def command(mode, *args):
        parts = [sys.executable, str(script), mode] + list(args)
        return " ".join(shlex.quote(p) for p in parts)

    return command


@pytest.fixture(autouse=True)
def ensure_workingdir(request):
    """Make sure after each the test the current working directory is reset."""
    working_dir = os.getcwd()
    yield
    os.chdir(working_dir)


@pytest.fixture(autouse=True)
def output(monkeypatch):
    from occsearch import output
    from occsearch._output import TestBackend

    backend = TestBackend()
    monkeypatch.setattr(output, "backend", backend)
    monkeypatch.setattr(output, "enable_debug", False)
    return output
