"""Simulator backends.

A simulator turns a configuration point into a response vector in spec order.
Two backends are built in; more can be registered under the
``occsearch.backends`` entry-point group (a factory taking the circuit model).

The external backend speaks a line protocol with a subprocess::

    -> 0.5 0.5 0.5 0.5 0.5 0.5 0.5 nominal
    <- 9.8 30.81 -33.72

or ``ERR <message>`` when the simulation failed.

"""

import math
import os
import queue
import re
import shlex
import subprocess
import threading

from importlib_metadata import entry_points

from occsearch import (
    ChannelClosed,
    ConfigurationError,
    MalformedReply,
    NonFiniteResponse,
    SimulatorError,
    SimulatorTimeout,
    UnknownBackend,
    output,
)
from occsearch.circuit import ConfigSection
from occsearch.hyperspace import Backend
from occsearch.synthetic import SyntheticCircuit
from occsearch.utils import format_decimal

DEFAULT_TIMEOUT = 600.0
ENVIRONMENT_VARIABLE = "OCCSEARCH_SIMULATOR"

NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
NON_FINITE = re.compile(r"^[+-]?(nan|inf|infinity)$", re.IGNORECASE)


class Simulator(object):
    """Evaluates configuration points of one circuit, one at a time."""

    def __init__(self, model):
        self.model = model

    def simulate(self, point):
        raise NotImplementedError

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def _check(self, values, request=None):
        for spec, value in zip(self.model.specs, values):
            if not math.isfinite(value):
                raise NonFiniteResponse.from_context(spec.name, value, request)
        return tuple(values)


class SyntheticSimulator(Simulator):
    def __init__(self, model):
        super(SyntheticSimulator, self).__init__(model)
        self.circuit = SyntheticCircuit(model)

    def simulate(self, point):
        return self._check(self.circuit.evaluate(point))


def request_line(model, point):
    """Encode a point as a request line (without the newline)."""
    parts = [format_decimal(v) for v in point.oc_values]
    if model.corner is not None:
        parts.append(model.corner_label(point))
    return " ".join(parts)


def parse_reply(reply, names, request=None):
    """Decode a reply line into one float per response name."""
    line = reply.rstrip("\r\n")
    if line == "ERR" or line.startswith("ERR "):
        raise SimulatorError.from_context(line[4:].strip(), request)
    parts = line.split(" ")
    if len(parts) != len(names):
        raise MalformedReply.from_context(
            line,
            "expected {} values, got {}".format(len(names), len(parts)),
            request,
        )
    values = []
    for name, part in zip(names, parts):
        if NON_FINITE.match(part):
            raise NonFiniteResponse.from_context(name, float(part), request)
        if not NUMBER.match(part):
            raise MalformedReply.from_context(
                line, "{!r} is not a decimal number".format(part), request
            )
        values.append(float(part))
    return tuple(values)


class ExternalSimulator(Simulator):
    """Talks to a long running simulator process over stdin/stdout."""

    def __init__(self, model, command=None, timeout=None):
        super(ExternalSimulator, self).__init__(model)
        settings = ConfigSection("external", model.settings.get("external", {}))
        command = (
            command
            or os.environ.get(ENVIRONMENT_VARIABLE)
            or settings.get("command")
        )
        if not command:
            raise ConfigurationError.from_context(
                "no simulator command configured (set {})".format(
                    ENVIRONMENT_VARIABLE
                ),
                "external.command",
            )
        self.command = shlex.split(command)
        if timeout is None:
            timeout = settings.convert("timeout", float, DEFAULT_TIMEOUT)
        if not timeout > 0:
            raise ConfigurationError.from_context(
                "timeout must be positive", "external.timeout"
            )
        self.timeout = timeout
        self.process = None
        self.reader = None
        self.replies = None

    def _start(self):
        output.annotate(
            "simulator: starting {}".format(" ".join(self.command)), debug=True
        )
        try:
            self.process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise ChannelClosed.from_context(
                "cannot start simulator: {}".format(e.strerror)
            )
        self.replies = queue.Queue()
        self.reader = threading.Thread(
            target=self._read, args=(self.process.stdout, self.replies)
        )
        self.reader.daemon = True
        self.reader.start()

    @staticmethod
    def _read(stream, replies):
        for line in stream:
            replies.put(line)
        replies.put(None)

    def simulate(self, point):
        self.model.validate(point)
        request = request_line(self.model, point)
        if self.process is None:
            self._start()
        try:
            self.process.stdin.write(request + "\n")
            self.process.stdin.flush()
        except (BrokenPipeError, OSError, ValueError):
            self.close()
            raise ChannelClosed.from_context("simulator went away", request)
        try:
            reply = self.replies.get(timeout=self.timeout)
        except queue.Empty:
            self.close(kill=True)
            raise SimulatorTimeout.from_context(self.timeout, request)
        if reply is None:
            self.close()
            raise ChannelClosed.from_context("simulator exited", request)
        return self._check(
            parse_reply(reply, self.model.response_names, request), request
        )

    def close(self, kill=False):
        if self.process is None:
            return
        process, self.process = self.process, None
        if kill:
            process.kill()
        try:
            process.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        try:
            process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            process.kill()
            process.wait()
        self.reader.join(timeout=5)
        process.stdout.close()


def simulate_external(point, channel):
    """Send one request through an open ExternalSimulator channel."""
    return channel.simulate(point)


BUILTIN = {
    Backend.SYNTHETIC.value: SyntheticSimulator,
    Backend.EXTERNAL.value: ExternalSimulator,
}


def backends():
    """Backend name -> factory, built-ins first, then entry points."""
    result = dict(BUILTIN)
    for ep in entry_points(group="occsearch.backends"):
        result.setdefault(ep.name, ep)
    return result


def get_simulator(model):
    available = backends()
    if model.backend not in available:
        raise UnknownBackend.from_context(model.backend)
    factory = available[model.backend]
    if not isinstance(factory, type):
        factory = factory.load()
    return factory(model)
