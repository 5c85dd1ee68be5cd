"""Loading circuit descriptions from INI-style files.

A circuit file looks like this::

    [circuit]
    name = synthetic-7
    backend = synthetic

    [oc:x1]
    min = 0
    max = 1

    [corner:process]
    labels = slow, nominal, fast
    valid = 0 0, 0 1, 1 0
    slow = 0 0
    nominal = 0 1
    fast = 1 0

    [response:gain]
    threshold = 8
    direction = lower

    [run]
    fp_budget = 100

Sections are prefixed like ``oc:``, ``corner:``, ``response:`` and
``coefficients:``; any other section must be one of the known plain sections.

"""

import os.path
from configparser import Error as ConfigParserError
from configparser import RawConfigParser

from occsearch import (
    ConfigurationError,
    ConversionError,
    MissingSection,
    SuperfluousSection,
)
from occsearch.hyperspace import (
    CircuitModel,
    Direction,
    OperatingCondition,
    ProcessCorner,
    ResponseSpec,
)

RESOURCES = os.path.join(os.path.dirname(__file__), "resources")

PLAIN_SECTIONS = ["circuit", "run", "external"]
PREFIXED_SECTIONS = ["oc:", "corner:", "response:", "coefficients:"]


class ConfigSection(dict):
    def __init__(self, name, items=()):
        super(ConfigSection, self).__init__(items)
        self.name = name

    def as_list(self, option):
        result = self[option]
        if "," in result:
            result = [x.strip() for x in result.split(",")]
        elif "\n" in result:
            result = (x.strip() for x in result.split("\n"))
            result = [x for x in result if x]
        else:
            result = [result.strip()]
        return [x for x in result if x]

    def convert(self, option, conversion, default=None):
        """Return `option` passed through `conversion`, or the default."""
        if option not in self:
            return default
        value = self[option]
        try:
            return conversion(value)
        except Exception as e:
            raise ConversionError.from_context(
                self.name, option, value, conversion, e
            )


class Config(object):
    def __init__(self, path):
        config = RawConfigParser()
        config.optionxform = lambda s: s
        self.path = path
        if path:  # Test support
            try:
                with open(path) as f:
                    config.read_file(f)
            except ConfigParserError as e:
                raise ConfigurationError.from_context(
                    "cannot parse circuit file: {}".format(e), path
                )
            except OSError as e:
                raise ConfigurationError.from_context(
                    "cannot read circuit file: {}".format(e.strerror), path
                )
        self.config = config

    def __contains__(self, section):
        return self.config.has_section(section)

    def __getitem__(self, section):
        if section not in self:
            raise KeyError(section)
        return ConfigSection(
            section,
            (
                (x, self.config.get(section, x))
                for x in self.config.options(section)
            ),
        )

    def __iter__(self):
        return iter(self.config.sections())

    def get(self, section, default=None):
        try:
            return self[section]
        except KeyError:
            return default

    def prefixed(self, prefix):
        """(suffix, section) for all sections starting with `prefix`."""
        for section in self:
            if section.startswith(prefix):
                yield section[len(prefix) :], self[section]


def parse_code(value):
    parts = value.split()
    if len(parts) != 2:
        raise ValueError("expected two integers, got {!r}".format(value))
    return tuple(int(p) for p in parts)


def parse_pair(value):
    parts = value.split()
    if len(parts) != 2:
        raise ValueError("expected two numbers, got {!r}".format(value))
    return tuple(float(p) for p in parts)


def parse_direction(value):
    return Direction(value.strip().lower())


def resolve_circuit_path(name):
    """Accept a path or the name of a bundled circuit description."""
    if os.path.exists(name):
        return name
    candidate = os.path.join(RESOURCES, name)
    if not candidate.endswith(".cfg"):
        candidate += ".cfg"
    if os.path.exists(candidate):
        return candidate
    raise ConfigurationError.from_context(
        "no such circuit file or bundled circuit: {}".format(name), "circuit"
    )


def load_circuit(path):
    """Read a circuit description file and return its CircuitModel."""
    path = resolve_circuit_path(path)
    config = Config(path)
    return circuit_from_config(config)


def circuit_from_config(config):
    for section in config:
        if section in PLAIN_SECTIONS:
            continue
        if any(section.startswith(p) for p in PREFIXED_SECTIONS):
            continue
        raise SuperfluousSection.from_context(section)

    if "circuit" not in config:
        raise MissingSection.from_context("circuit", config.path)
    circuit = config["circuit"]
    name = circuit.get("name", "circuit")
    backend = circuit.get("backend", "synthetic").strip()

    ocs = []
    for oc_name, section in config.prefixed("oc:"):
        for key in ["min", "max"]:
            if key not in section:
                raise ConfigurationError.from_context(
                    "missing key", "oc:{}.{}".format(oc_name, key)
                )
        ocs.append(
            OperatingCondition(
                oc_name,
                section.convert("min", float),
                section.convert("max", float),
            )
        )

    corners = list(config.prefixed("corner:"))
    if len(corners) > 1:
        raise ConfigurationError.from_context(
            "only one process corner is supported", "corner"
        )
    corner = None
    if corners:
        corner = load_corner(*corners[0])

    specs = []
    for response, section in config.prefixed("response:"):
        if "threshold" not in section or "direction" not in section:
            raise ConfigurationError.from_context(
                "threshold and direction are required",
                "response:{}".format(response),
            )
        options = {
            k: v
            for k, v in section.items()
            if k not in ("threshold", "direction")
        }
        specs.append(
            ResponseSpec(
                response,
                section.convert("threshold", float),
                section.convert("direction", parse_direction),
                options,
            )
        )

    settings = {}
    for plain in ["run", "external"]:
        if plain in config:
            settings[plain] = dict(config[plain])
    for response, section in config.prefixed("coefficients:"):
        if response not in [s.name for s in specs]:
            raise SuperfluousSection.from_context(
                "coefficients:{}".format(response)
            )
        settings["coefficients:" + response] = dict(section)

    return CircuitModel(
        name=name,
        ocs=tuple(ocs),
        specs=tuple(specs),
        corner=corner,
        backend=backend,
        settings=settings,
    )


def load_corner(name, section):
    if "labels" not in section:
        raise ConfigurationError.from_context(
            "missing key", "corner:{}.labels".format(name)
        )
    labels = tuple(section.as_list("labels"))
    encoding = {}
    for label in labels:
        if label not in section:
            raise ConfigurationError.from_context(
                "no code pair for label", "corner:{}.{}".format(name, label)
            )
        encoding[label] = section.convert(label, parse_code)
    valid = ()
    if "valid" in section:
        valid = tuple(
            ConfigSection(section.name, {"valid": v}).convert(
                "valid", parse_code
            )
            for v in section.as_list("valid")
        )
    return ProcessCorner(name, labels, encoding, valid)
