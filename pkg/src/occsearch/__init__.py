import os.path

from ._output import output

with open(os.path.dirname(__file__) + "/version.txt") as f:
    __version__ = f.read().strip()


class ReportingException(Exception):
    """Exceptions that support user-readable reporting."""

    # Set per seed; not part of the error itself.
    SEED_ATTRIBUTES = ("affected_seed", "state")

    def __str__(self):
        raise NotImplementedError()

    def report(self):
        raise NotImplementedError()

    def should_merge(self, other):
        """
        checks, whether two exceptions have the same type as well as data
        and as such, should be merged into one exception.
        """
        if type(other) != type(self):
            return False
        return self._data() == other._data()

    def _data(self):
        return {
            k: v
            for k, v in self.__dict__.items()
            if k not in self.SEED_ATTRIBUTES
        }

    @classmethod
    def merge(cls, selfs):
        """Merge multiple instances of this exception.

        Returns the merged exception and the sorted list of affected seeds.
        """
        seeds = sorted(
            {
                self.affected_seed
                for self in selfs
                if getattr(self, "affected_seed", None) is not None
            }
        )
        new_exception = cls()
        new_exception.__dict__.update(selfs[0]._data())
        new_exception.affected_seed = None
        return (new_exception, seeds)


class FileLockedError(ReportingException):
    """A file is already locked and we do not want to block."""

    @classmethod
    def from_context(cls, filename):
        self = cls()
        self.filename = filename
        return self

    def __str__(self):
        return "File already locked: {}".format(self.filename)

    def report(self):
        output.error(str(self))


class ConfigurationError(ReportingException):
    """A circuit description or run configuration is not usable."""

    @classmethod
    def from_context(cls, message, field=None):
        self = cls()
        self.message = message
        self.field = field
        return self

    def __str__(self):
        if self.field:
            return "{}: {}".format(self.field, self.message)
        return str(self.message)

    def report(self):
        output.error(str(self.message))
        if self.field:
            output.tabular("Field", self.field, red=True)


class ConversionError(ConfigurationError):
    """A configuration value could not be converted properly."""

    @classmethod
    def from_context(cls, section, key, value, conversion, error):
        self = cls()
        self.section = section
        self.key = key
        self.field = "{}.{}".format(section, key)
        self.conversion_name = getattr(conversion, "__name__", str(conversion))
        self.value_repr = repr(value)
        self.error_str = str(error)
        self.message = self.error_str
        return self

    def __str__(self):
        return "{}: cannot convert {} ({})".format(
            self.field, self.value_repr, self.error_str
        )

    def report(self):
        output.error(self.error_str)
        output.tabular("Field", self.field, red=True)
        output.tabular(
            "Conversion",
            "{}({})".format(self.conversion_name, self.value_repr),
            red=True,
        )


class MissingSection(ConfigurationError):
    """A required section is missing from a circuit file."""

    @classmethod
    def from_context(cls, section, filename=None):
        self = cls()
        self.section = section
        self.filename = filename
        self.field = section
        self.message = "Missing section [{}]".format(section)
        return self

    def report(self):
        output.error("Missing section in circuit description")
        output.tabular("Section", self.section, red=True)
        if self.filename:
            output.tabular("File", self.filename, red=True)


class SuperfluousSection(ConfigurationError):
    """A section of a circuit file is not understood."""

    @classmethod
    def from_context(cls, section):
        self = cls()
        self.section = section
        self.field = section
        self.message = "Superfluous section in circuit description"
        return self

    def __str__(self):
        return "Superfluous section in circuit description: " + self.section

    def report(self):
        output.error(self.message)
        output.tabular("Section", self.section, red=True)


class UnknownBackend(ConfigurationError):
    """The circuit names a simulator backend nobody provides."""

    @classmethod
    def from_context(cls, backend):
        self = cls()
        self.backend = backend
        self.field = "circuit.backend"
        self.message = "Unknown simulator backend `{}`".format(backend)
        return self


class UnsupportedBackend(ConfigurationError):
    """The requested operation is not available for this backend."""

    @classmethod
    def from_context(cls, backend, operation):
        self = cls()
        self.backend = backend
        self.operation = operation
        self.field = "circuit.backend"
        self.message = "`{}` is not supported for the {} backend".format(
            operation, backend
        )
        return self


class ValidationError(ReportingException):
    """A value handed to an operation violates its preconditions."""

    @classmethod
    def from_context(cls, message, dimension=None):
        self = cls()
        self.message = message
        self.dimension = dimension
        return self

    def __str__(self):
        if self.dimension is not None:
            return "{}: {}".format(self.dimension, self.message)
        return self.message

    def report(self):
        output.error(self.message)
        if self.dimension is not None:
            output.tabular("Dimension", str(self.dimension), red=True)


class OutOfBounds(ValidationError):
    """A coordinate lies outside its declared range."""

    @classmethod
    def from_context(cls, dimension, value, low, high):
        self = cls()
        self.dimension = dimension
        self.value = value
        self.low = low
        self.high = high
        self.message = "value {!r} outside [{!r}, {!r}]".format(
            value, low, high
        )
        return self


class DimensionMismatch(ValidationError):
    """A point does not have the expected number of coordinates."""

    @classmethod
    def from_context(cls, expected, actual):
        self = cls()
        self.expected = expected
        self.actual = actual
        self.dimension = None
        self.message = "expected {} coordinates, got {}".format(
            expected, actual
        )
        return self


class BudgetError(ReportingException):
    """A design does not fit into the requested or allowed budget."""

    @classmethod
    def from_context(cls, message, requested, limit):
        self = cls()
        self.message = message
        self.requested = requested
        self.limit = limit
        return self

    def __str__(self):
        return "{} (requested {}, limit {})".format(
            self.message, self.requested, self.limit
        )

    def report(self):
        output.error(self.message)
        output.tabular("Requested", str(self.requested), red=True)
        output.tabular("Limit", str(self.limit), red=True)


class EmptyDesign(ReportingException):
    """A design with no points was requested."""

    @classmethod
    def from_context(cls, kind):
        self = cls()
        self.kind = kind
        return self

    def __str__(self):
        return "Empty {} design requested".format(self.kind)

    def report(self):
        output.error(str(self))


class CapabilityError(ReportingException):
    """No orthogonal array of the requested size can be constructed."""

    @classmethod
    def from_context(cls, runs, factors, suggestion):
        self = cls()
        self.runs = runs
        self.factors = factors
        self.suggestion = suggestion
        return self

    def __str__(self):
        return (
            "Cannot construct a two-level strength-2 array with {} runs for "
            "{} factors; next valid size is {}".format(
                self.runs, self.factors, self.suggestion
            )
        )

    def report(self):
        output.error("Orthogonal array not constructible")
        output.tabular("Runs", str(self.runs), red=True)
        output.tabular("Factors", str(self.factors), red=True)
        output.tabular("Hint", "use {} runs".format(self.suggestion), red=True)


class InsufficientData(ReportingException):
    """Too few training points to fit a surrogate."""

    @classmethod
    def from_context(cls, n, required=2):
        self = cls()
        self.n = n
        self.required = required
        return self

    def __str__(self):
        return "Need at least {} training points, got {}".format(
            self.required, self.n
        )

    def report(self):
        output.error(str(self))


class DuplicateInputs(ReportingException):
    """The training inputs contain identical rows."""

    @classmethod
    def from_context(cls, rows):
        self = cls()
        self.rows = list(rows)
        return self

    def __str__(self):
        return "Duplicate training inputs at rows {}".format(self.rows)

    def report(self):
        output.error(str(self))


class ConditioningError(ReportingException):
    """The kernel matrix could not be factorized even with maximal jitter."""

    @classmethod
    def from_context(cls, n, jitter):
        self = cls()
        self.n = n
        self.jitter = jitter
        return self

    def __str__(self):
        return (
            "Kernel matrix of size {} not positive definite "
            "(jitter up to {:g})".format(self.n, self.jitter)
        )

    def report(self):
        output.error("Kernel matrix not positive definite")
        output.tabular("Size", str(self.n), red=True)
        output.tabular("Max. jitter", "{:g}".format(self.jitter), red=True)


class SelectionExhausted(ReportingException):
    """Every candidate of a pool duplicates an already simulated point."""

    @classmethod
    def from_context(cls, pool_size, delta):
        self = cls()
        self.pool_size = pool_size
        self.delta = delta
        return self

    def __str__(self):
        return "All {} candidates lie within {:g} of simulated points".format(
            self.pool_size, self.delta
        )

    def report(self):
        output.error(str(self))


class SimulatorFault(ReportingException):
    """A simulation did not produce a usable response vector."""

    affected_seed = None

    @classmethod
    def from_context(cls, message, request=None):
        self = cls()
        self.message = message
        self.request = request
        return self

    def __str__(self):
        return self.message

    def report(self):
        output.error("Simulator fault: {}".format(self.message))
        if self.request is not None:
            output.tabular("Request", self.request, red=True)


class SimulatorError(SimulatorFault):
    """The simulator answered with an ERR reply."""


class SimulatorTimeout(SimulatorFault):
    """The simulator did not answer in time."""

    @classmethod
    def from_context(cls, timeout, request=None):
        self = cls()
        self.timeout = timeout
        self.request = request
        self.message = "no reply within {:g} seconds".format(timeout)
        return self


class MalformedReply(SimulatorFault):
    """The simulator reply does not follow the line protocol."""

    @classmethod
    def from_context(cls, reply, reason, request=None):
        self = cls()
        self.reply = reply
        self.reason = reason
        self.request = request
        self.message = "malformed reply {!r}: {}".format(reply, reason)
        return self


class NonFiniteResponse(SimulatorFault):
    """A response value is NaN or infinite."""

    @classmethod
    def from_context(cls, response, value, request=None):
        self = cls()
        self.response = response
        self.value = value
        self.request = request
        self.message = "non-finite value {!r} for response {}".format(
            value, response
        )
        return self


class ChannelClosed(SimulatorFault):
    """The simulator process went away."""


class OracleUnstable(ReportingException):
    """Oracle extrema did not settle within the maximum grid density."""

    @classmethod
    def from_context(cls, response, density, change):
        self = cls()
        self.response = response
        self.density = density
        self.change = change
        return self

    def __str__(self):
        return (
            "Oracle extrema of {} still moved by {:.4f}% of the range at "
            "grid density {}".format(self.response, self.change, self.density)
        )

    def report(self):
        output.error("Oracle extrema did not converge")
        output.tabular("Response", self.response, red=True)
        output.tabular("Density", str(self.density), red=True)
        output.tabular("Change", "{:.4f}%".format(self.change), red=True)


class DegenerateResponse(ReportingException):
    """A response has no spread, so relative errors are undefined."""

    @classmethod
    def from_context(cls, true_range, response=None):
        self = cls()
        self.true_range = true_range
        self.response = response
        return self

    def __str__(self):
        return "Degenerate response range {!r}{}".format(
            self.true_range,
            " for {}".format(self.response) if self.response else "",
        )

    def report(self):
        output.error(str(self))


class RunFailed(ReportingException):
    """No seed of a run completed."""

    @classmethod
    def from_context(cls, seeds):
        self = cls()
        self.seeds = list(seeds)
        return self

    def __str__(self):
        return "No seed completed (tried {})".format(
            ", ".join(str(s) for s in self.seeds)
        )

    def report(self):
        output.error(str(self))


class LogError(ReportingException):
    """A stored run log is missing or cannot be read."""

    @classmethod
    def from_context(cls, path, reason):
        self = cls()
        self.path = path
        self.reason = reason
        return self

    def __str__(self):
        return "Cannot use run log {}: {}".format(self.path, self.reason)

    def report(self):
        output.error("Cannot use run log")
        output.tabular("File", self.path, red=True)
        output.tabular("Reason", self.reason, red=True)
