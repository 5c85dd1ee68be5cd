import sys
import threading
import traceback


class Output(object):
    """Single sink for everything occsearch tells the user.

    Messages passed with `debug=True` are dropped unless `enable_debug` is
    set. Seed workers write from several threads; every backend call holds
    the lock so lines never interleave.
    """

    enable_debug = False

    def __init__(self, backend):
        self.backend = backend
        self._lock = threading.RLock()

    def _silent(self, debug):
        return debug and not self.enable_debug

    def line(self, message, debug=False, **format):
        if self._silent(debug):
            return
        with self._lock:
            self.backend.line(message, **format)

    def annotate(self, message, debug=False, **format):
        self.line(message, debug=debug, **format)

    def tabular(self, key, value, separator=": ", debug=False, **format):
        self.line(
            "{}{}{}".format(key.rjust(15), separator, value),
            debug=debug,
            **format,
        )

    def section(self, title, debug=False, **format):
        if self._silent(debug):
            return
        format.setdefault("bold", True)
        with self._lock:
            self.backend.sep("=", title, **format)

    def step(self, context, message, debug=False, **format):
        format.setdefault("bold", True)
        self.line("{}: {}".format(context, message), debug=debug, **format)

    def error(self, message, exc_info=None, debug=False):
        if self._silent(debug):
            return
        self.step("ERROR", message, red=True)
        if not exc_info:
            return
        if self.enable_debug:
            lines = traceback.format_exception(*exc_info)
        else:
            lines = traceback.format_exception_only(*exc_info[:2])
        text = "      " + "".join(lines).replace("\n", "\n      ") + "\n"
        with self._lock:
            self.backend.write(text, red=True)


class TerminalBackend(object):
    def __init__(self):
        import py.io

        self._tw = py.io.TerminalWriter(sys.stdout)

    def line(self, message, **format):
        self._tw.line(message, **format)

    def sep(self, sep, title, **format):
        self._tw.sep(sep, title, **format)

    def write(self, content, **format):
        self._tw.write(content, **format)


class NullBackend(object):
    def line(self, message, **format):
        pass

    def sep(self, sep, title, **format):
        pass

    def write(self, content, **format):
        pass


class TestBackend(object):
    __test__ = False

    def __init__(self):
        self.output = ""

    def line(self, message, **format):
        self.output += message + "\n"

    def sep(self, sep, title, **format):
        self.output += " {} {} {} ".format(sep * 3, title, sep * 3)

    def write(self, content, **format):
        self.output += content + "\n"


output = Output(NullBackend())
