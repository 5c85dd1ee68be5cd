import contextlib
import fcntl
import hashlib
import os
import time
from collections import defaultdict
from typing import Optional

import numpy as np

from occsearch import FileLockedError, output


@contextlib.contextmanager
def locked(filename):
    """Hold an exclusive lock on `filename`, failing instead of waiting.

    The file carries the pid of the holder while the lock is held.
    """
    with open(filename, "a+") as lockfile:
        try:
            fcntl.lockf(lockfile, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except IOError:
            raise FileLockedError.from_context(filename)
        lockfile.seek(0)
        lockfile.truncate()
        lockfile.write("{}\n".format(os.getpid()))
        lockfile.flush()
        try:
            yield
        finally:
            lockfile.seek(0)
            lockfile.truncate()


class Timer(object):
    """Wall-clock time spent per named phase of a seed run."""

    TOTAL = "total"

    def __init__(self, tag=None):
        self.tag = tag
        self.durations = defaultdict(float)

    def step(self, note):
        if note == self.TOTAL:
            raise ValueError("Cannot use 'total' as a step name")
        return self._measure(note)

    @contextlib.contextmanager
    def _measure(self, note):
        start = time.time()
        try:
            yield
        finally:
            delta = time.time() - start
            self.durations[note] += delta
            message = "{} took {:.2f} seconds".format(note, delta)
            output.annotate(
                "Timer {}: {}".format(self.tag, message),
                debug=True,
            )

    def humanize(self, *steps):
        durations = dict(self.durations)
        durations[self.TOTAL] = sum(self.durations.values())
        return ", ".join(
            "{}={}".format(note, format_duration(durations.get(note)))
            for note in steps
        )


def array_checksum(*arrays):
    """SHA-256 over the contiguous float64 bytes of the given arrays."""
    h = hashlib.sha256()
    for array in arrays:
        array = np.ascontiguousarray(array, dtype=np.float64)
        h.update(str(array.shape).encode("ascii"))
        h.update(array.tobytes())
    return h.hexdigest()


def format_duration(duration: Optional[float]) -> str:
    """Seconds as `1.23s` below a minute, `1m1s` above, `NaN` if unknown."""
    if duration is None:
        return "NaN"
    minutes, seconds = divmod(duration, 60)
    if minutes:
        return "{}m{}s".format(int(minutes), int(seconds))
    return "{:.2f}s".format(seconds)


def format_decimal(value):
    """Shortest round-trip positional decimal representation of a float.

    >>> format_decimal(0.5)
    '0.5'
    >>> format_decimal(1e-05)
    '0.00001'
    >>> format_decimal(-33.72)
    '-33.72'
    """
    return np.format_float_positional(float(value), unique=True, trim="-")
