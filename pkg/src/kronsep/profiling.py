"""Exclusive per-phase wall-clock timers used by the solvers and the CLI."""
import time
from contextlib import contextmanager, nullcontext


class PhaseTimer:
    """Accumulate exclusive wall time per named phase.

    Nested phases pause their parent, so the totals never double count and
    ``sum(timer.totals.values())`` is the instrumented share of wall time.
    """

    def __init__(self):
        self.totals = {}
        self._stack = []
        self._mark = None

    def _charge(self, now):
        if self._stack:
            name = self._stack[-1]
            self.totals[name] = self.totals.get(name, 0.0) + (now - self._mark)
        self._mark = now

    @contextmanager
    def phase(self, name):
        self._charge(time.perf_counter())
        self._stack.append(name)
        try:
            yield
        finally:
            self._charge(time.perf_counter())
            self._stack.pop()


class _NullTimer:
    totals = {}

    def phase(self, name):
        return nullcontext()


NULL_TIMER = _NullTimer()
