"""Single-flight execution: concurrent calls for one key share one run.

The first caller for a key becomes the leader and executes the function;
callers arriving while it runs block and receive the leader's result (or
its exception). Once the run finishes the key resets, so later calls
execute afresh.
"""

from __future__ import annotations

import threading


class _Call:
    __slots__ = ("event", "result", "exc")

    def __init__(self):
        self.event = threading.Event()
        self.result = None
        self.exc: BaseException | None = None


class SingleFlight:
    def __init__(self):
        self._lock = threading.Lock()
        self._calls: dict[str, _Call] = {}

    def do(self, key: str, fn):
        """Run ``fn`` under ``key``; returns (result, led) where ``led``
        tells whether this caller executed the function itself."""
        with self._lock:
            call = self._calls.get(key)
            if call is None:
                call = _Call()
                self._calls[key] = call
                leader = True
            else:
                leader = False
        if not leader:
            call.event.wait()
            if call.exc is not None:
                raise call.exc
            return call.result, False
        try:
            call.result = fn()
        except BaseException as exc:
            call.exc = exc
            raise
        finally:
            with self._lock:
                self._calls.pop(key, None)
            call.event.set()
        return call.result, True
