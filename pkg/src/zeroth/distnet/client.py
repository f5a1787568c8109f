"""Asynchronous optimization client.

Leases evaluation servers from the control server, binds the objective on
each, and runs the sequential classification-based solver asynchronously:
one evaluation in flight per worker, a serialized model update on every
completion, and an immediate next dispatch using whatever training sets
exist at that moment. A lost worker's in-flight point is re-dispatched to
another worker so the collected evaluation count still equals the budget.
"""

from __future__ import annotations

import threading
from collections import deque
from time import monotonic
from typing import Optional

import numpy as np

from .. import _backend as bk
from .. import racos as _racos
from ..core import ConfigError, EvaluationError, History, Parameter, Solution
from ..objectives import dimension_from_wire, dimension_to_wire
from . import protocol


class PartialResultError(RuntimeError):
    """Every worker was lost before the budget completed; carries the best
    solution and the history collected so far."""

    def __init__(self, message: str, best: Optional[Solution], history: History):
        super().__init__(message)
        self.best = best
        self.history = history


def make_objective_spec(name: str, dimension, params: Optional[dict] = None) -> dict:
    """Wire description of an objective for the task message."""
    return {"name": name, "dim": dimension_to_wire(dimension),
            "params": params or {}}


class _AsyncSRacos:
    """Shared solver state; every mutation happens under one condition lock."""

    def __init__(self, dimension, parameter: Parameter, rng, history: History):
        self.dim = dimension
        self.parameter = parameter
        self.rng = rng
        self.history = history
        self.budget = parameter.budget
        self.r = parameter.train_size
        self.k = parameter.positive_size
        self.cond = threading.Condition()
        self.dispatched = 0
        self.collected = 0
        self.next_id = 0
        self.pool: list[Solution] = []
        self.sets: Optional[_racos.TrainingSets] = None
        self.pending: dict[int, np.ndarray] = {}
        self.requeue: deque[tuple[int, np.ndarray]] = deque()
        self.best: Optional[Solution] = None
        self.live_workers = 0
        self.error: Optional[Exception] = None
        self.expired = False
        self.guard = 0
        self.guard_max = 0
        self.redispatches = 0

    # All private methods assume self.cond is held.

    def _finished(self) -> bool:
        if self.collected >= self.budget:
            return True
        if self.expired and not self.requeue and self.dispatched == self.collected:
            return True
        return False

    def _can_generate(self) -> bool:
        if self.expired or self.dispatched >= self.budget:
            return False
        if self.dispatched < min(self.r, self.budget):
            return True  # seeding phase
        return self.sets is not None

    def _generate(self) -> tuple[int, np.ndarray]:
        if self.dispatched < min(self.r, self.budget) or self.sets is None:
            x = bk.sample_uniform(self.dim.lower, self.dim.upper, self.dim.kinds,
                                  self.rng)
        else:
            positives = self.sets.positives
            anchor = positives[self.rng.randint(0, len(positives) - 1)]
            region = _racos.learn_region(anchor, self.sets.negatives, self.dim,
                                         self.parameter.uncertain_dims, self.rng)
            x = _racos.sample_from_model(region, self.dim,
                                         self.parameter.model_sample_prob, self.rng)
        self.dispatched += 1
        eid = self.next_id
        self.next_id += 1
        return eid, x

    def _absorb(self, eid: int, y: float, deadline: Optional[float]) -> None:
        self.guard += 1
        self.guard_max = max(self.guard_max, self.guard)
        assert self.guard == 1, "model update interleaved"
        try:
            x = self.pending.pop(eid)
            sol = Solution(x=x, value=y, eval_count=1)
            self.history.note(y)
            self.collected += 1
            if self.sets is None:
                self.pool.append(sol)
                if len(self.pool) == min(self.r, self.budget):
                    self.sets = _racos.TrainingSets.from_pool(self.pool, self.k)
            else:
                _racos.replace(self.sets, sol, self.parameter.replace_strategy,
                               rng=self.rng)
            if self.best is None or sol.value < self.best.value:
                self.best = sol
            if deadline is not None and monotonic() >= deadline:
                self.expired = True
        finally:
            self.guard -= 1


def _worker_loop(state: _AsyncSRacos, chan: protocol.LineChannel,
                 deadline: Optional[float]) -> None:
    while True:
        with state.cond:
            while True:
                if state.error is not None or state._finished():
                    return
                if state.requeue:
                    eid, x = state.requeue.popleft()
                    state.redispatches += 1
                    break
                if state._can_generate():
                    eid, x = state._generate()
                    break
                state.cond.wait(0.5)
            state.pending[eid] = x
        try:
            chan.send({"type": "eval", "id": eid, "x": [float(v) for v in x]})
            msg = chan.recv()
            if msg is None:
                raise OSError("connection closed")
        except (OSError, protocol.DecodeError) as exc:
            with state.cond:
                state.live_workers -= 1
                state.requeue.append((eid, state.pending.pop(eid)))
                if state.live_workers == 0 and not state._finished() \
                        and state.error is None:
                    state.error = PartialResultError(
                        f"all evaluation servers lost ({exc})",
                        state.best, state.history)
                state.cond.notify_all()
            return
        if msg["type"] == "value":
            with state.cond:
                if state.error is not None:
                    return
                if msg["id"] != eid:
                    state.error = EvaluationError(
                        f"reply id {msg['id']} does not match request {eid}")
                    state.cond.notify_all()
                    return
                state._absorb(eid, float(msg["y"]), deadline)
                state.cond.notify_all()
        elif msg["type"] == "error":
            with state.cond:
                state.error = EvaluationError(msg["reason"])
                state.cond.notify_all()
            return
        else:
            with state.cond:
                state.error = EvaluationError(
                    f"unexpected reply {msg['type']!r}")
                state.cond.notify_all()
            return


def request_servers(control_addr: str, n: int) -> list[str]:
    chan = protocol.connect(control_addr, timeout=10.0)
    try:
        chan.send({"type": "request_servers", "n": n})
        reply = chan.recv()
    finally:
        chan.close()
    if reply is None or reply["type"] != "servers":
        reason = reply.get("reason") if reply else "connection closed"
        raise ConnectionError(f"could not lease servers: {reason}")
    return reply["addrs"]


def release_servers(control_addr: str, addrs: list[str]) -> None:
    try:
        chan = protocol.connect(control_addr, timeout=10.0)
    except OSError:
        return
    try:
        chan.send({"type": "release", "addrs": addrs})
        chan.recv()
    except OSError:
        pass
    finally:
        chan.close()


def async_optimize(control_addr: str, n_servers: int, objective_spec: dict,
                   parameter: Parameter, ledger: Optional[History] = None,
                   stats: Optional[dict] = None) -> Solution:
    """Run the asynchronous solver against leased evaluation servers.

    ``ledger`` (when given) receives one record per collected evaluation in
    completion order; ``stats`` (when given) is filled with counters such
    as the maximum model-update concurrency observed.
    """
    parameter.validate()
    if n_servers < 1:
        raise ConfigError("need at least one evaluation server")
    if parameter.budget < parameter.train_size:
        raise ConfigError("budget is below the initial batch size")
    dimension = dimension_from_wire(objective_spec["dim"])

    addrs = request_servers(control_addr, n_servers)
    if not addrs:
        raise ConnectionError("control server has no free evaluation servers")

    history = ledger if ledger is not None else History()
    history.restart_clock()
    rng = bk.Rng(parameter.resolved_seed())
    state = _AsyncSRacos(dimension, parameter, rng, history)
    deadline = (monotonic() + parameter.time_limit_s
                if parameter.time_limit_s is not None else None)

    channels: list[protocol.LineChannel] = []
    threads: list[threading.Thread] = []
    try:
        for addr in addrs:
            chan = protocol.connect(addr, timeout=10.0)
            chan.send({"type": "task", "objective": objective_spec})
            reply = chan.recv()
            if reply is None or reply["type"] != "ok":
                reason = reply.get("reason") if reply else "connection closed"
                raise ConnectionError(f"worker {addr} rejected the task: {reason}")
            channels.append(chan)
        state.live_workers = len(channels)
        for chan in channels:
            t = threading.Thread(target=_worker_loop, args=(state, chan, deadline),
                                 daemon=True)
            t.start()
            threads.append(t)
        with state.cond:
            while state.error is None and not state._finished():
                state.cond.wait(0.5)
    finally:
        for chan in channels:
            chan.close()
        for t in threads:
            t.join(timeout=10.0)
        release_servers(control_addr, addrs)

    if stats is not None:
        stats.update({"guard_max": state.guard_max,
                      "redispatches": state.redispatches,
                      "workers_lost": len(channels) - max(state.live_workers, 0),
                      "collected": state.collected})
    if state.error is not None:
        raise state.error
    return state.best
