"""Distributed layer: registry semantics, worker sessions, async solver."""

import signal
import subprocess
import sys
import threading
import time

import numpy as np
import pytest

from zeroth import Dimension, History, Objective, Parameter, opt_min
from zeroth.distnet import (ControlServer, EvalServer, PartialResultError,
                            async_optimize, connect, make_objective_spec,
                            request_servers)
from zeroth.objectives import sphere


@pytest.fixture
def control():
    server = ControlServer().start()
    yield server
    server.stop()


def _worker(control, n=1):
    return [EvalServer(control.addr).start() for _ in range(n)]


class TestControlServer:
    def test_grant_rule(self, control):
        for port in (5001, 5002, 5003):
            chan = connect(control.addr)
            chan.send({"type": "register", "addr": f"10.0.0.2:{port}"})
            assert chan.recv()["type"] == "ok"
            chan.close()
        granted = request_servers(control.addr, 2)
        assert len(granted) == 2
        assert list(control.snapshot().values()).count("free") == 1

    def test_partial_grant(self, control):
        chan = connect(control.addr)
        chan.send({"type": "register", "addr": "10.0.0.2:5001"})
        chan.recv()
        chan.close()
        assert len(request_servers(control.addr, 5)) == 1

    def test_idempotent_register(self, control):
        for _ in range(3):
            chan = connect(control.addr)
            chan.send({"type": "register", "addr": "10.0.0.2:5001"})
            assert chan.recv()["type"] == "ok"
            chan.close()
        assert len(control.snapshot()) == 1

    def test_nonpositive_request_rejected(self, control):
        chan = connect(control.addr)
        chan.send({"type": "request_servers", "n": 0})
        reply = chan.recv()
        assert reply["type"] == "error"
        # the connection stays usable
        chan.send({"type": "request_servers", "n": -2})
        assert chan.recv()["type"] == "error"
        chan.close()

    def test_release_frees(self, control):
        chan = connect(control.addr)
        chan.send({"type": "register", "addr": "10.0.0.2:5001"})
        chan.recv()
        chan.close()
        granted = request_servers(control.addr, 1)
        assert control.snapshot()["10.0.0.2:5001"] == "granted"
        chan = connect(control.addr)
        chan.send({"type": "release", "addrs": granted})
        assert chan.recv()["type"] == "ok"
        chan.close()
        assert control.snapshot()["10.0.0.2:5001"] == "free"

    def test_malformed_line_keeps_connection_open(self, control):
        chan = connect(control.addr)
        chan.sock.sendall(b"{broken\n")
        assert chan.recv()["type"] == "error"
        chan.send({"type": "register", "addr": "10.0.0.2:1"})
        assert chan.recv()["type"] == "ok"
        chan.close()

    def test_lease_exclusivity_under_concurrent_clients(self, control):
        for port in range(5001, 5009):
            chan = connect(control.addr)
            chan.send({"type": "register", "addr": f"10.0.0.2:{port}"})
            chan.recv()
            chan.close()
        grants: list[list[str]] = []
        errors: list[Exception] = []
        lock = threading.Lock()

        def client():
            try:
                got = request_servers(control.addr, 2)
                with lock:
                    grants.append(got)
            except Exception as exc:  # surface in the main thread
                with lock:
                    errors.append(exc)

        threads = [threading.Thread(target=client) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        flat = [a for g in grants for a in g]
        assert len(flat) == len(set(flat)) == 8


class TestEvalServer:
    def test_task_then_eval(self, control):
        (worker,) = _worker(control)
        dim = Dimension.continuous(2, -3, 3)
        chan = connect(worker.advertise)
        chan.send({"type": "task",
                   "objective": make_objective_spec("sphere", dim)})
        assert chan.recv()["type"] == "ok"
        chan.send({"type": "eval", "id": 1, "x": [1.0, 2.0]})
        reply = chan.recv()
        assert reply == {"type": "value", "id": 1, "y": 5.0}
        chan.close()
        worker.stop()

    def test_ackley_at_origin(self, control):
        (worker,) = _worker(control)
        dim = Dimension.continuous(3, -1, 1)
        chan = connect(worker.advertise)
        chan.send({"type": "task",
                   "objective": make_objective_spec("ackley", dim)})
        chan.recv()
        chan.send({"type": "eval", "id": 4, "x": [0.0, 0.0, 0.0]})
        assert chan.recv() == {"type": "value", "id": 4, "y": 0.0}
        chan.close()
        worker.stop()

    def test_eval_before_task(self, control):
        (worker,) = _worker(control)
        chan = connect(worker.advertise)
        chan.send({"type": "eval", "id": 9, "x": [0.0]})
        reply = chan.recv()
        assert reply["type"] == "error"
        assert reply["id"] == 9
        assert "no task bound" in reply["reason"]
        chan.close()
        worker.stop()

    def test_unresolvable_objective(self, control):
        (worker,) = _worker(control)
        dim = Dimension.continuous(1, 0, 1)
        chan = connect(worker.advertise)
        spec = make_objective_spec("sphere", dim)
        spec["name"] = "mystery"
        chan.send({"type": "task", "objective": spec})
        reply = chan.recv()
        assert reply["type"] == "error" and "mystery" in reply["reason"]
        chan.close()
        worker.stop()

    def test_evaluator_crash_keeps_server_alive(self, control):
        (worker,) = _worker(control)
        dim = Dimension.continuous(1, 0, 1)
        spec = make_objective_spec(
            "cmd", dim, {"command": f"{sys.executable} -c 'import sys; sys.exit(3)'"})
        chan = connect(worker.advertise)
        chan.send({"type": "task", "objective": spec})
        assert chan.recv()["type"] == "ok"
        chan.send({"type": "eval", "id": 2, "x": [0.5]})
        reply = chan.recv()
        assert reply["type"] == "error" and reply["id"] == 2
        # still alive: bind a working task on the same connection
        chan.send({"type": "task",
                   "objective": make_objective_spec("sphere", dim)})
        assert chan.recv()["type"] == "ok"
        chan.send({"type": "eval", "id": 3, "x": [0.5]})
        assert chan.recv() == {"type": "value", "id": 3, "y": 0.25}
        chan.close()
        worker.stop()

    def test_reregisters_after_session(self, control):
        (worker,) = _worker(control)
        granted = request_servers(control.addr, 1)
        assert granted == [worker.advertise]
        assert control.snapshot()[worker.advertise] == "granted"
        chan = connect(worker.advertise)
        chan.send({"type": "task", "objective": make_objective_spec(
            "sphere", Dimension.continuous(1, 0, 1))})
        chan.recv()
        chan.close()  # session ends; worker re-registers itself
        deadline = time.time() + 5
        while time.time() < deadline:
            if control.snapshot().get(worker.advertise) == "free":
                break
            time.sleep(0.02)
        assert control.snapshot()[worker.advertise] == "free"
        worker.stop()


class TestAsyncOptimize:
    def test_single_worker_reproduces_in_process_history(self, control):
        workers = _worker(control, 1)
        dim = Dimension.continuous(2, -1, 1)
        spec = make_objective_spec("sphere", dim)
        ledger = History()
        sol = async_optimize(control.addr, 1, spec, Parameter(budget=90, seed=7),
                             ledger=ledger)
        reference = Objective(sphere, dim)
        ref_sol = opt_min(reference, Parameter(budget=90, seed=7))
        assert sorted(ledger.values()) == sorted(reference.history.values())
        assert sol.value == ref_sol.value
        for w in workers:
            w.stop()

    @pytest.mark.parametrize("n_workers", [1, 2, 3, 4])
    def test_budget_exact_across_worker_counts(self, control, n_workers):
        workers = _worker(control, n_workers)
        spec = make_objective_spec("sphere", Dimension.continuous(2, -1, 1))
        ledger = History()
        stats: dict = {}
        async_optimize(control.addr, n_workers, spec,
                       Parameter(budget=60, seed=3), ledger=ledger, stats=stats)
        assert len(ledger) == 60
        assert stats["collected"] == 60
        assert stats["guard_max"] == 1
        for w in workers:
            w.stop()

    def test_best_so_far_monotone_in_completion_order(self, control):
        workers = _worker(control, 2)
        spec = make_objective_spec("ackley", Dimension.continuous(3, -1, 1))
        ledger = History()
        async_optimize(control.addr, 2, spec, Parameter(budget=80, seed=5),
                       ledger=ledger)
        best = [r.best_so_far for r in ledger.records]
        assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
        for w in workers:
            w.stop()

    def test_no_free_servers(self, control):
        with pytest.raises(ConnectionError):
            async_optimize(control.addr, 1,
                           make_objective_spec("sphere", Dimension.continuous(2, -1, 1)),
                           Parameter(budget=40, seed=1))

    def test_all_workers_lost_raises_partial_result(self, control):
        proc = _spawn_worker_subprocess(control.addr)
        try:
            spec = make_objective_spec("sphere", Dimension.continuous(2, -1, 1),
                                       {"delay_loops": 120_000})
            result: dict = {}

            def run():
                try:
                    async_optimize(control.addr, 1, spec,
                                   Parameter(budget=200, seed=2))
                except Exception as exc:
                    result["error"] = exc

            t = threading.Thread(target=run)
            t.start()
            time.sleep(1.0)  # let some evaluations land
            proc.send_signal(signal.SIGKILL)
            t.join(timeout=30)
            assert isinstance(result.get("error"), PartialResultError)
            assert result["error"].history is not None
        finally:
            proc.kill()

    def test_worker_kill_mid_run_still_exact_budget(self, control):
        victim = _spawn_worker_subprocess(control.addr)
        survivor = EvalServer(control.addr).start()
        try:
            spec = make_objective_spec("sphere", Dimension.continuous(2, -1, 1),
                                       {"delay_loops": 150_000})
            ledger = History()
            stats: dict = {}
            done: dict = {}

            def run():
                done["sol"] = async_optimize(control.addr, 2, spec,
                                             Parameter(budget=300, seed=4),
                                             ledger=ledger, stats=stats)

            t = threading.Thread(target=run)
            t.start()
            deadline = time.time() + 30
            while len(ledger) < 20 and time.time() < deadline:
                time.sleep(0.02)
            assert t.is_alive(), "run finished before the fault injection"
            victim.send_signal(signal.SIGKILL)
            t.join(timeout=120)
            assert not t.is_alive()
            assert "sol" in done
            assert len(ledger) == 300
            assert stats["collected"] == 300
            assert stats["workers_lost"] == 1
        finally:
            victim.kill()
            survivor.stop()

    def test_paper_scale_budget_configuration_accepted(self):
        # accepted, not executed: the full-scale run is out of test scope
        parameter = Parameter(budget=100_000)
        parameter.validate()
        assert parameter.budget == 100_000


def _spawn_worker_subprocess(control_addr: str) -> subprocess.Popen:
    proc = subprocess.Popen(
        [sys.executable, "-m", "zeroth", "evalserver",
         "--control", control_addr, "--listen", "127.0.0.1:0"],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)
    line = proc.stdout.readline()
    assert line.startswith("LISTENING "), line
    return proc
