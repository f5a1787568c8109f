"""Evaluation server: computes objective values for one client at a time.

On startup the server registers its own listen address with the control
server (retrying with exponential backoff). Each client session binds one
objective via a task message, then streams eval messages; replies carry
the request id so the client can correlate. When a session ends the server
re-registers, returning itself to the free pool.
"""

from __future__ import annotations

import socket
import threading
import time

import numpy as np

from .. import objectives as _objectives
from ..core import ConfigError
from . import protocol

REGISTER_ATTEMPTS = 5
REGISTER_BACKOFF_S = 0.2


class EvalServer:
    def __init__(self, control_addr: str, host: str = "127.0.0.1", port: int = 0,
                 advertise_host: str | None = None):
        self.control_addr = control_addr
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.host, self.port = self._sock.getsockname()[:2]
        self.advertise = protocol.format_addr(advertise_host or self.host, self.port)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def register(self) -> None:
        """Announce this server to the control registry, with retries."""
        delay = REGISTER_BACKOFF_S
        for attempt in range(REGISTER_ATTEMPTS):
            try:
                chan = protocol.connect(self.control_addr, timeout=5.0)
                try:
                    chan.send({"type": "register", "addr": self.advertise})
                    reply = chan.recv()
                finally:
                    chan.close()
                if reply is not None and reply["type"] == "ok":
                    return
            except OSError:
                pass
            if attempt < REGISTER_ATTEMPTS - 1:
                time.sleep(delay)
                delay *= 2
        raise ConnectionError(
            f"could not register with control server at {self.control_addr}")

    def start(self) -> "EvalServer":
        self.register()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self, announce=None) -> None:
        self.register()
        if announce is not None:
            announce(self.advertise)
        self._accept_loop()

    def stop(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass

    def _accept_loop(self) -> None:
        # One task-bound session at a time; lease exclusivity means clients
        # never compete for a worker anyway.
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            self._serve_session(conn)
            if not self._stop.is_set():
                try:
                    self.register()  # back to the free pool
                except ConnectionError:
                    return

    def _serve_session(self, conn: socket.socket) -> None:
        chan = protocol.LineChannel(conn)
        evaluator = None
        try:
            while not self._stop.is_set():
                try:
                    msg = chan.recv()
                except protocol.DecodeError as exc:
                    chan.send({"type": "error", "reason": str(exc)})
                    continue
                if msg is None:
                    return
                mtype = msg["type"]
                if mtype == "task":
                    try:
                        evaluator = self._bind_task(msg["objective"])
                    except Exception as exc:
                        evaluator = None
                        chan.send({"type": "error", "reason": str(exc)})
                        continue
                    chan.send({"type": "ok"})
                elif mtype == "eval":
                    if evaluator is None:
                        chan.send({"type": "error", "id": msg["id"],
                                   "reason": "no task bound"})
                        continue
                    try:
                        y = float(evaluator(np.asarray(msg["x"], dtype=np.float64)))
                    except Exception as exc:
                        chan.send({"type": "error", "id": msg["id"],
                                   "reason": f"evaluation failed: {exc}"})
                        continue
                    chan.send({"type": "value", "id": msg["id"], "y": y})
                elif mtype == "shutdown":
                    chan.send({"type": "ok"})
                    self.stop()
                    return
                else:
                    chan.send({"type": "error",
                               "reason": f"unexpected message {mtype!r}"})
        except OSError:
            pass
        finally:
            chan.close()

    @staticmethod
    def _bind_task(spec: dict):
        try:
            name = spec["name"]
            dim = _objectives.dimension_from_wire(spec["dim"])
            params = spec.get("params") or {}
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed objective spec: {exc}") from exc
        return _objectives.build_evaluator(name, dim, params)


def eval_serve(listen_addr: str, control_addr: str) -> EvalServer:
    """Blocking entry point: register, announce, serve until shutdown."""
    host, port = protocol.split_addr(listen_addr)
    server = EvalServer(control_addr, host, port)
    server.serve_forever(announce=lambda addr: print(f"LISTENING {addr}", flush=True))
    return server
