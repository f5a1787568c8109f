"""Control server: registry of evaluation servers with exclusive leases.

Workers register their own listen address; clients request up to n free
workers and get exclusive grants until they release them. A re-register of
a known address resets it to free, which is how a worker returns itself to
the pool after its client disconnects.
"""

from __future__ import annotations

import socket
import threading
import time

from . import protocol


class ControlServer:
    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(64)
        self.host, self.port = self._sock.getsockname()[:2]
        self._lock = threading.Lock()
        self._registry: dict[str, dict] = {}  # addr -> {state, registered_at}
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._accept_thread: threading.Thread | None = None

    @property
    def addr(self) -> str:
        return protocol.format_addr(self.host, self.port)

    def start(self) -> "ControlServer":
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    def serve_forever(self) -> None:
        self.start()
        while not self._stop.wait(0.2):
            pass

    def stop(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass

    def snapshot(self) -> dict[str, str]:
        """Registry view for tests and diagnostics: addr -> lease state."""
        with self._lock:
            return {addr: entry["state"] for addr, entry in self._registry.items()}

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_conn(self, conn: socket.socket) -> None:
        chan = protocol.LineChannel(conn)
        try:
            while not self._stop.is_set():
                try:
                    msg = chan.recv()
                except protocol.DecodeError as exc:
                    chan.send({"type": "error", "reason": str(exc)})
                    continue  # malformed input keeps the connection open
                if msg is None:
                    return
                reply = self._dispatch(msg)
                chan.send(reply)
                if msg["type"] == "shutdown":
                    self.stop()
                    return
        except OSError:
            pass
        finally:
            chan.close()

    def _dispatch(self, msg: dict) -> dict:
        mtype = msg["type"]
        if mtype == "register":
            with self._lock:
                self._registry[msg["addr"]] = {"state": "free",
                                               "registered_at": time.time()}
            return {"type": "ok"}
        if mtype == "request_servers":
            n = msg["n"]
            if n <= 0:
                return {"type": "error", "reason": "n must be positive"}
            with self._lock:
                granted = []
                for addr, entry in self._registry.items():
                    if entry["state"] == "free":
                        entry["state"] = "granted"
                        granted.append(addr)
                        if len(granted) == n:
                            break
            return {"type": "servers", "addrs": granted}
        if mtype == "release":
            with self._lock:
                for addr in msg["addrs"]:
                    if addr in self._registry:
                        self._registry[addr]["state"] = "free"
            return {"type": "ok"}
        if mtype == "shutdown":
            return {"type": "ok"}
        return {"type": "error", "reason": f"unexpected message {mtype!r}"}


def control_serve(listen_addr: str) -> ControlServer:
    """Blocking entry point: serve until a shutdown message arrives."""
    host, port = protocol.split_addr(listen_addr)
    server = ControlServer(host, port)
    print(f"LISTENING {server.addr}", flush=True)
    server.serve_forever()
    return server
