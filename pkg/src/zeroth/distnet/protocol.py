"""Line-delimited JSON wire protocol.

One UTF-8 JSON object per ``\\n``-terminated line. Encoding is canonical
(fixed field order, no whitespace) so golden byte comparisons are stable;
decoding accepts any field order but rejects unknown types and missing or
ill-typed fields, naming the offending field.
"""

from __future__ import annotations

import json
import socket
from typing import Optional

MAX_LINE = 16 * 1024 * 1024

# Canonical field order per message type; optional fields in brackets.
FIELDS = {
    "register": ("addr",),
    "ok": (),
    "request_servers": ("n",),
    "servers": ("addrs",),
    "release": ("addrs",),
    "task": ("objective",),
    "eval": ("id", "x"),
    "value": ("id", "y"),
    "error": ("reason",),
    "shutdown": (),
}
OPTIONAL_FIELDS = {"error": ("id",)}


class DecodeError(ValueError):
    """Malformed wire message; ``field`` names what was wrong."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field


def encode(msg: dict) -> bytes:
    """Canonical single-line encoding of a message dict."""
    mtype = msg.get("type")
    if mtype not in FIELDS:
        raise DecodeError(f"unknown type {mtype!r}", field="type")
    ordered = {"type": mtype}
    for name in FIELDS[mtype]:
        if name not in msg:
            raise DecodeError(f"missing field {name!r}", field=name)
        ordered[name] = msg[name]
    for name in OPTIONAL_FIELDS.get(mtype, ()):
        if name in msg and msg[name] is not None:
            ordered[name] = msg[name]
    line = json.dumps(ordered, separators=(",", ":"), ensure_ascii=False)
    if "\n" in line:
        raise DecodeError("message must not embed newlines", field="type")
    return line.encode("utf-8") + b"\n"


_VALIDATORS = {
    ("register", "addr"): lambda v: isinstance(v, str) and v,
    ("request_servers", "n"): lambda v: isinstance(v, int) and not isinstance(v, bool),
    ("servers", "addrs"): lambda v: isinstance(v, list) and all(isinstance(a, str) for a in v),
    ("release", "addrs"): lambda v: isinstance(v, list) and all(isinstance(a, str) for a in v),
    ("task", "objective"): lambda v: isinstance(v, dict),
    ("eval", "id"): lambda v: isinstance(v, int) and not isinstance(v, bool),
    ("eval", "x"): lambda v: isinstance(v, list) and all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in v),
    ("value", "id"): lambda v: isinstance(v, int) and not isinstance(v, bool),
    ("value", "y"): lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    ("error", "reason"): lambda v: isinstance(v, str),
    ("error", "id"): lambda v: isinstance(v, int) and not isinstance(v, bool),
}


def decode(line) -> dict:
    """Parse one wire line into a validated message dict."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"not UTF-8: {exc}", field="type") from exc
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"invalid json: {exc}", field="type") from exc
    if not isinstance(obj, dict):
        raise DecodeError("message must be a json object", field="type")
    mtype = obj.get("type")
    if mtype is None:
        raise DecodeError("missing field 'type'", field="type")
    if mtype not in FIELDS:
        raise DecodeError(f"unknown type {mtype!r}", field="type")
    for name in FIELDS[mtype]:
        if name not in obj:
            raise DecodeError(f"missing field {name!r}", field=name)
    for (vtype, name), check in _VALIDATORS.items():
        if vtype == mtype and name in obj and not check(obj[name]):
            raise DecodeError(f"bad value for field {name!r}", field=name)
    return obj


class LineChannel:
    """Blocking message channel over a connected socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._rfile = sock.makefile("rb")

    def send(self, msg: dict) -> None:
        self.sock.sendall(encode(msg))

    def recv(self) -> Optional[dict]:
        """Next message, or None on a cleanly closed connection."""
        line = self._rfile.readline(MAX_LINE)
        if not line:
            return None
        return decode(line)

    def close(self) -> None:
        try:
            self._rfile.close()
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


def connect(addr: str, timeout: Optional[float] = None) -> LineChannel:
    host, port = split_addr(addr)
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return LineChannel(sock)


def split_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {addr!r}")
    return host, int(port)


def format_addr(host: str, port: int) -> str:
    return f"{host}:{port}"
