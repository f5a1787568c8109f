"""Distributed optimization: control server, evaluation servers, client."""

from .client import (PartialResultError, async_optimize, make_objective_spec,
                     release_servers, request_servers)
from .control import ControlServer, control_serve
from .evalserver import EvalServer, eval_serve
from .protocol import DecodeError, LineChannel, connect, decode, encode

__all__ = [
    "PartialResultError", "async_optimize", "make_objective_spec",
    "request_servers", "release_servers", "ControlServer", "control_serve",
    "EvalServer", "eval_serve", "DecodeError", "LineChannel", "connect",
    "decode", "encode",
]
