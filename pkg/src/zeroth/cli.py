"""Command-line entry points.

Subcommands
    run          single-process optimization, history written as CSV
    control      registry daemon for distributed runs
    evalserver   evaluation worker daemon
    client       asynchronous distributed optimization
    poss         subset selection on an instance file
    scaling-exp  local throughput experiment over worker counts
"""

from __future__ import annotations

import argparse
import subprocess
import sys
import time
from typing import Optional

from . import distnet, objectives
from .core import (ConfigError, Dimension, History, Objective, Parameter, opt_min,
                   write_history)
from .embedding import EmbeddingConfig
from .noise import NoiseConfig
from .racos import EvaluationTimeout

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_TIME_LIMIT = 3

FUNCS = ("sphere", "ackley", "lowdim_sphere", "max_coverage",
         "sparse_regression", "cmd")


def _add_objective_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--func", choices=FUNCS, default="sphere")
    p.add_argument("--dim", type=int, default=2, help="coordinate count")
    p.add_argument("--bounds", default="-1,1", help="LO,HI box bounds per coordinate")
    p.add_argument("--eff-dims", type=int, default=None,
                   help="effective dimensions for lowdim_sphere")
    p.add_argument("--instance", default=None, help="instance JSON path")
    p.add_argument("--k", type=int, default=None, help="cardinality bound")
    p.add_argument("--command", default=None, help="command line for --func cmd")
    p.add_argument("--delay-loops", type=int, default=0,
                   help="busy-loop iterations added to each evaluation")


def _add_parameter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-size", type=int, default=20)
    p.add_argument("--positive-size", type=int, default=2)
    p.add_argument("--model-sample-prob", type=float, default=0.95)
    p.add_argument("--uncertain-dims", type=int, default=1)
    p.add_argument("--replace-strategy", choices=("worst-negative", "random-negative"),
                   default="worst-negative")
    p.add_argument("--noise-mode", choices=("none", "resample", "suppression", "threshold"),
                   default="none")
    p.add_argument("--resample-m", type=int, default=10)
    p.add_argument("--suppress-s", type=int, default=20)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--embed-dlow", type=int, default=None)
    p.add_argument("--sre-stages", type=int, default=5)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")


def _parse_bounds(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bounds must be LO,HI: {exc}") from exc
    return lo, hi


def _objective_parts(args) -> tuple[str, Dimension, dict]:
    """(name, dimension, wire params) from CLI flags."""
    params: dict = {}
    if args.delay_loops:
        params["delay_loops"] = args.delay_loops
    if args.func in ("max_coverage", "sparse_regression"):
        if not args.instance:
            raise ConfigError(f"--func {args.func} needs --instance")
        params["instance"] = objectives.load_instance(args.instance)
        dimension = objectives.instance_dimension(args.func, params)
    else:
        lo, hi = _parse_bounds(args.bounds)
        dimension = Dimension.continuous(args.dim, lo, hi)
        if args.func == "lowdim_sphere":
            params["effective_dims"] = args.eff_dims or args.dim
        if args.func == "cmd":
            if not args.command:
                raise ConfigError("--func cmd needs --command")
            params["command"] = args.command
    return args.func, dimension, params


def _build_objective(args) -> Objective:
    name, dimension, params = _objective_parts(args)
    objective = objectives.build_objective(name, dimension, params)
    objective.constraint = args.k
    return objective


def _build_parameter(args, algorithm: str = "auto") -> Parameter:
    noise = None
    if args.noise_mode != "none":
        noise = NoiseConfig(mode=args.noise_mode, resample_m=args.resample_m,
                            suppress_s=args.suppress_s, threshold=args.threshold)
    embedding = None
    if getattr(args, "embed_dlow", None):
        embedding = EmbeddingConfig(d_low=args.embed_dlow, stages=args.sre_stages)
    return Parameter(
        budget=args.budget, algorithm=algorithm, train_size=args.train_size,
        positive_size=args.positive_size, model_sample_prob=args.model_sample_prob,
        uncertain_dims=args.uncertain_dims, replace_strategy=args.replace_strategy,
        seed=args.seed, noise=noise, embedding=embedding,
        time_limit_s=args.time_limit)


def _cmd_run(args) -> int:
    objective = _build_objective(args)
    parameter = _build_parameter(args, algorithm=args.algo)
    try:
        solution = opt_min(objective, parameter)
    except EvaluationTimeout:
        if args.out:
            write_history(objective, args.out)
        print("time limit expired before any evaluation", file=sys.stderr)
        return EXIT_TIME_LIMIT
    if args.out:
        write_history(objective, args.out)
    evals = len(objective.history)
    print(f"best value {solution.value!r} after {evals} evaluations")
    if evals < parameter.budget:
        print("stopped early: time limit reached", file=sys.stderr)
        return EXIT_TIME_LIMIT
    return EXIT_OK


def _cmd_poss(args) -> int:
    if not args.instance:
        raise ConfigError("poss needs --instance")
    if args.k is None:
        raise ConfigError("poss needs --k")
    if args.budget is None:
        if args.iterations is None:
            raise ConfigError("poss needs --budget or --iterations")
        args.budget = args.iterations + 1
    inst = objectives.load_instance(args.instance)
    name = inst["type"]
    params = {"instance": inst}
    dimension = objectives.instance_dimension(name, params)
    objective = objectives.build_objective(name, dimension, params)
    objective.constraint = args.k
    parameter = Parameter(budget=args.budget, algorithm="poss", seed=args.seed,
                          time_limit_s=args.time_limit)
    solution = opt_min(objective, parameter)
    if args.out:
        write_history(objective, args.out)
    chosen = [i for i, v in enumerate(solution.x) if v >= 0.5]
    print(f"best value {solution.value!r} with subset {chosen}")
    return EXIT_OK if len(objective.history) >= parameter.budget else EXIT_TIME_LIMIT


def _cmd_control(args) -> int:
    distnet.control_serve(args.listen)
    return EXIT_OK


def _cmd_evalserver(args) -> int:
    distnet.eval_serve(args.listen, args.control)
    return EXIT_OK


def _cmd_client(args) -> int:
    name, dimension, params = _objective_parts(args)
    spec = distnet.make_objective_spec(name, dimension, params)
    parameter = _build_parameter(args, algorithm="sracos")
    ledger = History()
    solution = distnet.async_optimize(args.control, args.servers, spec, parameter,
                                      ledger=ledger)
    if args.out:
        write_history(ledger, args.out)
    print(f"best value {solution.value!r} after {len(ledger)} evaluations")
    return EXIT_OK if len(ledger) >= parameter.budget else EXIT_TIME_LIMIT


def _spawn(cmd: list[str]) -> tuple[subprocess.Popen, str]:
    """Start a daemon subprocess and read its LISTENING line."""
    proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
                            text=True)
    line = proc.stdout.readline()
    if not line.startswith("LISTENING "):
        proc.terminate()
        raise RuntimeError(f"daemon failed to start: {cmd} -> {line!r}")
    return proc, line.split()[1]


def _cmd_scaling_exp(args) -> int:
    counts = [int(v) for v in args.servers.split(",")]
    rows = []
    for count in counts:
        procs = []
        try:
            control_proc, control_addr = _spawn(
                [sys.executable, "-m", "zeroth", "control", "--listen", "127.0.0.1:0"])
            procs.append(control_proc)
            for _ in range(count):
                worker_proc, _addr = _spawn(
                    [sys.executable, "-m", "zeroth", "evalserver",
                     "--control", control_addr, "--listen", "127.0.0.1:0"])
                procs.append(worker_proc)
            lo, hi = _parse_bounds(args.bounds)
            dimension = Dimension.continuous(args.dim, lo, hi)
            spec = distnet.make_objective_spec(
                args.func, dimension, {"delay_loops": args.delay_loops})
            parameter = Parameter(budget=args.budget, seed=args.seed)
            t0 = time.perf_counter()
            distnet.async_optimize(control_addr, count, spec, parameter)
            wall_ms = int(round((time.perf_counter() - t0) * 1000))
            rows.append((count, wall_ms))
            print(f"servers={count} wall_ms={wall_ms}", flush=True)
        finally:
            for proc in procs:
                proc.terminate()
            for proc in procs:
                try:
                    proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    proc.kill()
    text = "servers,wall_ms\n" + "".join(f"{c},{w}\n" for c, w in rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zeroth",
                                     description="derivative-free optimization toolkit")
    sub = parser.add_subparsers(dest="role", required=True)

    p = sub.add_parser("run", help="single-process optimization")
    p.add_argument("--algo", choices=("auto", "sracos", "racos", "poss"), default="auto")
    _add_objective_flags(p)
    _add_parameter_flags(p)
    p.add_argument("--out", default=None, help="history CSV path")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("control", help="run the control server")
    p.add_argument("--listen", required=True, help="HOST:PORT (port 0 picks one)")
    p.set_defaults(fn=_cmd_control)

    p = sub.add_parser("evalserver", help="run an evaluation server")
    p.add_argument("--control", required=True, help="control server HOST:PORT")
    p.add_argument("--listen", required=True, help="HOST:PORT (port 0 picks one)")
    p.set_defaults(fn=_cmd_evalserver)

    p = sub.add_parser("client", help="distributed asynchronous optimization")
    p.add_argument("--control", required=True, help="control server HOST:PORT")
    p.add_argument("--servers", type=int, required=True, help="workers to lease")
    _add_objective_flags(p)
    _add_parameter_flags(p)
    p.add_argument("--out", default=None, help="history CSV path")
    p.set_defaults(fn=_cmd_client)

    p = sub.add_parser("poss", help="subset selection on an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_poss)

    p = sub.add_parser("scaling-exp", help="local worker-count scaling experiment")
    p.add_argument("--servers", default="1,2,4", help="comma-separated worker counts")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--delay-loops", type=int, required=True)
    p.add_argument("--func", choices=("sphere", "ackley"), default="ackley")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--bounds", default="-1,1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="results CSV path")
    p.set_defaults(fn=_cmd_scaling_exp)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConnectionError, distnet.PartialResultError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
