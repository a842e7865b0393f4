"""``oneway`` command line: compile, run, verify, depth, selftest.

Exit codes: 0 success, 1 usage or parse error, 2 verification failure,
3 capacity exceeded.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import random
import sys
import time
from collections.abc import Callable, Sequence
from pathlib import Path

from . import _jsonio
from .circuit_ir import CircuitError, LogicalCircuit, parse_circuit
from .compiler import CompiledProgram, compile_circuit, depth_report, dumps_program, program_from_json
from .quantum_backend import CapacityError
from .runtime import BackendError, full_run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_CAPACITY = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _read_text(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _load_circuit(path: str) -> LogicalCircuit:
    try:
        return parse_circuit(_read_text(path))
    except CircuitError as e:
        raise UsageError(f"{path}: {e}") from None


def _load_kappa(spec: str) -> dict[tuple[int, int], int] | None:
    if spec == "zero":
        return None
    try:
        raw = json.loads(_read_text(spec))
        out = {}
        for key, bit in raw.items():
            x, y = (int(t) for t in key.split(","))
            if bit not in (0, 1):
                raise ValueError(f"kappa for {key} must be 0 or 1")
            out[(x, y)] = int(bit)
        return out
    except (ValueError, AttributeError) as e:
        raise UsageError(f"bad kappa file {spec}: {e}") from None


def _load_program(path: str) -> CompiledProgram:
    try:
        return program_from_json(json.loads(_read_text(path)))
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"bad program file {path}: {e}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(out).write_text(text + "\n")


def cmd_compile(args: argparse.Namespace) -> int:
    program = compile_circuit(_load_circuit(args.circuit), _load_kappa(args.kappa))
    _emit(dumps_program(program), args.output)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    res = full_run(program, args.shots, args.seed, args.backend, threads=args.threads)
    _emit(_jsonio.dumps(res.to_json(per_shot=not args.summary)), args.output)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    from .verifier import verify_circuit

    circuit = _load_circuit(args.circuit)
    program = compile_circuit(circuit, _load_kappa(args.kappa))
    rep = verify_circuit(circuit, args.shots, args.seed, args.tvd_threshold, args.backend, program=program, corrupt=args.corrupt)
    _emit(_jsonio.dumps(rep.to_json()), args.output)
    print(f"{'PASS' if rep.ok else 'FAIL'} tvd={rep.distribution.tvd:.4f} threshold={rep.threshold}", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_VERIFY


def cmd_depth(args: argparse.Namespace) -> int:
    program = compile_circuit(_load_circuit(args.circuit), _load_kappa(args.kappa))
    rep = depth_report(program, args.delta_q, args.delta_cl, args.c, args.p, args.n_logical)
    _emit(_jsonio.dumps(rep), args.output)
    return EXIT_OK


def _selftest_checks() -> list[tuple[str, Callable[[], bool]]]:
    from .f2_pauli import PauliVector, apply_prop, circuit_prop_matrix, symplectic_product
    from .verifier import (
        cone_bruteforce,
        fixed_pattern_check,
        kappa_decomposition,
        random_circuit,
        template_check,
        verify_circuit,
    )
    from .circuit_ir import CNOT, Hadamard, RotEuler, SPhase

    rng = random.Random(0)

    def templates() -> bool:
        ok = True
        for g in (RotEuler(0, 0.3, -1.1, 2.0), Hadamard(0), SPhase(0)):
            for s in itertools.product((0, 1), repeat=4):
                ok &= template_check(g, s).ok
        for g in (Hadamard(0), SPhase(0)):
            for s in itertools.product((0, 1), repeat=4):
                ok &= fixed_pattern_check(g, s).ok
        for _ in range(16):
            s = {i: rng.randint(0, 1) for i in range(1, 15) if i != 7}
            ok &= template_check(CNOT(0, 1), s, seed=rng.randrange(1000)).ok
        return ok

    def symplectic() -> bool:
        for _ in range(50):
            c = random_circuit(rng, 3, 6, kinds=("cnot", "h", "s"))
            m = circuit_prop_matrix(c, 0, len(c.gates))
            a = PauliVector(3, rng.randrange(8), rng.randrange(8))
            b = PauliVector(3, rng.randrange(8), rng.randrange(8))
            if symplectic_product(a, b) != symplectic_product(apply_prop(m, a), apply_prop(m, b)):
                return False
        return True

    def cones() -> bool:
        for _ in range(10):
            p = compile_circuit(random_circuit(rng, rng.randint(1, 3), rng.randint(1, 6)))
            b = cone_bruteforce(p.circuit, p.pattern)
            if {k: v for k, v in p.cones.fc.items() if v} != {k: v for k, v in b.fc.items() if v}:
                return False
            if {k: v for k, v in p.cones.bc.items() if v} != {k: v for k, v in b.bc.items() if v}:
                return False
        return True

    def kappa() -> bool:
        return all(k == (i + o) % 2 for k, i, o in map(kappa_decomposition, itertools.product((0, 1), repeat=3)))

    def end_to_end() -> bool:
        c = parse_circuit("qubits 2\nrot 0 0.4 -1.3 0.9\ncnot 0 1\nrz 1 0.7\n")
        return verify_circuit(c, 4000, seed=1, threshold=0.05).ok

    return [
        ("template exactness", templates),
        ("symplectic invariance", symplectic),
        ("cone oracle equivalence", cones),
        ("kappa relation", kappa),
        ("end-to-end oracle", end_to_end),
    ]


def cmd_selftest(args: argparse.Namespace) -> int:
    failed = 0
    for name, check in _selftest_checks():
        t0 = time.perf_counter()
        ok = check()
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name} ({time.perf_counter() - t0:.2f}s)")
    return EXIT_OK if not failed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="oneway", description="Compile and simulate circuits as one-way measurement patterns.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("-o", "--output", help="write JSON here instead of stdout")

    def kappa(p: argparse.ArgumentParser) -> None:
        p.add_argument("--kappa", default="zero", help="'zero' or a JSON file mapping \"x,y\" to 0/1")

    def sampling(p: argparse.ArgumentParser) -> None:
        p.add_argument("--shots", type=_positive_int, default=1000)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--backend", choices=("auto", "dense", "tableau"), default="auto")
        p.add_argument("--threads", type=_positive_int, default=1)

    p = sub.add_parser("compile", help="circuit file -> program JSON")
    p.add_argument("circuit")
    kappa(p)
    common(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="program JSON -> run JSON")
    p.add_argument("program")
    sampling(p)
    p.add_argument("--summary", action="store_true", help="omit per-shot records")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="compare the one-way run with the circuit simulation")
    p.add_argument("circuit")
    sampling(p)
    kappa(p)
    p.add_argument("--tvd-threshold", type=float, default=0.03)
    p.add_argument("--corrupt", type=int, metavar="SITE", help="shift the angle of an adaptive site (negative control)")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("depth", help="logical depth and time-model report")
    p.add_argument("circuit")
    kappa(p)
    p.add_argument("--delta-q", type=float, default=1e-6, help="seconds per measurement round")
    p.add_argument("--delta-cl", type=float, default=1e-9, help="seconds per classical step")
    p.add_argument("--c", type=float, default=1.0, help="coefficient of the polynomial network depth")
    p.add_argument("--p", type=float, default=3.0, help="exponent of the polynomial network depth")
    p.add_argument("--n-logical", type=float, help="evaluate the asymptotic terms at this qubit count")
    common(p)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("selftest", help="run a quick battery of internal consistency checks")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("delta_q", "delta_cl", "tvd_threshold"):
        v = getattr(args, name, None)
        if v is not None and not (math.isfinite(v) and v >= 0):
            print(f"oneway: error: --{name.replace('_', '-')} must be a finite non-negative number", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"oneway: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as e:
        print(f"oneway: capacity exceeded: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (BackendError, ValueError) as e:
        print(f"oneway: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
