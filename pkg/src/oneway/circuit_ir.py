"""Logical circuits: gate set, text parser, macro expansion and layering."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

__all__ = [
    "CNOT",
    "Hadamard",
    "SPhase",
    "RotZ",
    "RotX",
    "RotEuler",
    "DiagTwoQubit",
    "Gate",
    "LogicalCircuit",
    "CircuitError",
    "parse_circuit",
    "format_circuit",
    "expand_macros",
    "network_depth",
    "gate_qubits",
]


class CircuitError(ValueError):
    """Malformed circuit text or an invalid gate."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class Hadamard:
    q: int


@dataclass(frozen=True)
class SPhase:
    """The pi/2 phase gate, exp(-i pi/4 Z)."""

    q: int


@dataclass(frozen=True)
class RotZ:
    """exp(-i angle Z / 2)."""

    q: int
    angle: float


@dataclass(frozen=True)
class RotX:
    """exp(-i angle X / 2)."""

    q: int
    angle: float


@dataclass(frozen=True)
class RotEuler:
    """Ux(zeta) Uz(eta) Ux(xi): the x rotation by xi acts first."""

    q: int
    xi: float
    eta: float
    zeta: float


@dataclass(frozen=True)
class DiagTwoQubit:
    """diag(e^{i phi1}, e^{i phi2}, e^{i phi3}, 1) on |q1 q2>, q1 the high bit."""

    q1: int
    q2: int
    phi1: float
    phi2: float
    phi3: float


Gate = Union[CNOT, Hadamard, SPhase, RotZ, RotX, RotEuler, DiagTwoQubit]
PRIMITIVES = (CNOT, Hadamard, SPhase, RotZ, RotX, RotEuler)


def gate_qubits(g: Gate) -> tuple[int, ...]:
    if isinstance(g, CNOT):
        return (g.control, g.target)
    if isinstance(g, DiagTwoQubit):
        return (g.q1, g.q2)
    return (g.q,)


def _gate_angles(g: Gate) -> tuple[float, ...]:
    if isinstance(g, (RotZ, RotX)):
        return (g.angle,)
    if isinstance(g, RotEuler):
        return (g.xi, g.eta, g.zeta)
    if isinstance(g, DiagTwoQubit):
        return (g.phi1, g.phi2, g.phi3)
    return ()


@dataclass(frozen=True)
class LogicalCircuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise CircuitError("circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            qs = gate_qubits(g)
            for q in qs:
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"qubit {q} out of range for {self.n_qubits} qubits")
            if len(qs) == 2 and qs[0] == qs[1]:
                raise CircuitError("two-qubit gate needs distinct qubits (control = target)")
            for a in _gate_angles(g):
                if not math.isfinite(a):
                    raise CircuitError(f"non-finite angle {a!r}")

    def __len__(self) -> int:
        return len(self.gates)


_NAMES = {
    "cnot": (CNOT, 2, 0),
    "h": (Hadamard, 1, 0),
    "s": (SPhase, 1, 0),
    "rz": (RotZ, 1, 1),
    "rx": (RotX, 1, 1),
    "rot": (RotEuler, 1, 3),
    "diag": (DiagTwoQubit, 2, 3),
}

_ANGLE_RE = re.compile(r"^([+-]?)(?:(\d+(?:\.\d*)?|\.\d+)\*)?pi(?:/(\d+(?:\.\d*)?))?$")


def _parse_angle(tok: str, line: int, col: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        m = _ANGLE_RE.match(tok.strip().lower())
        if m is None:
            raise CircuitError(f"bad angle {tok!r}", line, col) from None
        sign, coef, den = m.groups()
        val = (float(coef) if coef else 1.0) * math.pi / (float(den) if den else 1.0)
        if sign == "-":
            val = -val
    if not math.isfinite(val):
        raise CircuitError(f"non-finite angle {tok!r}", line, col)
    return val


def _parse_index(tok: str, line: int, col: int) -> int:
    if not re.fullmatch(r"\d+", tok):
        raise CircuitError(f"bad qubit index {tok!r}", line, col)
    return int(tok)


def parse_circuit(text: str) -> LogicalCircuit:
    """Parse the line-oriented circuit format; ``qubits <n>`` must come first."""
    n: int | None = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if not toks:
            continue
        word, col = toks[0]
        word = word.lower()
        if n is None:
            if word != "qubits" or len(toks) != 2:
                raise CircuitError("expected 'qubits <n>' as first statement", lineno, col)
            n = _parse_index(toks[1][0], lineno, toks[1][1])
            if n < 1:
                raise CircuitError("qubit count must be positive", lineno, toks[1][1])
            continue
        if word == "qubits":
            raise CircuitError("duplicate 'qubits' statement", lineno, col)
        if word not in _NAMES:
            raise CircuitError(f"unknown statement {word!r}", lineno, col)
        cls, n_idx, n_ang = _NAMES[word]
        args = toks[1:]
        if len(args) != n_idx + n_ang:
            raise CircuitError(f"'{word}' takes {n_idx + n_ang} arguments, got {len(args)}", lineno, col)
        idx = [_parse_index(t, lineno, c) for t, c in args[:n_idx]]
        for (t, c), q in zip(args[:n_idx], idx):
            if q >= n:
                raise CircuitError(f"qubit {q} out of range for {n} qubits", lineno, c)
        if n_idx == 2 and idx[0] == idx[1]:
            raise CircuitError("control = target", lineno, args[1][1])
        angs = [_parse_angle(t, lineno, c) for t, c in args[n_idx:]]
        gates.append(cls(*idx, *angs))
    if n is None:
        raise CircuitError("empty circuit: missing 'qubits <n>'")
    return LogicalCircuit(n, tuple(gates))


def format_circuit(c: LogicalCircuit) -> str:
    """Inverse of :func:`parse_circuit` (angles printed with full precision)."""
    out = [f"qubits {c.n_qubits}"]
    for g in c.gates:
        if isinstance(g, CNOT):
            out.append(f"cnot {g.control} {g.target}")
        elif isinstance(g, Hadamard):
            out.append(f"h {g.q}")
        elif isinstance(g, SPhase):
            out.append(f"s {g.q}")
        elif isinstance(g, RotZ):
            out.append(f"rz {g.q} {g.angle!r}")
        elif isinstance(g, RotX):
            out.append(f"rx {g.q} {g.angle!r}")
        elif isinstance(g, RotEuler):
            out.append(f"rot {g.q} {g.xi!r} {g.eta!r} {g.zeta!r}")
        else:
            out.append(f"diag {g.q1} {g.q2} {g.phi1!r} {g.phi2!r} {g.phi3!r}")
    return "\n".join(out) + "\n"


def _swap(a: int, b: int) -> list[Gate]:
    return [CNOT(a, b), CNOT(b, a), CNOT(a, b)]


def _neighbor_cnot(c: int, t: int) -> list[Gate]:
    # walk the target next to the control, apply, walk back
    if abs(c - t) == 1:
        return [CNOT(c, t)]
    step = 1 if t < c else -1
    path = list(range(t, c + step, step))[: abs(c - t)]  # t, t+step, ..., c-step
    fwd: list[Gate] = []
    for a, b in zip(path, path[1:]):
        fwd += _swap(a, b)
    return fwd + [CNOT(c, path[-1])] + [g for a, b in reversed(list(zip(path, path[1:]))) for g in _swap(a, b)]


def expand_macros(c: LogicalCircuit) -> LogicalCircuit:
    """Rewrite diagonal gates and distant CNOTs into nearest-neighbor primitives."""
    out: list[Gate] = []
    for g in c.gates:
        if isinstance(g, DiagTwoQubit):
            alpha = (-g.phi1 - g.phi2 + g.phi3) / 2
            beta = (-g.phi1 + g.phi2 - g.phi3) / 2
            gamma = (-g.phi1 + g.phi2 + g.phi3) / 2
            out += [RotZ(g.q1, alpha), RotZ(g.q2, beta)]
            out += _neighbor_cnot(g.q1, g.q2)
            out.append(RotZ(g.q2, gamma))
            out += _neighbor_cnot(g.q1, g.q2)
        elif isinstance(g, CNOT):
            out += _neighbor_cnot(g.control, g.target)
        else:
            out.append(g)
    return LogicalCircuit(c.n_qubits, tuple(out))


def network_depth(c: LogicalCircuit) -> int:
    """Number of layers under greedy left-packing."""
    front = [0] * c.n_qubits
    depth = 0
    for g in c.gates:
        qs = gate_qubits(g)
        layer = max(front[q] for q in qs) + 1
        for q in qs:
            front[q] = layer
        depth = max(depth, layer)
    return depth
