from __future__ import annotations

import math

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from oneway.circuit_ir import CNOT, DiagTwoQubit, Hadamard, LogicalCircuit, RotEuler, RotX, RotZ, SPhase
from oneway.quantum_backend import apply_network_unitary

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def _generic(a: float) -> bool:
    return abs(a - round(a / (math.pi / 2)) * math.pi / 2) > 1e-6


generic_angles = st.floats(-math.pi, math.pi, allow_nan=False, exclude_min=True, exclude_max=True).filter(_generic)
any_angles = st.one_of(generic_angles, st.sampled_from([0.0, math.pi / 2, -math.pi / 2, math.pi]))


@st.composite
def gates(draw, n: int, kinds: tuple[str, ...], neighbor_only: bool = False, angles=generic_angles):
    kinds = tuple(k for k in kinds if n > 1 or k not in ("cnot", "diag"))
    kind = draw(st.sampled_from(kinds))
    q = draw(st.integers(0, n - 1))
    if kind in ("cnot", "diag"):
        if neighbor_only:
            a = draw(st.integers(0, n - 2))
            c, t = (a, a + 1) if draw(st.booleans()) else (a + 1, a)
        else:
            c = q
            t = draw(st.integers(0, n - 1).filter(lambda v: v != c))
        if kind == "cnot":
            return CNOT(c, t)
        return DiagTwoQubit(c, t, draw(angles), draw(angles), draw(angles))
    if kind == "h":
        return Hadamard(q)
    if kind == "s":
        return SPhase(q)
    if kind == "rz":
        return RotZ(q, draw(angles))
    if kind == "rx":
        return RotX(q, draw(angles))
    return RotEuler(q, draw(angles), draw(angles), draw(angles))


@st.composite
def circuits(
    draw,
    max_n: int = 3,
    max_gates: int = 6,
    kinds: tuple[str, ...] = ("cnot", "h", "s", "rz", "rx", "rot"),
    min_n: int = 1,
    neighbor_only: bool = False,
    angles=generic_angles,
):
    n = draw(st.integers(min_n, max_n))
    gs = draw(st.lists(gates(n, kinds, neighbor_only, angles), max_size=max_gates))
    return LogicalCircuit(n, tuple(gs))


def circuit_unitary(c: LogicalCircuit) -> np.ndarray:
    """Full matrix, qubit 0 the high bit."""
    dim = 2**c.n_qubits
    cols = [apply_network_unitary(np.eye(dim, dtype=complex)[:, i], c) for i in range(dim)]
    return np.stack(cols, axis=1)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    k = int(np.argmax(np.abs(b)))
    if abs(b[k]) < tol:
        return bool(np.allclose(a, 0, atol=tol))
    ph = a[k] / b[k]
    return abs(abs(ph) - 1) < tol and bool(np.allclose(a, ph * b, atol=tol))


def pytest_terminal_summary(terminalreporter) -> None:
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
