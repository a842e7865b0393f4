"""Pauli operators modulo sign as vectors over F2, and their propagation matrices.

A :class:`PauliVector` on ``n`` qubits stores its x and z halves as packed
Python integers (bit ``i`` belongs to qubit ``i``).  The operator it names is
the normal-ordered product ``prod_i X_i^{x_i} Z_i^{z_i}``.

A :class:`PropMatrix` acts on the stacked vector ``(x; z)`` and is stored as
``2n`` packed rows, row ``r`` giving output bit ``r`` (rows ``0..n-1`` are x
bits, rows ``n..2n-1`` are z bits).  In block form::

    new_x = Cxx x + Czx z
    new_z = Cxz x + Czz z
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .circuit_ir import CNOT, Hadamard, LogicalCircuit, RotEuler, RotX, RotZ, SPhase, Gate

__all__ = [
    "PauliVector",
    "PropMatrix",
    "symplectic_product",
    "pauli_to_vector",
    "vector_to_pauli",
    "prop_identity",
    "prop_matrix_hadamard",
    "prop_matrix_sphase",
    "prop_matrix_xquarter",
    "prop_matrix_cnot",
    "compose_prop",
    "apply_prop",
    "gate_prop_matrix",
    "circuit_prop_matrix",
    "is_quarter_turn",
    "is_clifford_angle",
    "CLIFFORD_TOL",
    "bits_to_hex",
    "hex_to_bits",
]

CLIFFORD_TOL = 1e-9


def _popcount(v: int) -> int:
    return v.bit_count()


def bits_to_hex(v: int) -> str:
    """Little-endian bit vector (bit 0 = element 0) as a hex string."""
    return format(v, "x")


def hex_to_bits(s: str) -> int:
    return int(s, 16) if s else 0


@dataclass(frozen=True)
class PauliVector:
    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("negative length")
        mask = (1 << self.n) - 1
        if self.x & ~mask or self.z & ~mask or self.x < 0 or self.z < 0:
            raise ValueError("bits beyond vector length")

    @classmethod
    def zero(cls, n: int) -> PauliVector:
        return cls(n)

    @classmethod
    def unit_x(cls, n: int, i: int) -> PauliVector:
        return cls(n, 1 << i, 0)

    @classmethod
    def unit_z(cls, n: int, i: int) -> PauliVector:
        return cls(n, 0, 1 << i)

    @classmethod
    def from_stacked(cls, n: int, v: int) -> PauliVector:
        mask = (1 << n) - 1
        return cls(n, v & mask, v >> n)

    @property
    def stacked(self) -> int:
        return self.x | (self.z << self.n)

    def x_bits(self) -> tuple[int, ...]:
        return tuple((self.x >> i) & 1 for i in range(self.n))

    def z_bits(self) -> tuple[int, ...]:
        return tuple((self.z >> i) & 1 for i in range(self.n))

    def __add__(self, other: PauliVector) -> PauliVector:
        _check_dims(self.n, other.n)
        return PauliVector(self.n, self.x ^ other.x, self.z ^ other.z)

    __xor__ = __add__

    def __bool__(self) -> bool:
        return bool(self.x or self.z)

    def __repr__(self) -> str:
        return f"PauliVector(n={self.n}, x={self.x_bits()}, z={self.z_bits()})"


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def symplectic_product(a: PauliVector, b: PauliVector) -> int:
    """1 if the two operators anticommute, else 0."""
    _check_dims(a.n, b.n)
    return _popcount((a.x & b.z) ^ (a.z & b.x)) & 1


def pauli_to_vector(ops: Sequence[tuple[int, int]] | Mapping[int, tuple[int, int]], n: int | None = None) -> PauliVector:
    """Per-qubit exponents ``(x_i, z_i)`` to a vector.

    ``ops`` is either a full sequence of length ``n`` or a sparse mapping
    ``qubit -> (x, z)`` (then ``n`` is required).
    """
    if isinstance(ops, Mapping):
        if n is None:
            raise ValueError("n required for sparse input")
        items: Iterable[tuple[int, tuple[int, int]]] = ops.items()
    else:
        n = len(ops) if n is None else n
        _check_dims(len(ops), n)
        items = enumerate(ops)
    x = z = 0
    for i, (xi, zi) in items:
        if not 0 <= i < n:
            raise IndexError(f"qubit {i} out of range")
        x ^= (xi & 1) << i
        z ^= (zi & 1) << i
    return PauliVector(n, x, z)


def vector_to_pauli(v: PauliVector) -> tuple[tuple[int, int], ...]:
    return tuple(zip(v.x_bits(), v.z_bits()))


@dataclass(frozen=True)
class PropMatrix:
    n: int
    rows: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.rows) != 2 * self.n:
            raise ValueError("PropMatrix needs 2n rows")

    def _block(self, row_off: int, col_off: int) -> tuple[tuple[int, ...], ...]:
        n = self.n
        return tuple(
            tuple((self.rows[row_off + r] >> (col_off + c)) & 1 for c in range(n)) for r in range(n)
        )

    @property
    def cxx(self) -> tuple[tuple[int, ...], ...]:
        return self._block(0, 0)

    @property
    def czx(self) -> tuple[tuple[int, ...], ...]:
        return self._block(0, self.n)

    @property
    def cxz(self) -> tuple[tuple[int, ...], ...]:
        return self._block(self.n, 0)

    @property
    def czz(self) -> tuple[tuple[int, ...], ...]:
        return self._block(self.n, self.n)

    @classmethod
    def from_blocks(cls, cxx, czx, cxz, czz) -> PropMatrix:
        n = len(cxx)
        rows = []
        for top, bottom in ((cxx, czx), (cxz, czz)):
            for r in range(n):
                v = 0
                for c in range(n):
                    v |= (int(top[r][c]) & 1) << c
                    v |= (int(bottom[r][c]) & 1) << (n + c)
                rows.append(v)
        return cls(n, tuple(rows))

    def transpose(self) -> PropMatrix:
        m = 2 * self.n
        return PropMatrix(self.n, tuple(sum(((self.rows[r] >> c) & 1) << r for r in range(m)) for c in range(m)))


def prop_identity(n: int) -> PropMatrix:
    return PropMatrix(n, tuple(1 << r for r in range(2 * n)))


def _check_index(n: int, i: int) -> None:
    if not 0 <= i < n:
        raise IndexError(f"qubit {i} out of range for n={n}")


def prop_matrix_hadamard(n: int, i: int) -> PropMatrix:
    _check_index(n, i)
    rows = list(prop_identity(n).rows)
    rows[i], rows[n + i] = 1 << (n + i), 1 << i
    return PropMatrix(n, tuple(rows))


def prop_matrix_sphase(n: int, i: int) -> PropMatrix:
    """z_i picks up x_i."""
    _check_index(n, i)
    rows = list(prop_identity(n).rows)
    rows[n + i] |= 1 << i
    return PropMatrix(n, tuple(rows))


def prop_matrix_xquarter(n: int, i: int) -> PropMatrix:
    """Quarter turn about x: x_i picks up z_i."""
    _check_index(n, i)
    rows = list(prop_identity(n).rows)
    rows[i] |= 1 << (n + i)
    return PropMatrix(n, tuple(rows))


def prop_matrix_cnot(n: int, c: int, t: int) -> PropMatrix:
    _check_index(n, c)
    _check_index(n, t)
    if c == t:
        raise ValueError("control = target")
    rows = list(prop_identity(n).rows)
    rows[t] |= 1 << c  # x_t += x_c
    rows[n + c] |= 1 << (n + t)  # z_c += z_t
    return PropMatrix(n, tuple(rows))


def compose_prop(second: PropMatrix, first: PropMatrix) -> PropMatrix:
    """Matrix product ``second @ first``: apply ``first`` then ``second``."""
    _check_dims(second.n, first.n)
    out = []
    for row in second.rows:
        acc = 0
        k = 0
        while row:
            if row & 1:
                acc ^= first.rows[k]
            row >>= 1
            k += 1
        out.append(acc)
    return PropMatrix(second.n, tuple(out))


def apply_prop(m: PropMatrix, v: PauliVector) -> PauliVector:
    _check_dims(m.n, v.n)
    s = v.stacked
    out = 0
    for r, row in enumerate(m.rows):
        out |= (_popcount(row & s) & 1) << r
    return PauliVector.from_stacked(m.n, out)


def is_clifford_angle(a: float) -> bool:
    """Angle is a multiple of pi/2 within tolerance."""
    m = round(a / (math.pi / 2))
    return abs(a - m * math.pi / 2) < CLIFFORD_TOL


def is_quarter_turn(a: float) -> bool:
    """Angle is an odd multiple of pi/2 within tolerance."""
    m = round(a / (math.pi / 2))
    return abs(a - m * math.pi / 2) < CLIFFORD_TOL and m % 2 == 1


def _euler_steps(g: Gate) -> list[tuple[str, float]]:
    if isinstance(g, RotX):
        return [("x", g.angle)]
    if isinstance(g, RotZ):
        return [("z", g.angle)]
    if isinstance(g, RotEuler):
        return [("x", g.xi), ("z", g.eta), ("x", g.zeta)]
    return []


def gate_prop_matrix(n: int, g: Gate) -> PropMatrix:
    """Propagation matrix of one primitive gate.

    Generic rotations act as the identity.  Rotations by an odd multiple of
    pi/2 are Clifford and move Paulis like the phase gate (z axis) or its
    Hadamard conjugate (x axis).
    """
    if isinstance(g, CNOT):
        return prop_matrix_cnot(n, g.control, g.target)
    if isinstance(g, Hadamard):
        return prop_matrix_hadamard(n, g.q)
    if isinstance(g, SPhase):
        return prop_matrix_sphase(n, g.q)
    m = prop_identity(n)
    for axis, a in _euler_steps(g):
        if is_quarter_turn(a):
            step = prop_matrix_sphase(n, g.q) if axis == "z" else prop_matrix_xquarter(n, g.q)
            m = compose_prop(step, m)
    return m


def circuit_prop_matrix(c: LogicalCircuit, from_index: int, to_index: int) -> PropMatrix:
    """Propagation from cut ``from_index`` to cut ``to_index`` (cut k sits before gate k)."""
    if not 0 <= from_index <= to_index <= len(c.gates):
        raise IndexError(f"invalid cut slice [{from_index}, {to_index}] for {len(c.gates)} gates")
    m = prop_identity(c.n_qubits)
    for g in c.gates[from_index:to_index]:
        m = compose_prop(gate_prop_matrix(c.n_qubits, g), m)
    return m


def suffix_prop_matrices(c: LogicalCircuit) -> list[PropMatrix]:
    """``out[k] = circuit_prop_matrix(c, k, len(c))`` for every cut k."""
    n = c.n_qubits
    out = [prop_identity(n)]
    for g in reversed(c.gates):
        out.append(compose_prop(out[-1], gate_prop_matrix(n, g)))
    return out[::-1]
