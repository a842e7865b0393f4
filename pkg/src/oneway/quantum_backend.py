"""Quantum engines for cluster states and one-qubit measurements.

Two engines share one measurement contract:

* :class:`DenseState` is a statevector over the currently live sites with a
  leading batch axis, so many independent shots advance together.  Arbitrary
  equatorial bases are supported.
* :class:`StabilizerTableau` is an Aaronson-Gottesman tableau with
  destabilizers.  Sites can be added and, once measured, removed, which keeps
  the tableau as small as the live frontier of a pattern.

Outcome labels follow the equatorial basis convention: ``s = 0`` selects
``(|0> + e^{i phi}|1>)/sqrt(2)``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .circuit_ir import CNOT, DiagTwoQubit, Hadamard, LogicalCircuit, RotEuler, RotX, RotZ, SPhase, Gate
from .f2_pauli import CLIFFORD_TOL

if TYPE_CHECKING:
    from .pattern_layout import MeasurementPattern

__all__ = [
    "MeasBasis",
    "CapacityError",
    "ZeroProbabilityError",
    "DenseState",
    "StabilizerTableau",
    "DEFAULT_DENSE_CAP",
    "prepare_cluster",
    "measure",
    "verify_stabilizers",
    "StabilizerReport",
    "apply_network_unitary",
    "gate_unitary",
    "ux",
    "uz",
    "euler_unitary",
]

DEFAULT_DENSE_CAP = 24
_ZERO_PROB = 1e-12


class CapacityError(RuntimeError):
    """The requested state does not fit the selected engine."""


class ZeroProbabilityError(RuntimeError):
    """Post-selection on an outcome of probability zero."""


@dataclass(frozen=True)
class MeasBasis:
    """Either the Z basis or the equatorial basis B(angle)."""

    kind: str  # "Z" or "EQ"
    angle: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("Z", "EQ"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if not math.isfinite(self.angle):
            raise ValueError("non-finite basis angle")

    @classmethod
    def z(cls) -> MeasBasis:
        return cls("Z")

    @classmethod
    def x(cls) -> MeasBasis:
        return cls("EQ", 0.0)

    @classmethod
    def y(cls) -> MeasBasis:
        return cls("EQ", math.pi / 2)

    @classmethod
    def equatorial(cls, angle: float) -> MeasBasis:
        return cls("EQ", float(angle))

    def pauli(self) -> tuple[str, int] | None:
        """``(axis, flip)`` if this is a Pauli basis, else None.

        ``flip = 1`` means ``s = 0`` selects the -1 eigenstate of ``axis``.
        """
        if self.kind == "Z":
            return ("Z", 0)
        m = round(self.angle / (math.pi / 2))
        if abs(self.angle - m * math.pi / 2) >= CLIFFORD_TOL:
            return None
        return (("X", "Y")[m % 2], (m % 4) // 2)

    @property
    def label(self) -> str:
        p = self.pauli()
        if p is None:
            return "EQ"
        return p[0]


# ---------------------------------------------------------------- unitaries

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def ux(a: float) -> np.ndarray:
    return math.cos(a / 2) * _I2 - 1j * math.sin(a / 2) * _X


def uz(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def euler_unitary(xi: float, eta: float, zeta: float) -> np.ndarray:
    return ux(zeta) @ uz(eta) @ ux(xi)


def gate_unitary(g: Gate) -> np.ndarray:
    """Matrix of a gate; two-qubit matrices are indexed by ``2*b_first + b_second``."""
    if isinstance(g, Hadamard):
        return _H
    if isinstance(g, SPhase):
        return uz(math.pi / 2)
    if isinstance(g, RotZ):
        return uz(g.angle)
    if isinstance(g, RotX):
        return ux(g.angle)
    if isinstance(g, RotEuler):
        return euler_unitary(g.xi, g.eta, g.zeta)
    if isinstance(g, CNOT):
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    if isinstance(g, DiagTwoQubit):
        return np.diag([np.exp(1j * g.phi1), np.exp(1j * g.phi2), np.exp(1j * g.phi3), 1.0])
    raise TypeError(f"unknown gate {g!r}")


def _apply_matrix(psi: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    t = np.tensordot(u.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(t, list(range(k)), list(axes))


def apply_network_unitary(state: np.ndarray, circuit: LogicalCircuit, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Apply every gate of ``circuit`` to an ``n``-qubit vector (qubit 0 is the high bit)."""
    n = circuit.n_qubits
    if n > cap:
        raise CapacityError(f"{n} qubits exceed dense capacity {cap}")
    psi = np.asarray(state, dtype=complex).reshape((2,) * n)
    for g in circuit.gates:
        qs = (g.control, g.target) if isinstance(g, CNOT) else (g.q1, g.q2) if isinstance(g, DiagTwoQubit) else (g.q,)
        psi = _apply_matrix(psi, gate_unitary(g), qs)
    return psi.reshape(-1)


# ------------------------------------------------------------- dense engine


@dataclass
class DenseState:
    """Batched statevector over the live sites.

    ``amplitudes`` has shape ``(batch, 2, ..., 2)``; axis ``1 + i`` belongs to
    ``order[i]``.
    """

    amplitudes: np.ndarray
    order: list[int] = field(default_factory=list)
    cap: int = DEFAULT_DENSE_CAP

    @classmethod
    def empty(cls, batch: int = 1, cap: int = DEFAULT_DENSE_CAP) -> DenseState:
        return cls(np.ones((batch,), dtype=complex), [], cap)

    @property
    def batch(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def site_index(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.order)}

    def __contains__(self, site: int) -> bool:
        return site in self.order

    def _axis(self, site: int) -> int:
        try:
            return 1 + self.order.index(site)
        except ValueError:
            raise KeyError(f"site {site} is not live") from None

    def add_sites(self, sites: Sequence[int], vector: np.ndarray | None = None) -> None:
        """Append sites in the product state ``vector`` (default ``|+>`` on each)."""
        sites = list(sites)
        if any(s in self.order for s in sites):
            raise ValueError("site already live")
        if len(self.order) + len(sites) > self.cap:
            raise CapacityError(f"{len(self.order) + len(sites)} live sites exceed dense capacity {self.cap}")
        k = len(sites)
        if vector is None:
            vector = np.full(2**k, 2 ** (-k / 2), dtype=complex)
        vec = np.asarray(vector, dtype=complex).reshape((2,) * k)
        self.amplitudes = self.amplitudes.reshape(self.amplitudes.shape + (1,) * k) * vec
        self.order += sites

    def _slice(self, fixed: Mapping[int, int]) -> tuple:
        idx: list = [slice(None)] * self.amplitudes.ndim
        for site, bit in fixed.items():
            idx[self._axis(site)] = bit
        return tuple(idx)

    def cz(self, a: int, b: int) -> None:
        self.amplitudes[self._slice({a: 1, b: 1})] *= -1

    def z(self, a: int) -> None:
        self.amplitudes[self._slice({a: 1})] *= -1

    def apply_1q(self, a: int, u: np.ndarray) -> None:
        ax = self._axis(a)
        self.amplitudes = np.moveaxis(np.tensordot(u, self.amplitudes, axes=(1, ax)), 0, ax)

    def vector(self, sites: Sequence[int] | None = None, shot: int = 0) -> np.ndarray:
        """Amplitudes of one shot with axes in the order ``sites``."""
        sites = list(self.order if sites is None else sites)
        if sorted(sites) != sorted(self.order):
            raise ValueError("sites must list every live site")
        perm = [self.order.index(s) for s in sites]
        return np.transpose(self.amplitudes[shot], perm).reshape(-1)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.amplitudes.reshape(self.batch, -1)) ** 2, axis=1))

    def measure(
        self,
        site: int,
        basis: MeasBasis | None = None,
        angles: np.ndarray | float | None = None,
        uniforms: np.ndarray | None = None,
        forced: np.ndarray | int | None = None,
    ) -> np.ndarray:
        """Measure ``site`` in every shot and drop it; returns the outcome bits.

        The basis is either ``basis`` (shared by all shots) or equatorial with
        per-shot ``angles``.  Outcomes come from ``forced`` if given, else from
        ``uniforms`` (one draw per shot, outcome 1 iff the draw is at least
        P(0)).
        """
        ax = self._axis(site)
        psi = np.moveaxis(self.amplitudes, ax, 1)
        rest = psi.shape[2:]
        psi = psi.reshape(self.batch, 2, -1)
        a0, a1 = psi[:, 0], psi[:, 1]
        if basis is not None and basis.kind == "Z":
            b0, b1 = a0, a1
        else:
            phi = basis.angle if basis is not None else angles
            ph = np.exp(-1j * np.broadcast_to(np.asarray(phi, dtype=float), (self.batch,)))[:, None]
            b0 = (a0 + ph * a1) / math.sqrt(2)
            b1 = (a0 - ph * a1) / math.sqrt(2)
        p0 = np.sum(np.abs(b0) ** 2, axis=1)
        p1 = np.sum(np.abs(b1) ** 2, axis=1)
        if forced is not None:
            s = np.broadcast_to(np.asarray(forced, dtype=np.uint8), (self.batch,)).copy()
        elif uniforms is not None:
            s = (np.asarray(uniforms) >= p0 / (p0 + p1)).astype(np.uint8)
        else:
            raise ValueError("need forced outcomes or uniform draws")
        p = np.where(s == 0, p0, p1)
        if np.any(p < _ZERO_PROB):
            raise ZeroProbabilityError(f"outcome on site {site} has probability {p.min():.3g}")
        new = np.where(s[:, None] == 0, b0, b1) / np.sqrt(p)[:, None]
        self.amplitudes = new.reshape((self.batch,) + rest)
        self.order.remove(site)
        return s


# --------------------------------------------------------- stabilizer engine


def _g(x1: np.ndarray, z1: np.ndarray, x2: np.ndarray, z2: np.ndarray) -> np.ndarray:
    # exponent of i picked up when multiplying single-qubit Paulis (CHP)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    return np.where(
        x1 & z1,
        z2 - x2,
        np.where(x1 & ~z1, z2 * (2 * x2 - 1), np.where(~x1 & z1, x2 * (1 - 2 * z2), 0)),
    )


class StabilizerTableau:
    """Stabilizer state over a dynamic set of sites.

    Rows ``0..m-1`` are destabilizers and rows ``m..2m-1`` stabilizers; row
    ``i`` is ``(-1)^r[i] prod X^x Z^z`` with ``(1, 1)`` meaning Y.
    """

    def __init__(self) -> None:
        self.order: list[int] = []
        self.x = np.zeros((0, 0), dtype=bool)
        self.z = np.zeros((0, 0), dtype=bool)
        self.r = np.zeros(0, dtype=bool)
        self.last_flip: dict[int, tuple[bool, bool]] | None = None

    @property
    def m(self) -> int:
        return len(self.order)

    def __contains__(self, site: int) -> bool:
        return site in self.order

    def _col(self, site: int) -> int:
        try:
            return self.order.index(site)
        except ValueError:
            raise KeyError(f"site {site} is not live") from None

    def add_site(self, site: int) -> None:
        """Append ``site`` in ``|+>``."""
        if site in self.order:
            raise ValueError("site already live")
        m = self.m
        x = np.zeros((2 * m + 2, m + 1), dtype=bool)
        z = np.zeros_like(x)
        r = np.zeros(2 * m + 2, dtype=bool)
        # old destabilizers -> rows 0..m-1, new destabilizer Z at row m
        x[:m, :m], z[:m, :m], r[:m] = self.x[:m], self.z[:m], self.r[:m]
        z[m, m] = True
        x[m + 1 : 2 * m + 1, :m], z[m + 1 : 2 * m + 1, :m] = self.x[m:], self.z[m:]
        r[m + 1 : 2 * m + 1] = self.r[m:]
        x[2 * m + 1, m] = True
        self.x, self.z, self.r = x, z, r
        self.order.append(site)

    # Clifford gates (CHP conjugation rules)
    def h(self, site: int) -> None:
        a = self._col(site)
        self.r ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def s(self, site: int) -> None:
        a = self._col(site)
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def sdg(self, site: int) -> None:
        for _ in range(3):
            self.s(site)

    def cnot(self, c: int, t: int) -> None:
        a, b = self._col(c), self._col(t)
        self.r ^= self.x[:, a] & self.z[:, b] & ~(self.x[:, b] ^ self.z[:, a])
        self.x[:, b] ^= self.x[:, a]
        self.z[:, a] ^= self.z[:, b]

    def cz(self, a: int, b: int) -> None:
        self.h(b)
        self.cnot(a, b)
        self.h(b)

    def zflip(self, site: int) -> None:
        self.r ^= self.x[:, self._col(site)]

    def _rowmul(self, targets: np.ndarray, src: int) -> None:
        """Row ``t`` <- row ``src`` * row ``t`` for every target row."""
        if len(targets) == 0:
            return
        x1, z1 = self.x[src], self.z[src]
        x2, z2 = self.x[targets], self.z[targets]
        tot = 2 * self.r[targets].astype(np.int64) + 2 * int(self.r[src]) + _g(x1, z1, x2, z2).sum(axis=1)
        self.r[targets] = (tot % 4) >= 2
        self.x[targets] ^= x1
        self.z[targets] ^= z1

    def _to_z(self, site: int, basis: MeasBasis) -> int:
        p = basis.pauli()
        if p is None:
            raise ValueError("stabilizer engine measures Pauli bases only")
        axis, flip = p
        if axis == "X":
            self.h(site)
        elif axis == "Y":
            self.sdg(site)
            self.h(site)
        return flip

    def measure(
        self,
        site: int,
        basis: MeasBasis,
        rng: np.random.Generator | None = None,
        forced: int | None = None,
    ) -> tuple[int, bool]:
        """Measure ``site`` and remove it; returns ``(outcome, was_random)``.

        With neither ``rng`` nor ``forced`` a random outcome is taken to be 0,
        which yields a valid reference sample.
        """
        flip = self._to_z(site, basis)
        a = self._col(site)
        m = self.m
        stab_hits = np.nonzero(self.x[m:, a])[0]
        if len(stab_hits):
            p = m + stab_hits[0]
            # this stabilizer maps the s=0 branch onto the s=1 branch
            self.last_flip = {
                self.order[c]: (bool(self.x[p, c]), bool(self.z[p, c]))
                for c in range(m)
                if c != a and (self.x[p, c] or self.z[p, c])
            }
            others = np.array([i for i in np.nonzero(self.x[:, a])[0] if i != p], dtype=np.int64)
            self._rowmul(others, p)
            self.x[p - m], self.z[p - m], self.r[p - m] = self.x[p], self.z[p], self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            if forced is not None:
                raw = int(forced) ^ flip
            elif rng is not None:
                raw = int(rng.integers(2))
            else:
                raw = 0
            self.r[p] = bool(raw)
            dpiv = p - m
            random = True
        else:
            hits = np.nonzero(self.x[:m, a])[0]
            dpiv = int(hits[0])
            rest = hits[1:]
            for i in rest:
                self._rowmul(np.array([m + dpiv]), m + i)
            self._rowmul(rest.astype(np.int64), dpiv)
            raw = int(self.r[m + dpiv])
            random = False
            self.last_flip = None
            if forced is not None and (raw ^ flip) != int(forced):
                raise ZeroProbabilityError(f"forced outcome on site {site} has probability 0")
        self._remove(a, dpiv)
        return raw ^ flip, random

    def _remove(self, a: int, dpiv: int) -> None:
        # stabilizer row m+dpiv is now +-Z_a; clear column a everywhere else
        m = self.m
        sp = m + dpiv
        zs = np.array([i for i in np.nonzero(self.z[:, a])[0] if i not in (sp, dpiv)], dtype=np.int64)
        self._rowmul(zs, sp)
        keep = [i for i in range(2 * m) if i not in (dpiv, sp)]
        cols = [c for c in range(m) if c != a]
        self.x = self.x[np.ix_(keep, cols)]
        self.z = self.z[np.ix_(keep, cols)]
        self.r = self.r[keep]
        del self.order[a]

    def pauli_eigenvalue(self, paulis: Mapping[int, str]) -> int:
        """+1/-1 if the signed Pauli is in the stabilizer group, 0 otherwise."""
        m = self.m
        px = np.zeros(m, dtype=bool)
        pz = np.zeros(m, dtype=bool)
        for site, ch in paulis.items():
            c = self._col(site)
            px[c] = ch in "XY"
            pz[c] = ch in "ZY"
        # anticommutes with a stabilizer -> random
        anti = (self.x[m:] & pz) ^ (self.z[m:] & px)
        if np.any(anti.sum(axis=1) % 2):
            return 0
        sel = np.nonzero(((self.x[:m] & pz) ^ (self.z[:m] & px)).sum(axis=1) % 2)[0]
        acc_x = np.zeros(m, dtype=bool)
        acc_z = np.zeros(m, dtype=bool)
        acc_r = 0
        for i in sel:
            row = m + i
            tot = 2 * acc_r + 2 * int(self.r[row]) + int(_g(self.x[row], self.z[row], acc_x, acc_z).sum())
            acc_r = int((tot % 4) >= 2)
            acc_x ^= self.x[row]
            acc_z ^= self.z[row]
        if not (np.array_equal(acc_x, px) and np.array_equal(acc_z, pz)):
            return 0
        return -1 if acc_r else 1


# -------------------------------------------------------------- cluster API


def _grid_edges(coords: Mapping[int, tuple[int, int]]) -> list[tuple[int, int]]:
    where = {c: s for s, c in coords.items()}
    edges = []
    for s, (x, y) in coords.items():
        for nb in ((x + 1, y), (x, y + 1)):
            if nb in where:
                edges.append((s, where[nb]))
    return edges


def prepare_cluster(
    pattern: MeasurementPattern,
    engine: str = "dense",
    kappa: Mapping[int, int] | None = None,
    cap: int = DEFAULT_DENSE_CAP,
) -> DenseState | StabilizerTableau:
    """Full cluster over every pattern site: ``|+>``, CZ on grid edges, Z where kappa is 1."""
    coords = {s.id: (s.x, s.y) for s in pattern.sites}
    kap = {s.id: s.kappa for s in pattern.sites} if kappa is None else dict(kappa)
    return cluster_from_coords(coords, kap, engine, cap)


def cluster_from_coords(
    coords: Mapping[int, tuple[int, int]],
    kappa: Mapping[int, int],
    engine: str = "dense",
    cap: int = DEFAULT_DENSE_CAP,
) -> DenseState | StabilizerTableau:
    sites = sorted(coords)
    edges = _grid_edges(coords)
    if engine == "dense":
        st = DenseState.empty(1, cap)
        st.add_sites(sites)
        for a, b in edges:
            st.cz(a, b)
        for s in sites:
            if kappa.get(s, 0):
                st.z(s)
        return st
    if engine == "tableau":
        tab = StabilizerTableau()
        for s in sites:
            tab.add_site(s)
        for a, b in edges:
            tab.cz(a, b)
        for s in sites:
            if kappa.get(s, 0):
                tab.zflip(s)
        return tab
    raise ValueError(f"unknown engine {engine!r}")


def measure(
    state: DenseState | StabilizerTableau,
    site: int,
    basis: MeasBasis,
    rng: np.random.Generator | None = None,
    forced: int | None = None,
) -> tuple[int, DenseState | StabilizerTableau]:
    """Single-shot measurement; the site leaves the live set."""
    if isinstance(state, StabilizerTableau):
        bit, _ = state.measure(site, basis, rng=rng, forced=forced)
        return bit, state
    if state.batch != 1:
        raise ValueError("single-shot measure needs a batch of one")
    if forced is None:
        if rng is None:
            raise ValueError("need rng or forced outcome")
        u = np.array([rng.random()])
        bit = state.measure(site, basis, uniforms=u)
    else:
        bit = state.measure(site, basis, forced=forced)
    return int(bit[0]), state


@dataclass(frozen=True)
class StabilizerReport:
    eigenvalues: dict[int, float]
    expected: dict[int, int]

    @property
    def ok(self) -> bool:
        return all(abs(self.eigenvalues[a] - self.expected[a]) < 1e-9 for a in self.expected)


def _cluster_stabilizer(coords: Mapping[int, tuple[int, int]], a: int) -> dict[int, str]:
    where = {c: s for s, c in coords.items()}
    x, y = coords[a]
    ops = {a: "X"}
    for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
        if nb in where:
            ops[where[nb]] = "Z"
    return ops


def verify_stabilizers(
    state: DenseState | StabilizerTableau,
    coords: Mapping[int, tuple[int, int]],
    kappa: Mapping[int, int] | None = None,
) -> StabilizerReport:
    """Eigenvalue of ``X_a prod_{b ~ a} Z_b`` for every live site ``a``."""
    live = [s for s in coords if s in state]
    live_coords = {s: coords[s] for s in live}
    kappa = kappa or {}
    eig: dict[int, float] = {}
    for a in live:
        ops = _cluster_stabilizer(live_coords, a)
        if isinstance(state, StabilizerTableau):
            eig[a] = float(state.pauli_eigenvalue(ops))
        else:
            eig[a] = dense_expectation(state, ops)
    return StabilizerReport(eig, {a: (-1) ** int(kappa.get(a, 0)) for a in live})


def dense_expectation(state: DenseState, ops: Mapping[int, str], shot: int = 0) -> float:
    mats = {"X": _X, "Y": np.array([[0, -1j], [1j, 0]]), "Z": _Z}
    psi = state.amplitudes[shot]
    phi = psi
    for site, ch in ops.items():
        ax = state.order.index(site)
        phi = np.moveaxis(np.tensordot(mats[ch], phi, axes=(1, ax)), 0, ax)
    return float(np.vdot(psi, phi).real)
