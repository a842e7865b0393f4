"""Independent oracles for the compiler and the runtime.

Nothing here reuses the outcome Paulis stored in a pattern.  Template checks
simulate a single gate template with post-selected outcomes and compare
against the byproduct formulas written out below.  Cones are recomputed by
walking Paulis through the refined gate sequence step by step and watching
which rotation angles flip.
"""

from __future__ import annotations

import dataclasses
import math
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .circuit_ir import (
    CNOT,
    DiagTwoQubit,
    Gate,
    Hadamard,
    LogicalCircuit,
    RotEuler,
    RotX,
    RotZ,
    SPhase,
    expand_macros,
)
from .compiler import CompiledProgram, ConeSets
from .f2_pauli import is_clifford_angle, is_quarter_turn
from .pattern_layout import MeasurementPattern, instantiate_cnot, template_for
from .quantum_backend import DEFAULT_DENSE_CAP, CapacityError, DenseState, MeasBasis, apply_network_unitary, gate_unitary

__all__ = [
    "DistributionReport",
    "TemplateCheck",
    "network_oracle",
    "oracle_distribution",
    "compare_distributions",
    "template_check",
    "fixed_pattern_check",
    "rotation_byproduct",
    "hadamard_byproduct",
    "sphase_byproduct",
    "cnot_byproduct",
    "cone_bruteforce",
    "theta_signs",
    "check_angles",
    "check_flow_identity",
    "random_circuit",
    "kappa_decomposition",
    "sform_chain_kappa",
    "verify_circuit",
    "VerifyReport",
]


# ------------------------------------------------------------ distributions


def oracle_distribution(circuit: LogicalCircuit, cap: int = DEFAULT_DENSE_CAP) -> dict[str, float]:
    """Exact Z-readout distribution of the network applied to ``|+>^n``."""
    n = circuit.n_qubits
    if n > cap:
        raise CapacityError(f"{n} qubits exceed dense capacity {cap}")
    psi = np.full((2,) * n, 2 ** (-n / 2), dtype=complex)
    out = apply_network_unitary(psi, circuit, cap).reshape(-1)
    p = np.abs(out) ** 2
    return {format(i, f"0{n}b"): float(p[i]) for i in range(2**n) if p[i] > 1e-15}


def network_oracle(circuit: LogicalCircuit, shots: int, seed: int = 0) -> dict[str, int]:
    dist = oracle_distribution(circuit)
    keys = sorted(dist)
    p = np.array([dist[k] for k in keys])
    counts = np.random.default_rng(seed).multinomial(shots, p / p.sum())
    return {k: int(c) for k, c in zip(keys, counts) if c}


@dataclass(frozen=True)
class DistributionReport:
    tvd: float
    shots: int
    first: Mapping[str, float]
    second: Mapping[str, float]


def _normalize(h: Mapping[str, float]) -> dict[str, float]:
    tot = float(sum(h.values()))
    if tot <= 0:
        raise ValueError("empty histogram")
    return {k: v / tot for k, v in h.items()}


def compare_distributions(first: Mapping[str, float], second: Mapping[str, float]) -> DistributionReport:
    """Total variation distance of two histograms (counts or probabilities)."""
    p, q = _normalize(first), _normalize(second)
    lens = {len(k) for k in p} | {len(k) for k in q}
    if len(lens) > 1:
        raise ValueError("histograms over different alphabets")
    tvd = 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in set(p) | set(q))
    shots = int(sum(first.values())) if all(float(v).is_integer() for v in first.values()) else 0
    return DistributionReport(tvd, shots, p, q)


# --------------------------------------------------------- byproduct formulas

# Each returns {wire_label: (x, z)} with the outcome and kappa' dictionaries
# keyed by template site label.


def rotation_byproduct(s: Mapping[int, int], kp: Mapping[int, int]) -> tuple[int, int]:
    x = s[2] + s[4] + kp.get(2, 0) + kp.get(4, 0)
    z = s[1] + s[3] + kp.get(1, 0) + kp.get(3, 0) + kp.get(5, 0)
    return x & 1, z & 1


def hadamard_byproduct(s: Mapping[int, int], kp: Mapping[int, int]) -> tuple[int, int]:
    k = lambda i: kp.get(i, 0)  # noqa: E731
    x = s[1] + s[3] + s[4] + k(1) + k(3) + k(4)
    z = s[2] + s[3] + k(2) + k(3) + k(5)
    return x & 1, z & 1


def sphase_byproduct(s: Mapping[int, int], kp: Mapping[int, int]) -> tuple[int, int]:
    k = lambda i: kp.get(i, 0)  # noqa: E731
    x = s[2] + s[4] + k(2) + k(4)
    z = s[1] + s[2] + s[3] + k(1) + k(2) + k(3) + k(5)
    return x & 1, z & 1


def cnot_byproduct(s: Mapping[int, int], kp: Mapping[int, int]) -> tuple[tuple[int, int], tuple[int, int]]:
    """``((x_c, z_c), (x_t, z_t))``."""
    v = lambda *ls: sum(s.get(i, 0) + kp.get(i, 0) for i in ls)  # noqa: E731
    xc = v(2, 3, 5, 6)
    xt = v(2, 3, 8, 10, 12, 14)
    zc = v(1, 3, 4, 5, 8, 9, 11) + kp.get(7, 0) + 1
    zt = v(9, 11, 13) + kp.get(15, 0)
    return (xc & 1, zc & 1), (xt & 1, zt & 1)


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)


def _pauli_1q(x: int, z: int) -> np.ndarray:
    return np.linalg.matrix_power(_X, x) @ np.linalg.matrix_power(_Z, z)


def _random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class TemplateCheck:
    ok: bool
    fidelity: float
    expected: tuple[tuple[int, int], ...] = field(default=())


def _rotation_angles(g: Gate) -> tuple[float, float, float]:
    if isinstance(g, RotEuler):
        return g.xi, g.eta, g.zeta
    if isinstance(g, RotX):
        return g.angle, 0.0, 0.0
    if isinstance(g, RotZ):
        return 0.0, g.angle, 0.0
    if isinstance(g, Hadamard):
        return math.pi / 2, math.pi / 2, math.pi / 2
    if isinstance(g, SPhase):
        return 0.0, math.pi / 2, 0.0
    raise TypeError(f"not a one-qubit gate: {g!r}")


def template_check(
    gate: Gate,
    forced: Mapping[int, int] | Sequence[int],
    kappa: Mapping[int, int] | None = None,
    psi_in: np.ndarray | None = None,
    seed: int = 0,
    tol: float = 1e-9,
) -> TemplateCheck:
    """Post-select one outcome vector on an isolated template and compare states.

    ``forced`` and ``kappa`` are keyed by template site label (a sequence is
    read as labels 1, 2, ...).  ``kappa`` holds the phase flips applied to the
    CZ-built template cluster, i.e. its eigenvalue exponents.

    Rotations (including H and S, as Euler rotations) are measured with the
    adaptive procedure; H and S are additionally checked against their own
    closed byproduct formulas.  The CNOT is measured in its fixed pattern.
    """
    if not isinstance(forced, Mapping):
        forced = {i + 1: int(b) for i, b in enumerate(forced)}
    kappa = dict(kappa or {})
    rng = np.random.default_rng(seed)
    if isinstance(gate, CNOT):
        tpl = instantiate_cnot(0, 1) if gate.control < gate.target else instantiate_cnot(1, 0)
        inputs, outputs = (1, 9), (7, 15)
    else:
        tpl = template_for(RotEuler(0, *_rotation_angles(gate)))
        inputs, outputs = (1,), (5,)
    psi = _random_state(rng, 2 ** len(inputs)) if psi_in is None else np.asarray(psi_in, dtype=complex)
    coords = {ts.label: (ts.dx, ts.row) for ts in tpl.sites}
    where = {c: label for label, c in coords.items()}
    st = DenseState.empty(1)
    st.add_sites(list(inputs), psi)
    st.add_sites([label for label in sorted(coords) if label not in inputs])
    for label, (x, y) in coords.items():
        for nb in ((x + 1, y), (x, y + 1)):
            if nb in where:
                st.cz(label, where[nb])
    for label, bit in kappa.items():
        if bit:
            st.z(label)
    s = {label: int(forced.get(label, 0)) for label in coords if label not in outputs}
    if isinstance(gate, CNOT):
        for ts in tpl.sites:
            if ts.label not in outputs:
                st.measure(ts.label, basis=ts.basis, forced=s[ts.label])
        (xc, zc), (xt, zt) = cnot_byproduct(s, kappa)
        u = gate_unitary(CNOT(0, 1))
        byp = np.kron(_pauli_1q(xc, zc), _pauli_1q(xt, zt))
        expected_ops: tuple[tuple[int, int], ...] = ((xc, zc), (xt, zt))
    else:
        xi, eta, zeta = _rotation_angles(gate)
        k1 = kappa.get(1, 0)
        st.measure(1, basis=MeasBasis.x(), forced=s[1])
        st.measure(2, basis=MeasBasis.equatorial(-xi * (-1) ** (s[1] + k1)), forced=s[2])
        st.measure(3, basis=MeasBasis.equatorial(-eta * (-1) ** (s[2] + kappa.get(2, 0))), forced=s[3])
        st.measure(4, basis=MeasBasis.equatorial(-zeta * (-1) ** (s[1] + s[3] + k1 + kappa.get(3, 0))), forced=s[4])
        x, z = rotation_byproduct(s, kappa)
        u = gate_unitary(gate) if isinstance(gate, (Hadamard, SPhase)) else gate_unitary(RotEuler(0, xi, eta, zeta))
        byp = _pauli_1q(x, z)
        expected_ops = ((x, z),)
    out = st.vector(list(outputs))
    want = byp @ u @ psi
    fid = float(abs(np.vdot(want, out)) ** 2 / (np.vdot(out, out).real * np.vdot(want, want).real))
    return TemplateCheck(fid >= 1 - tol, fid, expected_ops)


def fixed_pattern_check(
    gate: Hadamard | SPhase,
    forced: Mapping[int, int] | Sequence[int],
    kappa: Mapping[int, int] | None = None,
    psi_in: np.ndarray | None = None,
    seed: int = 0,
    tol: float = 1e-9,
) -> TemplateCheck:
    """H or S measured in its fixed X/Y pattern, compared with the closed formula.

    The Y sites are measured in B(-pi/2), the basis the Euler procedure uses
    when every earlier outcome is zero.
    """
    if not isinstance(forced, Mapping):
        forced = {i + 1: int(b) for i, b in enumerate(forced)}
    kappa = dict(kappa or {})
    rng = np.random.default_rng(seed)
    psi = _random_state(rng, 2) if psi_in is None else np.asarray(psi_in, dtype=complex)
    if isinstance(gate, Hadamard):
        bases = [0.0, -math.pi / 2, -math.pi / 2, -math.pi / 2]
        formula = hadamard_byproduct
    else:
        bases = [0.0, 0.0, -math.pi / 2, 0.0]
        formula = sphase_byproduct
    st = DenseState.empty(1)
    st.add_sites([1], psi)
    st.add_sites([2, 3, 4, 5])
    for a in range(1, 5):
        st.cz(a, a + 1)
    for label, bit in kappa.items():
        if bit:
            st.z(label)
    s = {i: int(forced.get(i, 0)) for i in range(1, 5)}
    for i, phi in enumerate(bases, start=1):
        st.measure(i, basis=MeasBasis.equatorial(phi), forced=s[i])
    x, z = formula(s, kappa)
    want = _pauli_1q(x, z) @ gate_unitary(gate) @ psi
    out = st.vector([5])
    fid = float(abs(np.vdot(want, out)) ** 2 / (np.vdot(out, out).real * np.vdot(want, want).real))
    return TemplateCheck(fid >= 1 - tol, fid, ((x, z),))


# ----------------------------------------------------------- cone oracle


@dataclass
class _Step:
    kind: str  # "clifford" or "rot"
    op: tuple  # ("h", q) | ("s", q) | ("xq", q) | ("cnot", c, t) | ("x"|"z", q)
    site: int | None = None  # adaptive site whose angle sits on this step


def _conj(op: tuple, p: dict[int, list[int]]) -> None:
    """Move the Pauli ``p`` (wire -> [x, z]) across a Clifford step."""
    kind = op[0]
    if kind == "h":
        v = p.setdefault(op[1], [0, 0])
        v[0], v[1] = v[1], v[0]
    elif kind == "s":
        v = p.setdefault(op[1], [0, 0])
        v[1] ^= v[0]
    elif kind == "xq":
        v = p.setdefault(op[1], [0, 0])
        v[0] ^= v[1]
    elif kind == "cnot":
        c = p.setdefault(op[1], [0, 0])
        t = p.setdefault(op[2], [0, 0])
        t[0] ^= c[0]
        c[1] ^= t[1]


def _flips(step: _Step, p: dict[int, list[int]]) -> bool:
    axis, q = step.op
    v = p.get(q, [0, 0])
    return bool(v[1]) if axis == "x" else bool(v[0])


_CNOT_BIRTH = {
    # site label -> ((x_c, z_c), (x_t, z_t)), transcribed from the CNOT byproduct
    label: (
        (int(label in (2, 3, 5, 6)), int(label in (1, 3, 4, 5, 8, 9, 11))),
        (int(label in (2, 3, 8, 10, 12, 14)), int(label in (9, 11, 13))),
    )
    for label in range(1, 15)
    if label != 7
}


def cone_bruteforce(circuit: LogicalCircuit, pattern: MeasurementPattern) -> ConeSets:
    """Cones by explicit propagation through the refined step sequence."""
    steps: list[_Step] = []
    births: dict[int, tuple[int, dict[int, list[int]]]] = {}  # site -> (position, Pauli)
    gate_births: dict[int, tuple[int, dict[int, list[int]]]] = {}
    for rec in pattern.gate_records:
        if rec.kind == "pad":
            (q,) = rec.wires
            births[rec.ci[0]] = (len(steps), {q: [0, 1]})
            births[rec.cm[0]] = (len(steps), {q: [1, 0]})
            continue
        g = circuit.gates[rec.circuit_index]
        if isinstance(g, CNOT):
            steps.append(_Step("clifford", ("cnot", g.control, g.target)))
            labels = [1, 9] + [2, 3, 4, 5, 6, 8, 10, 11, 12, 13, 14]
            for sid, label in zip(list(rec.ci) + list(rec.cm), labels):
                (xc, zc), (xt, zt) = _CNOT_BIRTH[label]
                births[sid] = (len(steps), {g.control: [xc, zc], g.target: [xt, zt]})
            gate_births[rec.gate_id] = (len(steps), {g.control: [0, 1]})
            continue
        q = rec.wires[0]
        angles = _rotation_angles(g)
        site1 = rec.ci[0]
        s2, s3, s4 = rec.cm
        births[site1] = (len(steps), {q: [0, 1]})
        for axis, a, sid, birth in (("x", angles[0], s2, [1, 0]), ("z", angles[1], s3, [0, 1]), ("x", angles[2], s4, [1, 0])):
            if is_quarter_turn(a):
                steps.append(_Step("clifford", ("xq" if axis == "x" else "s", q)))
            elif not is_clifford_angle(a):
                steps.append(_Step("rot", (axis, q), sid))
            births[sid] = (len(steps), {q: list(birth)})
        gate_births[rec.gate_id] = (len(steps), {})
    for sid in pattern.outputs:
        births[sid] = (len(steps), {pattern.site(sid).wire: [1, 0]})

    def walk(pos: int, pauli: dict[int, list[int]]) -> tuple[set[int], set[int]]:
        fwd: set[int] = set()
        p = {w: list(v) for w, v in pauli.items()}
        for st in steps[pos:]:
            if st.kind == "rot":
                if _flips(st, p):
                    fwd.add(st.site)
            else:
                _conj(st.op, p)
        bwd: set[int] = set()
        p = {w: list(v) for w, v in pauli.items()}
        for st in reversed(steps[:pos]):
            if st.kind == "rot":
                if _flips(st, p):
                    bwd.add(st.site)
            else:
                _conj(st.op, p)
        return fwd, bwd

    fc: dict[int, frozenset[int]] = {}
    bc: dict[int, frozenset[int]] = {}
    for sid, (pos, pauli) in births.items():
        f, b = walk(pos, pauli)
        fc[sid], bc[sid] = frozenset(f), frozenset(b)
    for s in pattern.sites:
        if s.role == "redundant":
            f: set[int] = set()
            b: set[int] = set()
            for j in pattern.neighbors(s.id):
                if pattern.site(j).role not in ("redundant", "output"):
                    f ^= fc[j]
                    b ^= bc[j]
            fc[s.id], bc[s.id] = frozenset(f), frozenset(b)
    gfc, gbc = {}, {}
    for gid, (pos, pauli) in gate_births.items():
        f, b = walk(pos, pauli)
        gfc[gid], gbc[gid] = frozenset(f), frozenset(b)
    return ConeSets(dict(sorted(fc.items())), dict(sorted(bc.items())), gfc, gbc)


# ---------------------------------------------------- runtime proof checks


def theta_signs(program: CompiledProgram, outcomes: Sequence[int] | np.ndarray, cones: ConeSets | None = None) -> dict[int, int]:
    """Sign exponent of each adaptive site from forward cones, outcomes and kappa."""
    cones = program.cones if cones is None else cones
    pat = program.pattern
    theta = {j: 0 for j in pat.adaptive_sites()}
    for k, cone in cones.fc.items():
        bit = int(outcomes[k])
        if pat.site(k).basis.kind != "Z":
            bit ^= pat.site(k).kappa
        if bit:
            for j in cone:
                theta[j] ^= 1
    for cone in cones.gate_fc.values():
        for j in cone:
            theta[j] ^= 1
    return theta


def check_angles(program: CompiledProgram, outcomes: Sequence[int], measured: Mapping[int, float], cones: ConeSets | None = None) -> bool:
    """Every executed angle equals the network angle times (-1)^theta."""
    theta = theta_signs(program, outcomes, cones)
    for j, t in theta.items():
        want = (-1) ** t * program.pattern.site(j).basis.angle
        if measured[j] != want:
            return False
    return True


def check_flow_identity(program: CompiledProgram, outcomes: Sequence[int], final: tuple[int, int]) -> bool:
    """``I(t_max) = I_init + sum_k s_k F_k`` with ``final = (x, z)`` packed."""
    acc = program.i_init
    for k, v in program.images.site.items():
        if outcomes[k]:
            acc = acc + v
    return (acc.x, acc.z) == tuple(final)


# ------------------------------------------------------------- generators


def _generic_angle(rng: random.Random) -> float:
    while True:
        a = rng.uniform(-math.pi, math.pi)
        m = round(a / (math.pi / 2))
        if abs(a - m * math.pi / 2) > 1e-6:
            return a


def random_circuit(
    rng: random.Random,
    n: int,
    n_gates: int,
    kinds: Sequence[str] = ("cnot", "h", "s", "rz", "rx", "rot"),
    neighbor_only: bool = False,
) -> LogicalCircuit:
    """Uniform gate kinds; angles uniform in (-pi, pi) away from Clifford angles."""
    gates: list[Gate] = []
    kinds = [k for k in kinds if n > 1 or k not in ("cnot", "diag")]
    for _ in range(n_gates):
        kind = rng.choice(kinds)
        q = rng.randrange(n)
        if kind in ("cnot", "diag"):
            if neighbor_only:
                a = rng.randrange(n - 1)
                c, t = (a, a + 1) if rng.random() < 0.5 else (a + 1, a)
            else:
                c, t = rng.sample(range(n), 2)
            if kind == "cnot":
                gates.append(CNOT(c, t))
            else:
                gates.append(DiagTwoQubit(c, t, _generic_angle(rng), _generic_angle(rng), _generic_angle(rng)))
        elif kind == "h":
            gates.append(Hadamard(q))
        elif kind == "s":
            gates.append(SPhase(q))
        elif kind == "rz":
            gates.append(RotZ(q, _generic_angle(rng)))
        elif kind == "rx":
            gates.append(RotX(q, _generic_angle(rng)))
        else:
            gates.append(RotEuler(q, _generic_angle(rng), _generic_angle(rng), _generic_angle(rng)))
    return LogicalCircuit(n, tuple(gates))


# ------------------------------------------------------ kappa bookkeeping


def _sform_pair(st: DenseState, a: int, b: int) -> None:
    # exp(-i pi |0><0|_a (x) |1><1|_b): -1 on a=0, b=1
    st.amplitudes[st._slice({a: 0, b: 1})] *= -1


def _cluster_eigenvalue(st: DenseState, ops: Mapping[int, str]) -> int:
    from .quantum_backend import dense_expectation

    e = dense_expectation(st, ops)
    if abs(abs(e) - 1) > 1e-9:
        raise ValueError("not an eigenstate")
    return 0 if e > 0 else 1


def sform_chain_kappa(length: int, flips: Mapping[int, int] | None = None) -> dict[int, int]:
    """Eigenvalue exponents of a chain built from ``|+>`` by the Ising pair interaction.

    ``flips`` are optional phase flips on the product state before entangling.
    """
    flips = flips or {}
    st = DenseState.empty(1)
    st.add_sites(list(range(length)))
    for a, bit in flips.items():
        if bit:
            st.z(a)
    for a in range(length - 1):
        _sform_pair(st, a, a + 1)
    out = {}
    for a in range(length):
        ops = {a: "X"}
        for b in (a - 1, a + 1):
            if 0 <= b < length:
                ops[b] = "Z"
        out[a] = _cluster_eigenvalue(st, ops)
    return out


def kappa_decomposition(flips: Sequence[int]) -> tuple[int, int, int]:
    """``(kappa'_k, kappa'_{k,I}, kappa'_{k,O})`` for the middle site of a 3-chain.

    Sites 0, 1, 2 start in ``|+>`` with phase flips ``flips``; the chain is
    entangled by the Ising pair interaction.  The output-side sub-cluster is
    ``{0, 1}`` with only the (0, 1) interaction, the input-side sub-cluster is
    ``{1, 2}`` with only the (1, 2) interaction.  A phase flip on the shared
    site is counted once, on the input side.
    """
    f = [int(b) & 1 for b in flips]
    full = DenseState.empty(1)
    full.add_sites([0, 1, 2])
    for a in range(3):
        if f[a]:
            full.z(a)
    _sform_pair(full, 0, 1)
    _sform_pair(full, 1, 2)
    k_full = _cluster_eigenvalue(full, {0: "Z", 1: "X", 2: "Z"})

    out_side = DenseState.empty(1)
    out_side.add_sites([0, 1])
    if f[0]:
        out_side.z(0)
    _sform_pair(out_side, 0, 1)
    k_out = _cluster_eigenvalue(out_side, {0: "Z", 1: "X"})

    in_side = DenseState.empty(1)
    in_side.add_sites([1, 2])
    for a in (1, 2):
        if f[a]:
            in_side.z(a)
    _sform_pair(in_side, 1, 2)
    k_in = _cluster_eigenvalue(in_side, {1: "X", 2: "Z"})
    return k_full, k_in, k_out


# ----------------------------------------------------------- whole check


@dataclass(frozen=True)
class VerifyReport:
    distribution: DistributionReport
    threshold: float
    angles_ok: bool
    flow_ok: bool
    depth: int
    backend: str

    @property
    def ok(self) -> bool:
        return self.distribution.tvd <= self.threshold and self.angles_ok and self.flow_ok

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "tvd": self.distribution.tvd,
            "threshold": self.threshold,
            "shots": self.distribution.shots,
            "angles_ok": self.angles_ok,
            "flow_identity_ok": self.flow_ok,
            "depth": self.depth,
            "backend": self.backend,
            "mbqc_histogram": dict(self.distribution.first),
            "oracle_distribution": dict(self.distribution.second),
        }


def verify_circuit(
    circuit: LogicalCircuit,
    shots: int,
    seed: int = 0,
    threshold: float = 0.03,
    backend: str = "auto",
    program: CompiledProgram | None = None,
    angle_checks: int = 200,
    corrupt: int | None = None,
) -> VerifyReport:
    """Run the one-way computation and compare with the network oracle.

    Also checks, on the first ``angle_checks`` shots, the executed angles
    against forward-cone signs and the final flow vector against its closed
    sum.  ``corrupt`` names an adaptive site whose prescribed angle is
    shifted by pi/2 before running, as a negative control.
    """
    from .compiler import compile_circuit
    from .runtime import full_run

    program = compile_circuit(circuit) if program is None else program
    if corrupt is not None:
        if corrupt not in program.algorithm_angles:
            raise ValueError(f"site {corrupt} is not adaptive")
        angles = dict(program.algorithm_angles)
        angles[corrupt] += math.pi / 2
        program = dataclasses.replace(program, algorithm_angles=angles)
    res = full_run(program, shots, seed, backend)
    oracle = oracle_distribution(circuit)
    rep = compare_distributions(res.histogram(), oracle)
    rep = dataclasses.replace(rep, shots=shots)
    angles_ok = flow_ok = True
    for i in range(min(shots, angle_checks)):
        rec = res[i]
        angles_ok &= check_angles(program, rec.outcomes, rec.measured_angles)
        last = rec.i_trace[-1].value
        flow_ok &= check_flow_identity(program, rec.outcomes, (last.x, last.z))
    return VerifyReport(rep, threshold, angles_ok, flow_ok, program.depth, res.backend)
