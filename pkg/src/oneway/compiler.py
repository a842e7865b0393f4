"""Classical preprocessing: byproduct images, cones, schedule and angles.

Every measured site ``k`` owns a Pauli ``U_k`` that its outcome contributes to
the byproduct at its gate's output cut.  Propagating ``U_k`` through the rest
of the circuit gives the site's byproduct image ``F_k`` at the output cut.
Two sites are cone-related exactly when their images anticommute; which of
the two is the forward cone follows from their order along the refined cut
sequence.  The measurement schedule is the layering of the forward-cone
relation among adaptive sites.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

from . import _jsonio
from .circuit_ir import LogicalCircuit, expand_macros, format_circuit, network_depth, parse_circuit
from .f2_pauli import PauliVector, bits_to_hex, hex_to_bits, suffix_prop_matrices, apply_prop, symplectic_product
from .pattern_layout import KappaSpec, MeasurementPattern, pattern_from_json, pattern_to_json, stitch

__all__ = [
    "ByproductImageTable",
    "ConeSets",
    "Schedule",
    "CompiledProgram",
    "ScheduleError",
    "compute_byproduct_images",
    "compute_cones",
    "compute_schedule",
    "compute_algorithm_angles",
    "compute_i_init",
    "compile_pattern",
    "compile_circuit",
    "depth_report",
    "time_model",
    "cluster_size_bound",
    "correction_term",
    "program_to_json",
    "program_from_json",
]

_GATE_MICRO = 1 << 20  # gate constants sit after every site of their gate


class ScheduleError(RuntimeError):
    """The forward-cone relation has a cycle (a compiler bug)."""


@dataclass(frozen=True)
class ByproductImageTable:
    site: Mapping[int, PauliVector]
    gate: Mapping[int, PauliVector]


@dataclass(frozen=True)
class ConeSets:
    fc: Mapping[int, frozenset[int]]
    bc: Mapping[int, frozenset[int]]
    gate_fc: Mapping[int, frozenset[int]]
    gate_bc: Mapping[int, frozenset[int]]


@dataclass(frozen=True)
class Schedule:
    rounds: tuple[tuple[int, ...], ...]

    @property
    def depth(self) -> int:
        return sum(1 for r in self.rounds if r)

    @property
    def t_max(self) -> int:
        return len(self.rounds) - 1

    def round_of(self) -> dict[int, int]:
        return {k: t for t, r in enumerate(self.rounds) for k in r}


@dataclass(frozen=True)
class CompiledProgram:
    pattern: MeasurementPattern
    circuit: LogicalCircuit  # primitive, nearest-neighbor circuit that was laid out
    images: ByproductImageTable
    cones: ConeSets
    schedule: Schedule
    algorithm_angles: Mapping[int, float]
    i_init: PauliVector

    @property
    def n(self) -> int:
        return self.pattern.n_logical

    @property
    def depth(self) -> int:
        return self.schedule.depth

    def is_clifford(self) -> bool:
        return not self.pattern.adaptive_sites()


# ------------------------------------------------------------------- images


def compute_byproduct_images(pattern: MeasurementPattern, circuit: LogicalCircuit) -> ByproductImageTable:
    if circuit.n_qubits != pattern.n_logical or len(circuit.gates) != pattern.n_cuts:
        raise ValueError("circuit does not match the pattern")
    n = pattern.n_logical
    suffix = suffix_prop_matrices(circuit)
    cut_of = {r.gate_id: r.cut_index for r in pattern.gate_records}
    img: dict[int, PauliVector] = {}
    for s in pattern.sites:
        if s.role == "output":
            img[s.id] = PauliVector.unit_x(n, s.wire)
        elif s.role != "redundant":
            img[s.id] = apply_prop(suffix[cut_of[s.gate_id]], s.outcome_pauli)
    for s in pattern.sites:
        if s.role == "redundant":
            acc = PauliVector.zero(n)
            for j in pattern.neighbors(s.id):
                if pattern.site(j).role not in ("redundant", "output"):
                    acc = acc + img[j]
            img[s.id] = acc
    gates = {r.gate_id: apply_prop(suffix[r.cut_index], r.u0) for r in pattern.gate_records}
    return ByproductImageTable(dict(sorted(img.items())), gates)


# -------------------------------------------------------------------- cones


def compute_cones(images: ByproductImageTable, pattern: MeasurementPattern) -> ConeSets:
    """Cone sets from the anticommutation test and the refined cut order."""
    adaptive = pattern.adaptive_sites()
    key = {j: pattern.order_key(j) for j in adaptive}
    fc: dict[int, set[int]] = {s.id: set() for s in pattern.sites}
    bc: dict[int, set[int]] = {s.id: set() for s in pattern.sites}
    for s in pattern.sites:
        if s.role == "redundant":
            continue
        k = s.id
        fk = images.site[k]
        kk = pattern.order_key(k)
        for j in adaptive:
            if j != k and symplectic_product(fk, images.site[j]):
                (fc if kk < key[j] else bc)[k].add(j)
    # a redundant site acts through the kappa' of its neighbors
    for s in pattern.sites:
        if s.role != "redundant":
            continue
        f: set[int] = set()
        b: set[int] = set()
        for j in pattern.neighbors(s.id):
            if pattern.site(j).role not in ("redundant", "output"):
                f ^= fc[j]
                b ^= bc[j]
        fc[s.id], bc[s.id] = f, b
    gfc: dict[int, frozenset[int]] = {}
    gbc: dict[int, frozenset[int]] = {}
    for gid, fg in images.gate.items():
        gk = (gid, _GATE_MICRO)
        hits = [j for j in adaptive if symplectic_product(fg, images.site[j])]
        gfc[gid] = frozenset(j for j in hits if gk < key[j])
        gbc[gid] = frozenset(j for j in hits if gk > key[j])
    return ConeSets(
        {k: frozenset(v) for k, v in fc.items()},
        {k: frozenset(v) for k, v in bc.items()},
        gfc,
        gbc,
    )


def compute_schedule(cones: ConeSets, pattern: MeasurementPattern) -> Schedule:
    """Q_0 = fixed-basis sites; then peel off adaptive sites with no pending predecessor."""
    adaptive = set(pattern.adaptive_sites())
    q0 = tuple(s.id for s in pattern.sites if s.id not in adaptive)
    indeg = {j: 0 for j in adaptive}
    for k in adaptive:
        for j in cones.fc[k]:
            indeg[j] += 1
    rounds = [q0]
    frontier = sorted(j for j, d in indeg.items() if d == 0)
    done = 0
    while frontier:
        rounds.append(tuple(frontier))
        done += len(frontier)
        nxt = []
        for k in frontier:
            for j in cones.fc[k]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    nxt.append(j)
        frontier = sorted(nxt)
    if done != len(adaptive):
        raise ScheduleError("cyclic forward-cone relation")
    if not q0:
        rounds = rounds[1:]
    return Schedule(tuple(rounds))


def compute_algorithm_angles(pattern: MeasurementPattern, cones: ConeSets, kappa: Mapping[int, int] | None = None) -> dict[int, float]:
    """Network angles with the sign fixed by backward-cone kappa and gate constants."""
    kappa = pattern.kappa() if kappa is None else kappa
    z_sites = set(pattern.z_measured())
    eta = {j: 0 for j in pattern.adaptive_sites()}
    for k, cone in cones.bc.items():
        if k in z_sites or not kappa.get(k, 0):
            continue
        for j in cone:
            eta[j] ^= 1
    for cone in cones.gate_bc.values():
        for j in cone:
            eta[j] ^= 1
    return {j: (-1) ** e * pattern.site(j).basis.angle for j, e in sorted(eta.items())}


def compute_i_init(images: ByproductImageTable, pattern: MeasurementPattern, kappa: Mapping[int, int] | None = None) -> PauliVector:
    kappa = pattern.kappa() if kappa is None else kappa
    acc = PauliVector.zero(pattern.n_logical)
    for s in pattern.sites:
        if s.basis.kind != "Z" and kappa.get(s.id, 0):
            acc = acc + images.site[s.id]
    for fg in images.gate.values():
        acc = acc + fg
    return acc


def compile_pattern(pattern: MeasurementPattern, circuit: LogicalCircuit) -> CompiledProgram:
    images = compute_byproduct_images(pattern, circuit)
    cones = compute_cones(images, pattern)
    schedule = compute_schedule(cones, pattern)
    angles = compute_algorithm_angles(pattern, cones)
    return CompiledProgram(pattern, circuit, images, cones, schedule, angles, compute_i_init(images, pattern))


def compile_circuit(c: LogicalCircuit, kappa: KappaSpec = None) -> CompiledProgram:
    """expand -> stitch -> compile."""
    prim = expand_macros(c)
    return compile_pattern(stitch(prim, kappa), prim)


# --------------------------------------------------------------- time model


def cluster_size_bound(n: float, network_depth_: float) -> float:
    return 36.0 * n**3 * network_depth_


def correction_term(n: float, delta_q: float, delta_cl: float, p_exp: float) -> float:
    """The n-dependent classical overhead relative to one measurement round."""
    return delta_cl / delta_q * (p_exp + 4) * math.log2(n)


def time_model(
    depth: int,
    n: float,
    cluster_size: float,
    network_depth_: float,
    delta_q: float,
    delta_cl: float,
    c_coeff: float = 1.0,
    p_exp: float = 3.0,
) -> dict:
    if delta_q <= 0 or delta_cl < 0:
        raise ValueError("time constants must be positive")
    if n < 1 or cluster_size < 1:
        raise ValueError("need n >= 1 and a nonempty cluster")
    if c_coeff <= 0:
        raise ValueError("c must be positive")
    r = delta_cl / delta_q
    t_bound = depth * delta_q * (1 + r * (math.log2(cluster_size) + math.log2(n) + 2))
    const = 1 + r * (4 + math.log2(9 * c_coeff))
    corr = correction_term(n, delta_q, delta_cl, p_exp)
    return {
        "D": depth,
        "n": n,
        "cluster_size": cluster_size,
        "network_depth": network_depth_,
        "delta_q": delta_q,
        "delta_cl": delta_cl,
        "c": c_coeff,
        "p": p_exp,
        "t_comp_bound": t_bound,
        "cluster_size_bound": cluster_size_bound(n, network_depth_),
        "specialized_bound": depth * delta_q * (const + corr),
        "specialized_constant": const,
        "correction_term": corr,
    }


def depth_report(
    program: CompiledProgram,
    delta_q: float,
    delta_cl: float,
    c_coeff: float = 1.0,
    p_exp: float = 3.0,
    n_override: float | None = None,
) -> dict:
    """Logical depth, round sizes and the time bounds for ``program``.

    ``n_override`` evaluates the asymptotic terms at another qubit count.
    """
    dn = network_depth(program.circuit)
    n = program.n if n_override is None else n_override
    rep = time_model(program.depth, n, len(program.pattern), dn, delta_q, delta_cl, c_coeff, p_exp)
    rep.update(
        {
            "t_max": program.schedule.t_max,
            "round_sizes": [len(r) for r in program.schedule.rounds],
            "n_logical": program.n,
            "primitive_gates": len(program.circuit.gates),
        }
    )
    return rep


# ------------------------------------------------------------ serialization


def _pv(v: PauliVector) -> dict[str, str]:
    return {"x": bits_to_hex(v.x), "z": bits_to_hex(v.z)}


def program_to_json(p: CompiledProgram) -> dict:
    d = pattern_to_json(p.pattern)
    d["images"] = {str(k): _pv(v) for k, v in p.images.site.items()}
    d["gate_images"] = {str(k): _pv(v) for k, v in p.images.gate.items()}
    d["schedule"] = [list(r) for r in p.schedule.rounds]
    d["algorithm_angles"] = {str(k): v for k, v in p.algorithm_angles.items()}
    d["i_init"] = _pv(p.i_init)
    d["circuit"] = format_circuit(p.circuit)
    d["depth"] = p.depth
    return d


def dumps_program(p: CompiledProgram) -> str:
    return _jsonio.dumps(program_to_json(p))


def program_from_json(d: Mapping) -> CompiledProgram:
    """Rebuild a program; derived fields are recomputed and must match the file."""
    pattern = pattern_from_json(d)
    circuit = parse_circuit(d["circuit"])
    prog = compile_pattern(pattern, circuit)
    n = pattern.n_logical
    stored = {int(k): PauliVector(n, hex_to_bits(v["x"]), hex_to_bits(v["z"])) for k, v in d["images"].items()}
    if stored != dict(prog.images.site):
        raise ValueError("stored byproduct images disagree with the pattern")
    if [list(r) for r in prog.schedule.rounds] != [list(r) for r in d["schedule"]]:
        raise ValueError("stored schedule disagrees with the pattern")
    return prog
