"""Gate templates on the cluster grid and their stitching into one pattern.

Logical wire ``i`` runs along grid row ``2i``.  One-qubit gates are 5-site
chains, the CNOT is a 15-site block spanning two neighboring wires, and the
output site of each template is the input site of the next template on that
wire.  Grid sites inside the bounding box that no template uses are measured
in Z ("redundant").

Each measured site carries the Pauli it contributes to the byproduct at its
gate's output cut, as a function of its own outcome.  For rotation chains the
quarter-turn angles (odd multiples of pi/2) are measured in a fixed Y basis; a
fixed basis there equals the adaptive one up to a relabeled outcome, and the
relabeling is folded into the outcome Paulis of the earlier sites.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace

from . import _jsonio
from .circuit_ir import CNOT, Gate, Hadamard, LogicalCircuit, RotEuler, RotX, RotZ, SPhase, gate_qubits
from .f2_pauli import PauliVector, bits_to_hex, hex_to_bits, is_clifford_angle, is_quarter_turn
from .quantum_backend import MeasBasis

__all__ = [
    "TemplateSite",
    "GateTemplate",
    "SiteAssignment",
    "GateRecord",
    "MeasurementPattern",
    "LayoutError",
    "instantiate_rotation",
    "instantiate_hadamard",
    "instantiate_sphase",
    "instantiate_cnot",
    "instantiate_pad",
    "stitch",
    "derive_kappa_prime",
    "pattern_to_json",
    "pattern_from_json",
]

LocalPauli = Mapping[int, tuple[int, int]]  # wire -> (x, z)


class LayoutError(RuntimeError):
    """Inconsistent layout (internal invariant violated)."""


@dataclass(frozen=True)
class TemplateSite:
    label: int
    dx: int
    row: int  # absolute grid row
    role: str  # "input", "body" or "output"
    basis: MeasBasis | None = None
    adaptive: bool = False
    pauli: LocalPauli = field(default_factory=dict)
    micro: int = 0


@dataclass(frozen=True)
class GateTemplate:
    kind: str
    wires: tuple[int, ...]
    sites: tuple[TemplateSite, ...]
    u0: LocalPauli = field(default_factory=dict)

    @property
    def width(self) -> int:
        return max(s.dx for s in self.sites)

    def site(self, label: int) -> TemplateSite:
        return next(s for s in self.sites if s.label == label)

    def byproduct(self, outcomes: Mapping[int, int]) -> dict[int, tuple[int, int]]:
        """Total byproduct ``wire -> (x, z)`` for outcomes keyed by site label."""
        acc = {w: [0, 0] for w in self.wires}
        for w, (x, z) in self.u0.items():
            acc[w][0] ^= x
            acc[w][1] ^= z
        for s in self.sites:
            if outcomes.get(s.label, 0):
                for w, (x, z) in s.pauli.items():
                    acc[w][0] ^= x
                    acc[w][1] ^= z
        return {w: (v[0], v[1]) for w, v in acc.items()}


def _snap(a: float) -> float:
    if is_clifford_angle(a):
        return round(a / (math.pi / 2)) * (math.pi / 2)
    return a


def instantiate_rotation(q: int, xi: float, eta: float, zeta: float, row: int | None = None, kind: str = "rot") -> GateTemplate:
    """5-site chain for ``Ux(zeta) Uz(eta) Ux(xi)`` on wire ``q``."""
    row = 2 * q if row is None else row
    angles = {2: xi, 3: eta, 4: zeta}
    # effective outcomes as sets of raw outcomes (bitmask over labels)
    eff = {1: 1 << 1}
    deps = {2: (1,), 3: (2,), 4: (1, 3)}
    for j in (2, 3, 4):
        e = 1 << j
        if is_quarter_turn(angles[j]):
            for d in deps[j]:
                e ^= eff[d]
        eff[j] = e
    xexp = eff[2] ^ eff[4]
    zexp = eff[1] ^ eff[3]
    sites = [TemplateSite(1, 0, row, "input", MeasBasis.x(), False, {q: ((xexp >> 1) & 1, (zexp >> 1) & 1)}, 0)]
    for j in (2, 3, 4):
        phi = _snap(-angles[j])
        sites.append(
            TemplateSite(
                j,
                j - 1,
                row,
                "body",
                MeasBasis.equatorial(phi),
                not is_clifford_angle(phi),
                {q: ((xexp >> j) & 1, (zexp >> j) & 1)},
                j - 1,
            )
        )
    sites.append(TemplateSite(5, 4, row, "output"))
    return GateTemplate(kind, (q,), tuple(sites))


def instantiate_hadamard(q: int, row: int | None = None) -> GateTemplate:
    # H = Ux(pi/2) Uz(pi/2) Ux(pi/2) up to phase
    h = math.pi / 2
    return instantiate_rotation(q, h, h, h, row, kind="h")


def instantiate_sphase(q: int, row: int | None = None) -> GateTemplate:
    return instantiate_rotation(q, 0.0, math.pi / 2, 0.0, row, kind="s")


def instantiate_pad(q: int, row: int | None = None) -> GateTemplate:
    """Two X measurements: the identity on wire ``q``, width 2."""
    row = 2 * q if row is None else row
    return GateTemplate(
        "pad",
        (q,),
        (
            TemplateSite(1, 0, row, "input", MeasBasis.x(), False, {q: (0, 1)}, 0),
            TemplateSite(2, 1, row, "body", MeasBasis.x(), False, {q: (1, 0)}, 1),
            TemplateSite(3, 2, row, "output"),
        ),
    )


# byproduct exponents of the 15-site CNOT block, listed by site label
_CNOT_X_C = {2, 3, 5, 6}
_CNOT_X_T = {2, 3, 8, 10, 12, 14}
_CNOT_Z_C = {1, 3, 4, 5, 8, 9, 11}
_CNOT_Z_T = {9, 11, 13}
_CNOT_Y = {2, 3, 4, 5, 6, 8, 12}


def instantiate_cnot(c: int, t: int) -> GateTemplate:
    """15-site CNOT block: control row 1..7, target row 9..15, bridge 8 under 4."""
    if abs(c - t) != 1:
        raise LayoutError(f"CNOT({c},{t}) needs neighboring wires")
    rc, rt = 2 * c, 2 * t
    sites = []
    for label in range(1, 16):
        if label <= 7:
            dx, row = label - 1, rc
        elif label == 8:
            dx, row = 3, (rc + rt) // 2
        else:
            dx, row = label - 9, rt
        if label in (7, 15):
            sites.append(TemplateSite(label, dx, row, "output"))
            continue
        basis = MeasBasis.y() if label in _CNOT_Y else MeasBasis.x()
        pauli = {
            c: (int(label in _CNOT_X_C), int(label in _CNOT_Z_C)),
            t: (int(label in _CNOT_X_T), int(label in _CNOT_Z_T)),
        }
        role = "input" if label in (1, 9) else "body"
        sites.append(TemplateSite(label, dx, row, role, basis, False, pauli, 0))
    return GateTemplate("cnot", (c, t), tuple(sites), {c: (0, 1), t: (0, 0)})


def template_for(g: Gate) -> GateTemplate:
    if isinstance(g, CNOT):
        return instantiate_cnot(g.control, g.target)
    if isinstance(g, Hadamard):
        return instantiate_hadamard(g.q)
    if isinstance(g, SPhase):
        return instantiate_sphase(g.q)
    if isinstance(g, RotZ):
        return instantiate_rotation(g.q, 0.0, g.angle, 0.0)
    if isinstance(g, RotX):
        return instantiate_rotation(g.q, g.angle, 0.0, 0.0)
    if isinstance(g, RotEuler):
        return instantiate_rotation(g.q, g.xi, g.eta, g.zeta)
    raise LayoutError(f"not a primitive gate: {g!r}")


# ------------------------------------------------------------------ pattern


@dataclass(frozen=True)
class SiteAssignment:
    id: int
    x: int
    y: int
    role: str  # "input", "body", "output", "redundant"
    basis: MeasBasis
    adaptive: bool = False
    gate_id: int | None = None
    kappa: int = 0
    outcome_pauli: PauliVector | None = None
    wire: int | None = None
    micro: int = 0

    @property
    def coord(self) -> tuple[int, int]:
        return (self.x, self.y)

    @property
    def network_angle(self) -> float | None:
        return self.basis.angle if self.basis.kind == "EQ" else None


@dataclass(frozen=True)
class GateRecord:
    gate_id: int
    kind: str
    wires: tuple[int, ...]
    u0: PauliVector
    cut_index: int  # cut at which the outcome Paulis are expressed
    circuit_index: int | None
    ci: tuple[int, ...]
    cm: tuple[int, ...]
    co: tuple[int, ...]


@dataclass(frozen=True)
class MeasurementPattern:
    n_logical: int
    sites: tuple[SiteAssignment, ...]
    wires: tuple[int, ...]
    gate_records: tuple[GateRecord, ...]
    n_cuts: int  # number of primitive gates; cut n_cuts is the output cut

    def __post_init__(self) -> None:
        coords = {s.coord: s.id for s in self.sites}
        object.__setattr__(self, "_coord_index", coords)
        if len(coords) != len(self.sites) or any(s.id != i for i, s in enumerate(self.sites)):
            raise LayoutError("site ids must be 0..m-1 with unique coordinates")

    def __len__(self) -> int:
        return len(self.sites)

    def site(self, sid: int) -> SiteAssignment:
        return self.sites[sid]

    def at(self, x: int, y: int) -> int | None:
        return self._coord_index.get((x, y))  # type: ignore[attr-defined]

    def neighbors(self, sid: int) -> list[int]:
        s = self.sites[sid]
        out = []
        for c in ((s.x - 1, s.y), (s.x + 1, s.y), (s.x, s.y - 1), (s.x, s.y + 1)):
            j = self.at(*c)
            if j is not None:
                out.append(j)
        return out

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for s in self.sites:
            for c in ((s.x + 1, s.y), (s.x, s.y + 1)):
                j = self.at(*c)
                if j is not None:
                    out.append((s.id, j))
        return out

    @property
    def outputs(self) -> list[int]:
        out = [s for s in self.sites if s.role == "output"]
        return [s.id for s in sorted(out, key=lambda s: s.wire)]

    @property
    def redundant(self) -> list[int]:
        return [s.id for s in self.sites if s.role == "redundant"]

    def z_measured(self) -> list[int]:
        """Q_{0,z}: redundant sites and readout sites."""
        return [s.id for s in self.sites if s.basis.kind == "Z"]

    def equatorial(self) -> list[int]:
        """C_N without the readout sites."""
        return [s.id for s in self.sites if s.basis.kind == "EQ"]

    def adaptive_sites(self) -> list[int]:
        return [s.id for s in self.sites if s.adaptive]

    def order_key(self, sid: int) -> tuple[int, int]:
        """Position along the refined cut sequence (outputs sit at the end)."""
        s = self.sites[sid]
        if s.role == "output":
            return (len(self.gate_records), 0)
        if s.gate_id is None:
            raise LayoutError(f"site {sid} has no cut position")
        return (s.gate_id, s.micro)

    def with_kappa(self, kappa: Mapping[int, int]) -> MeasurementPattern:
        sites = tuple(replace(s, kappa=int(kappa.get(s.id, 0)) & 1) for s in self.sites)
        return replace(self, sites=sites)

    def kappa(self) -> dict[int, int]:
        return {s.id: s.kappa for s in self.sites}


KappaSpec = Callable[[int, int], int] | Mapping[tuple[int, int], int] | None


def _kappa_at(spec: KappaSpec, x: int, y: int) -> int:
    if spec is None:
        return 0
    if callable(spec):
        return int(spec(x, y)) & 1
    return int(spec.get((x, y), 0)) & 1


def stitch(c: LogicalCircuit, kappa: KappaSpec = None) -> MeasurementPattern:
    """Lay out every gate of a primitive, nearest-neighbor circuit."""
    n = c.n_qubits
    col = [0] * n
    # coordinate -> attributes (filled progressively)
    cells: dict[tuple[int, int], dict] = {(0, 2 * i): {"role": "output", "wire": i} for i in range(n)}
    records: list[dict] = []

    def place(tpl: GateTemplate, x0: int, circuit_index: int | None, cut: int) -> None:
        gid = len(records)
        rec = {"gate_id": gid, "kind": tpl.kind, "wires": tpl.wires, "u0": tpl.u0, "cut": cut,
               "circuit_index": circuit_index, "ci": [], "cm": [], "co": []}
        for ts in tpl.sites:
            coord = (x0 + ts.dx, ts.row)
            if ts.role == "input":
                cell = cells.get(coord)
                if cell is None or cell.get("role") != "output":
                    raise LayoutError(f"input site {coord} is not a wire end")
            elif coord in cells:
                raise LayoutError(f"grid site {coord} used twice")
            if ts.role == "output":
                cells[coord] = {"role": "output", "wire": tpl.wires[0] if len(tpl.wires) == 1 else
                                (tpl.wires[0] if ts.label == 7 else tpl.wires[1])}
                rec["co"].append(coord)
                continue
            cells[coord] = {"role": ts.role, "basis": ts.basis, "adaptive": ts.adaptive, "gate_id": gid,
                            "pauli": ts.pauli, "micro": ts.micro}
            rec["ci" if ts.role == "input" else "cm"].append(coord)
        records.append(rec)

    for gi, g in enumerate(c.gates):
        if isinstance(g, CNOT):
            qs = gate_qubits(g)
            x0 = max(col[q] for q in qs)
            for q in qs:
                while col[q] < x0:
                    if x0 - col[q] < 2:
                        raise LayoutError("odd column offset between wires")
                    place(instantiate_pad(q), col[q], None, gi)
                    col[q] += 2
            tpl = instantiate_cnot(g.control, g.target)
            place(tpl, x0, gi, gi + 1)
            for q in qs:
                col[q] = x0 + tpl.width
        else:
            tpl = template_for(g)
            (q,) = tpl.wires
            place(tpl, col[q], gi, gi + 1)
            col[q] += tpl.width

    width = max(col) + 1
    coords = [(x, y) for x in range(width) for y in range(2 * n - 1)]
    index = {coord: i for i, coord in enumerate(coords)}

    def pv(local: LocalPauli) -> PauliVector:
        x = z = 0
        for w, (bx, bz) in local.items():
            x |= bx << w
            z |= bz << w
        return PauliVector(n, x, z)

    sites = []
    for coord in coords:
        cell = cells.get(coord)
        k = _kappa_at(kappa, *coord)
        sid = index[coord]
        if cell is None:
            sites.append(SiteAssignment(sid, coord[0], coord[1], "redundant", MeasBasis.z(), kappa=k))
        elif cell["role"] == "output":
            sites.append(SiteAssignment(sid, coord[0], coord[1], "output", MeasBasis.z(), kappa=k, wire=cell["wire"]))
        else:
            sites.append(
                SiteAssignment(sid, coord[0], coord[1], cell["role"], cell["basis"], cell["adaptive"],
                               cell["gate_id"], k, pv(cell["pauli"]), None, cell["micro"])
            )
    gate_records = tuple(
        GateRecord(r["gate_id"], r["kind"], tuple(r["wires"]), pv(r["u0"]), r["cut"], r["circuit_index"],
                   tuple(index[x] for x in r["ci"]), tuple(index[x] for x in r["cm"]), tuple(index[x] for x in r["co"]))
        for r in records
    )
    pattern = MeasurementPattern(n, tuple(sites), tuple(2 * i for i in range(n)), gate_records, len(c.gates))
    _check_pattern(pattern)
    return pattern


def _check_pattern(p: MeasurementPattern) -> None:
    outs = [p.site(i) for i in p.outputs]
    if sorted(s.wire for s in outs) != list(range(p.n_logical)):
        raise LayoutError("need exactly one output site per wire")
    for s in p.sites:
        if (s.role in ("redundant", "output")) != (s.basis.kind == "Z"):
            raise LayoutError(f"site {s.id}: role/basis mismatch")
        if s.adaptive and (s.basis.kind != "EQ" or is_clifford_angle(s.basis.angle)):
            raise LayoutError(f"site {s.id}: adaptive site with Pauli basis")
    # output zone of a gate is the input zone of the next gate on that wire
    inputs = {i for r in p.gate_records for i in r.ci}
    for r in p.gate_records:
        for o in r.co:
            if o not in inputs and p.site(o).role != "output":
                raise LayoutError(f"dangling output site {o}")


def derive_kappa_prime(p: MeasurementPattern, z_outcomes: Mapping[int, int]) -> dict[int, int]:
    """kappa'_k = kappa_k + sum of Z outcomes of redundant neighbors, for k in C_N."""
    out = {}
    for s in p.sites:
        if s.role == "redundant":
            continue
        acc = s.kappa
        for j in p.neighbors(s.id):
            if p.site(j).role == "redundant":
                if j not in z_outcomes:
                    raise KeyError(f"missing Z outcome for redundant site {j}")
                acc ^= int(z_outcomes[j]) & 1
        out[s.id] = acc
    return out


# ------------------------------------------------------------ serialization


def _pv_json(v: PauliVector) -> dict[str, str]:
    return {"x": bits_to_hex(v.x), "z": bits_to_hex(v.z)}


def _pv_from(n: int, d: Mapping[str, str]) -> PauliVector:
    return PauliVector(n, hex_to_bits(d["x"]), hex_to_bits(d["z"]))


def pattern_to_json(p: MeasurementPattern) -> dict:
    grid = []
    for s in p.sites:
        e = {"id": s.id, "x": s.x, "y": s.y, "role": s.role, "basis": s.basis.label, "adaptive": s.adaptive,
             "kappa": s.kappa, "gate_id": s.gate_id, "micro": s.micro}
        if s.basis.kind == "EQ":
            e["angle"] = s.basis.angle
        if s.outcome_pauli is not None:
            e["pauli"] = _pv_json(s.outcome_pauli)
        if s.wire is not None:
            e["wire"] = s.wire
        grid.append(e)
    recs = [
        {"gate_id": r.gate_id, "kind": r.kind, "wires": list(r.wires), "u0_x": bits_to_hex(r.u0.x),
         "u0_z": bits_to_hex(r.u0.z), "cut_index": r.cut_index, "circuit_index": r.circuit_index,
         "ci": list(r.ci), "cm": list(r.cm), "co": list(r.co)}
        for r in p.gate_records
    ]
    return {"n_logical": p.n_logical, "grid": grid, "gate_records": recs, "wires": list(p.wires), "n_cuts": p.n_cuts}


def pattern_from_json(d: Mapping) -> MeasurementPattern:
    n = int(d["n_logical"])
    sites = []
    for e in sorted(d["grid"], key=lambda e: e["id"]):
        basis = MeasBasis.z() if e["basis"] == "Z" else MeasBasis.equatorial(float(e["angle"]))
        sites.append(
            SiteAssignment(int(e["id"]), int(e["x"]), int(e["y"]), e["role"], basis, bool(e["adaptive"]),
                           e.get("gate_id"), int(e["kappa"]), _pv_from(n, e["pauli"]) if "pauli" in e else None,
                           e.get("wire"), int(e.get("micro", 0)))
        )
    recs = tuple(
        GateRecord(int(r["gate_id"]), r["kind"], tuple(r["wires"]), PauliVector(n, hex_to_bits(r["u0_x"]), hex_to_bits(r["u0_z"])),
                   int(r["cut_index"]), r.get("circuit_index"), tuple(r["ci"]), tuple(r["cm"]), tuple(r["co"]))
        for r in d["gate_records"]
    )
    return MeasurementPattern(n, tuple(sites), tuple(d["wires"]), recs, int(d["n_cuts"]))


def dumps_pattern(p: MeasurementPattern) -> str:
    return _jsonio.dumps(pattern_to_json(p))
