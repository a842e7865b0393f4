import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import circuits
from oneway.circuit_ir import CNOT, Hadamard, LogicalCircuit, RotEuler, RotZ, expand_macros
from oneway.pattern_layout import (
    LayoutError,
    derive_kappa_prime,
    dumps_pattern,
    instantiate_cnot,
    instantiate_hadamard,
    instantiate_rotation,
    instantiate_sphase,
    pattern_from_json,
    pattern_to_json,
    stitch,
)
from oneway.quantum_backend import MeasBasis, prepare_cluster, verify_stabilizers
from oneway.verifier import sform_chain_kappa


def bases(tpl, labels=(1, 2, 3, 4)):
    return [tpl.site(i).basis for i in labels]


def test_zero_rotation_is_all_x():
    tpl = instantiate_rotation(0, 0.0, 0.0, 0.0)
    assert bases(tpl) == [MeasBasis.x()] * 4
    assert not any(s.adaptive for s in tpl.sites)


def test_quarter_xi_gives_fixed_y_site():
    tpl = instantiate_rotation(0, math.pi / 2, 0.0, 0.0)
    s2 = tpl.site(2)
    assert not s2.adaptive and s2.basis.pauli()[0] == "Y"


def test_generic_rotation_sites():
    tpl = instantiate_rotation(0, 0.3, 0.5, 0.7)
    assert [tpl.site(i).adaptive for i in (1, 2, 3, 4)] == [False, True, True, True]
    assert [tpl.site(i).basis.angle for i in (2, 3, 4)] == [-0.3, -0.5, -0.7]
    assert [tpl.site(i).pauli[0] for i in (1, 2, 3, 4)] == [(0, 1), (1, 0), (0, 1), (1, 0)]
    assert tpl.u0 == {}


def test_hadamard_template():
    tpl = instantiate_hadamard(0)
    assert len(tpl.sites) == 5 and not any(s.adaptive for s in tpl.sites)
    assert [b.pauli()[0] for b in bases(tpl)] == ["X", "Y", "Y", "Y"]
    assert [tpl.site(i).pauli[0] for i in (1, 2, 3, 4)] == [(1, 0), (0, 1), (1, 1), (1, 0)]
    assert tpl.byproduct({1: 1}) == {0: (1, 0)}


def test_sphase_template():
    tpl = instantiate_sphase(0)
    assert [b.pauli()[0] for b in bases(tpl)] == ["X", "X", "Y", "X"]
    assert [tpl.site(i).pauli[0] for i in (1, 2, 3, 4)] == [(0, 1), (1, 1), (0, 1), (1, 0)]
    assert tpl.byproduct({}) == {0: (0, 0)}


def test_cnot_template():
    tpl = instantiate_cnot(0, 1)
    assert len(tpl.sites) == 15
    assert [s.label for s in tpl.sites if s.role == "input"] == [1, 9]
    assert [s.label for s in tpl.sites if s.role == "output"] == [7, 15]
    assert tpl.byproduct({}) == {0: (0, 1), 1: (0, 0)}
    assert tpl.byproduct({2: 1}) == {0: (1, 1), 1: (1, 0)}
    assert tpl.byproduct({1: 1}) == {0: (0, 0), 1: (0, 0)}
    assert tpl.byproduct({13: 1}) == {0: (0, 1), 1: (0, 1)}


def test_cnot_needs_neighbors():
    with pytest.raises(LayoutError):
        instantiate_cnot(0, 2)
    with pytest.raises(LayoutError):
        stitch(LogicalCircuit(3, (CNOT(0, 2),)))


def test_single_rotation_chain():
    p = stitch(LogicalCircuit(1, (RotEuler(0, 0.1, 0.2, 0.3),)))
    assert len(p) == 5
    assert len(p.outputs) == 1 and len(p.equatorial()) == 4


def test_two_rotations_share_a_site():
    p = stitch(LogicalCircuit(1, (RotZ(0, 0.4), RotEuler(0, 0.1, 0.2, 0.3))))
    assert len(p) == 9
    a, b = p.gate_records
    assert a.co == b.ci


def test_hadamard_then_cnot():
    p = stitch(LogicalCircuit(2, (Hadamard(0), CNOT(0, 1))))
    h, pads, cnot = p.gate_records[0], p.gate_records[1:-1], p.gate_records[-1]
    assert h.kind == "h" and cnot.kind == "cnot"
    assert h.co[0] == cnot.ci[0]
    # the lagging target wire is padded up to the CNOT column
    assert [r.kind for r in pads] == ["pad", "pad"]
    assert len(cnot.ci) == 2 and len(cnot.cm) == 11 and len(cnot.co) == 2


@given(circuits(max_n=3, max_gates=6, kinds=("cnot", "h", "s", "rz", "rx", "rot", "diag")), st.integers(0, 2**16))
def test_structural_invariants(c, seed):
    rng = np.random.default_rng(seed)
    p = stitch(expand_macros(c), lambda x, y: rng.integers(2))
    assert len({s.coord for s in p.sites}) == len(p)
    assert [p.site(i).wire for i in p.outputs] == list(range(c.n_qubits))
    for s in p.sites:
        assert (s.role in ("redundant", "output")) == (s.basis.kind == "Z")
        if s.adaptive:
            assert s.basis.kind == "EQ"
    for r in p.gate_records:
        assert set(r.ci).isdisjoint(r.cm) and set(r.cm).isdisjoint(r.co)


@given(circuits(max_n=2, max_gates=4), st.integers(0, 2**16))
def test_json_round_trip(c, seed):
    rng = np.random.default_rng(seed)
    p = stitch(expand_macros(c), lambda x, y: rng.integers(2))
    text = dumps_pattern(p)
    assert pattern_from_json(json.loads(text)) == p
    assert pattern_to_json(p) == json.loads(text)


def test_kappa_prime_without_redundant_neighbors():
    p = stitch(LogicalCircuit(1, (RotZ(0, 0.3),)), {(1, 0): 1})
    assert derive_kappa_prime(p, {}) == p.kappa()


def test_kappa_prime_sums_redundant_neighbors():
    p = stitch(LogicalCircuit(2, (RotZ(0, 0.3),)))
    # wire 1 is idle, so the middle row under the rotation is redundant
    mid = p.at(1, 1)
    assert p.site(mid).role == "redundant"
    k = p.at(1, 0)
    kp = derive_kappa_prime(p, {j: 0 for j in p.redundant} | {mid: 1})
    assert kp[k] == 1
    with pytest.raises(KeyError):
        derive_kappa_prime(p, {})


def test_kappa_prime_cancels_mod_two():
    p = stitch(LogicalCircuit(3, (RotZ(1, 0.3),)), {(2, 2): 1})
    k = p.at(2, 2)
    red = [j for j in p.neighbors(k) if p.site(j).role == "redundant"]
    assert len(red) == 2
    kp = derive_kappa_prime(p, {j: 0 for j in p.redundant} | {j: 1 for j in red})
    assert kp[k] == 1


@given(st.integers(0, 2**16))
def test_kappa_prime_matches_stabilizers_after_z_measurements(seed):
    rng = np.random.default_rng(seed)
    p = stitch(LogicalCircuit(2, (RotZ(0, 0.3), Hadamard(1))), lambda x, y: rng.integers(2))
    state = prepare_cluster(p, "tableau")
    outcomes = {}
    for j in p.redundant:
        outcomes[j], _ = state.measure(j, MeasBasis.z(), rng=rng)
    kp = derive_kappa_prime(p, outcomes)
    coords = {s.id: s.coord for s in p.sites if s.role != "redundant"}
    rep = verify_stabilizers(state, coords, kp)
    assert rep.ok


def test_sform_chain_has_the_quoted_kappa_values():
    assert sform_chain_kappa(5) == {0: 0, 1: 1, 2: 1, 3: 1, 4: 1}
