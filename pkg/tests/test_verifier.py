import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import circuits
from oneway.circuit_ir import CNOT, Hadamard, LogicalCircuit, RotEuler, RotX, RotZ, SPhase
from oneway.compiler import compile_circuit
from oneway.quantum_backend import CapacityError
from oneway.verifier import (
    _conj,
    cnot_byproduct,
    compare_distributions,
    cone_bruteforce,
    fixed_pattern_check,
    hadamard_byproduct,
    kappa_decomposition,
    network_oracle,
    oracle_distribution,
    random_circuit,
    rotation_byproduct,
    template_check,
    theta_signs,
    verify_circuit,
)


def test_oracle_examples():
    assert oracle_distribution(LogicalCircuit(1)) == pytest.approx({"0": 0.5, "1": 0.5})
    assert oracle_distribution(LogicalCircuit(1, (Hadamard(0),))) == pytest.approx({"0": 1.0})
    cn = oracle_distribution(LogicalCircuit(2, (CNOT(0, 1),)))
    assert cn == pytest.approx({k: 0.25 for k in ("00", "01", "10", "11")})
    h = network_oracle(LogicalCircuit(1, (Hadamard(0),)), 100, seed=3)
    assert h == {"0": 100}
    with pytest.raises(CapacityError):
        oracle_distribution(LogicalCircuit(30))


def test_compare_distributions():
    assert compare_distributions({"0": 3, "1": 1}, {"0": 3, "1": 1}).tvd == 0
    assert compare_distributions({"0": 1}, {"1": 1}).tvd == 1
    assert compare_distributions({"0": 0.5, "1": 0.5}, {"0": 0.6, "1": 0.4}).tvd == pytest.approx(0.1)
    with pytest.raises(ValueError):
        compare_distributions({}, {"0": 1})
    with pytest.raises(ValueError):
        compare_distributions({"0": 1}, {"00": 1})


def test_byproduct_formula_examples():
    zero = {i: 0 for i in range(1, 15)}
    kp = {i: int(i > 1) for i in range(1, 6)}
    assert rotation_byproduct(zero, kp) == (0, 0)
    assert cnot_byproduct(zero, {}) == ((0, 1), (0, 0))
    assert cnot_byproduct(zero | {2: 1}, {}) == ((1, 1), (1, 0))
    assert hadamard_byproduct(zero | {2: 1}, {}) == (0, 1)


def test_rotation_with_sform_kappa_is_exact():
    kp = {1: 0, 2: 1, 3: 1, 4: 1, 5: 1}
    r = template_check(RotEuler(0, 0.4, -1.2, 2.2), [0, 0, 0, 0], kp)
    assert r.ok and r.expected == ((0, 0),)


@pytest.mark.parametrize("s", list(itertools.product((0, 1), repeat=4)))
@pytest.mark.parametrize("gate", [RotEuler(0, 0.3, 1.1, -0.7), RotZ(0, 0.9), RotX(0, -2.0), Hadamard(0), SPhase(0)])
def test_one_qubit_templates(gate, s):
    assert template_check(gate, s, seed=7).ok


@pytest.mark.parametrize("s", list(itertools.product((0, 1), repeat=4)))
@pytest.mark.parametrize("gate", [Hadamard(0), SPhase(0)])
def test_fixed_patterns_with_y_sites(gate, s):
    assert fixed_pattern_check(gate, s, {1: 1, 3: 1}).ok


def test_h_second_outcome_gives_z():
    r = fixed_pattern_check(Hadamard(0), [0, 1, 0, 0])
    assert r.ok and r.expected == ((0, 1),)


@given(st.integers(0, 2**32 - 1), st.booleans())
@settings(max_examples=20)
def test_cnot_template(seed, flip):
    rng = np.random.default_rng(seed)
    s = {i: int(rng.integers(2)) for i in range(1, 15) if i != 7}
    kp = {i: int(rng.integers(2)) for i in range(1, 16)}
    assert template_check(CNOT(1, 0) if flip else CNOT(0, 1), s, kp, seed=seed).ok


def test_cnot_all_zero_is_z_on_control():
    r = template_check(CNOT(0, 1), {})
    assert r.ok and r.expected == ((0, 1), (0, 0))


def test_rotation_cone_examples():
    p = compile_circuit(LogicalCircuit(1, (RotEuler(0, 0.3, 0.5, 0.7),)))
    b = cone_bruteforce(p.circuit, p.pattern)
    assert b.fc[0] == {1, 3}
    assert not b.bc[0]


def test_rz_before_cnots_has_empty_forward_cone():
    p = compile_circuit(LogicalCircuit(2, (RotZ(0, 0.4), CNOT(0, 1), CNOT(1, 0))))
    b = cone_bruteforce(p.circuit, p.pattern)
    adaptive = set(p.pattern.adaptive_sites())
    for j in adaptive:
        assert not b.fc[j] & adaptive


@given(circuits(max_n=3, max_gates=6, kinds=("cnot", "h", "s", "rz", "rx", "rot", "diag")), st.integers(0, 2**16))
def test_cones_match_bruteforce(c, seed):
    rng = np.random.default_rng(seed)
    p = compile_circuit(c, lambda x, y: rng.integers(2))
    b = cone_bruteforce(p.circuit, p.pattern)

    def nonempty(d):
        return {k: v for k, v in d.items() if v}

    assert nonempty(p.cones.fc) == nonempty(b.fc)
    assert nonempty(p.cones.bc) == nonempty(b.bc)
    assert nonempty(p.cones.gate_fc) == nonempty(b.gate_fc)
    assert nonempty(p.cones.gate_bc) == nonempty(b.gate_bc)


@given(st.sampled_from([("h", 0), ("s", 0), ("xq", 0), ("cnot", 0, 1), ("cnot", 1, 0)]), st.tuples(*[st.integers(0, 1)] * 4))
def test_step_rewrites_are_self_inverse(op, bits):
    p = {0: [bits[0], bits[1]], 1: [bits[2], bits[3]]}
    q = {w: list(v) for w, v in p.items()}
    _conj(op, q)
    _conj(op, q)
    assert q == p


def test_random_circuit_avoids_clifford_angles():
    import random

    c = random_circuit(random.Random(1), 3, 200, kinds=("rz", "rx", "rot", "diag", "cnot"))
    for g in c.gates:
        for a in [v for k, v in g.__dict__.items() if k in ("angle", "xi", "eta", "zeta", "phi1", "phi2", "phi3")]:
            assert -math.pi < a < math.pi
            assert abs(a - round(a / (math.pi / 2)) * math.pi / 2) > 1e-6


@pytest.mark.parametrize("flips", list(itertools.product((0, 1), repeat=3)))
def test_kappa_relation(flips):
    full, inner, outer = kappa_decomposition(flips)
    assert full == (inner + outer) % 2


def test_theta_matches_executed_angles():
    c = LogicalCircuit(2, (RotEuler(0, 0.3, 1.1, -0.7), CNOT(0, 1), RotX(1, 0.4)))
    p = compile_circuit(c, lambda x, y: (x + y) % 2)
    rep = verify_circuit(c, 4000, seed=3, program=p)
    assert rep.ok and rep.angles_ok and rep.flow_ok
    # theta is computed from forward cones only
    th = theta_signs(p, [0] * len(p.pattern))
    assert set(th) == set(p.pattern.adaptive_sites())


def test_verify_clifford_and_rz():
    assert verify_circuit(LogicalCircuit(3, (Hadamard(0), CNOT(0, 1), SPhase(1), CNOT(1, 2))), 20_000).ok
    assert verify_circuit(LogicalCircuit(1, (RotZ(0, 0.7),)), 20_000).ok


def test_corrupted_angle_fails():
    c = LogicalCircuit(1, (RotEuler(0, 0.9, 1.2, 0.4),))
    p = compile_circuit(c)
    rep = verify_circuit(c, 20_000, seed=1, program=p, corrupt=p.pattern.adaptive_sites()[1])
    assert not rep.ok and not rep.angles_ok
    assert rep.distribution.tvd > 0.03
    with pytest.raises(ValueError):
        verify_circuit(c, 10, program=p, corrupt=0)
