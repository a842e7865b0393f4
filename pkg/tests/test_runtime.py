import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import circuits
from oneway.circuit_ir import CNOT, Hadamard, LogicalCircuit, RotEuler, RotZ, SPhase
from oneway.compiler import compile_circuit
from oneway.f2_pauli import PauliVector
from oneway.quantum_backend import prepare_cluster
from oneway.runtime import (
    BackendError,
    InfoFlowVector,
    RunResult,
    evaluate_scheme,
    full_run,
    readout,
    run_round,
    run_round_zero,
)
from oneway.verifier import check_angles, check_flow_identity, compare_distributions, oracle_distribution

XI, ETA, ZETA = 0.3, 1.1, -0.7
ROT = LogicalCircuit(1, (RotEuler(0, XI, ETA, ZETA),))
SFORM = {(x, 0): int(x > 0) for x in range(5)}


def literal_run(program, forced):
    state = prepare_cluster(program.pattern, "dense")
    i, modified, outcomes = run_round_zero(program, state, forced=forced)
    angles = {}
    for t in range(1, program.schedule.t_max + 1):
        out, i, a = run_round(program, state, t, i, modified, forced=forced)
        outcomes.update(out)
        angles.update(a)
    return i, outcomes, angles


def test_round_zero_all_zero():
    p = compile_circuit(ROT)
    state = prepare_cluster(p.pattern, "dense")
    i0, modified, _ = run_round_zero(p, state, forced={0: 0, 4: 0})
    assert i0.value == p.i_init and i0.round == 0
    assert modified == dict(p.algorithm_angles)


def test_round_zero_first_site_one():
    p = compile_circuit(ROT)
    state = prepare_cluster(p.pattern, "dense")
    i0, modified, _ = run_round_zero(p, state, forced={0: 1, 4: 0})
    assert i0.value == p.i_init + p.images.site[0]
    assert i0.value.z == 1
    assert modified[1] == p.algorithm_angles[1]


def test_clifford_completes_in_round_zero():
    p = compile_circuit(LogicalCircuit(1, (Hadamard(0),)))
    assert p.schedule.t_max == 0
    state = prepare_cluster(p.pattern, "dense")
    i0, _, outcomes = run_round_zero(p, state, rng=np.random.default_rng(0))
    assert readout(i0) == (0,)
    assert len(outcomes) == len(p.pattern)


def test_round_guards():
    p = compile_circuit(ROT)
    state = prepare_cluster(p.pattern, "dense")
    i0, modified, _ = run_round_zero(p, state, forced={0: 0, 4: 0})
    with pytest.raises(IndexError):
        run_round(p, state, 4, i0, modified)
    with pytest.raises(ValueError):
        run_round(p, state, 2, i0, modified)
    with pytest.raises(ValueError):
        InfoFlowVector(PauliVector.zero(1), -2)


@pytest.mark.parametrize("s", list(itertools.product((0, 1), repeat=4)))
def test_rotation_procedure_angles(s):
    """Generic scheme vs the hand-written rotation procedure on the Sform-like chain."""
    p = compile_circuit(ROT, SFORM)
    forced = {0: s[0], 1: s[1], 2: s[2], 3: s[3], 4: 0}
    _, _, angles = literal_run(p, forced)
    k = {i: int(i > 0) for i in range(5)}  # chain index -> kappa'
    assert angles[1] == -XI * (-1) ** (s[0] + k[0])
    assert angles[2] == -ETA * (-1) ** (s[1] + k[1])
    assert angles[3] == -ZETA * (-1) ** (s[0] + s[2] + k[0] + k[2])


def test_all_zero_outcomes_keep_i_init():
    p = compile_circuit(ROT)
    i, _, angles = literal_run(p, {k: 0 for k in range(5)})
    assert i.value == p.i_init
    assert angles == dict(p.algorithm_angles)


def test_readout_examples():
    assert readout(PauliVector(2, 0, 0b11)) == (0, 0)
    p = compile_circuit(LogicalCircuit(2, ()))
    before = InfoFlowVector(PauliVector(2, 0b11, 0), 0)
    # outcome 1 on the wire-0 output, 0 on wire 1
    after = before.value + p.images.site[p.pattern.outputs[0]]
    assert readout(after) == (0, 1)


def test_empty_wire_is_a_fair_coin():
    res = full_run(compile_circuit(LogicalCircuit(1)), 4000, seed=2)
    h = res.histogram()
    assert set(h) == {"0", "1"} and abs(h["0"] / 4000 - 0.5) < 0.03
    one = full_run(compile_circuit(LogicalCircuit(1)), 1)
    assert len(one) == 1 and one[0].readout in ((0,), (1,))


@pytest.mark.parametrize("backend", ["auto", "dense", "tableau"])
def test_hadamard_point_mass(backend):
    res = full_run(compile_circuit(LogicalCircuit(1, (Hadamard(0),))), 10_000, backend=backend)
    assert res.histogram() == {"0": 10_000}


def test_rz_is_uniform():
    res = full_run(compile_circuit(LogicalCircuit(1, (RotZ(0, 0.7),))), 10_000, seed=5)
    assert compare_distributions(res.histogram(), {"0": 0.5, "1": 0.5}).tvd < 0.02


def test_tableau_rejects_adaptive_programs():
    with pytest.raises(BackendError):
        full_run(compile_circuit(ROT), 10, backend="tableau")
    with pytest.raises(ValueError):
        full_run(compile_circuit(ROT), 0)


def test_seed_determinism_and_threads():
    p = compile_circuit(LogicalCircuit(2, (RotEuler(0, 0.2, 0.9, -1.3), CNOT(0, 1), RotZ(1, 0.5))))
    a = full_run(p, 300, seed=11)
    b = full_run(p, 300, seed=11, threads=3, batch_amplitudes=1 << 12)
    c = full_run(p, 300, seed=12)
    assert np.array_equal(a.outcomes, b.outcomes)
    assert not np.array_equal(a.outcomes, c.outcomes)
    assert a.to_json() == b.to_json()


def test_records_cover_all_sites():
    p = compile_circuit(LogicalCircuit(2, (Hadamard(0), CNOT(0, 1), RotZ(1, 0.3))))
    rec = full_run(p, 3)[2]
    assert len(rec.outcomes) == len(p.pattern)
    assert [v.round for v in rec.i_trace] == list(range(-1, p.schedule.t_max + 1))
    assert set(rec.measured_angles) == set(p.pattern.adaptive_sites())


@given(circuits(max_n=2, max_gates=3), st.integers(0, 2**32 - 1), st.integers(0, 2**16))
@settings(max_examples=30)
def test_flow_identity_and_angle_signs(c, seed, kseed):
    rng = np.random.default_rng(kseed)
    p = compile_circuit(c, lambda x, y: rng.integers(2))
    res = full_run(p, 20, seed=seed)
    for rec in res:
        last = rec.i_trace[-1].value
        assert check_flow_identity(p, rec.outcomes, (last.x, last.z))
        assert check_angles(p, rec.outcomes, rec.measured_angles)


@given(circuits(max_n=2, max_gates=3, kinds=("cnot", "h", "s", "rz", "rx", "rot")), st.data())
@settings(max_examples=40)
def test_kappa_and_outcome_flip_together(c, data):
    p = compile_circuit(c)
    body = [s for s in p.pattern.sites if s.role in ("input", "body")]
    if not body:
        return
    site = data.draw(st.sampled_from(body))
    q = compile_circuit(c, {site.coord: 1})
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    outcomes = rng.integers(0, 2, size=(16, len(p.pattern)), dtype=np.uint8)
    flipped = outcomes.copy()
    flipped[:, site.id] ^= 1
    a = RunResult(p, 0, "dense", outcomes, evaluate_scheme(p, outcomes))
    b = RunResult(q, 0, "dense", flipped, evaluate_scheme(q, flipped))
    assert np.array_equal(a.readouts, b.readouts)
    assert np.array_equal(a.measured_angles, b.measured_angles)


def test_kappa_pairing_distribution():
    c = LogicalCircuit(2, (RotEuler(0, 0.2, 0.9, -1.3), CNOT(0, 1), RotZ(1, 0.5), SPhase(0)))
    p = compile_circuit(c)
    q = compile_circuit(c, lambda x, y: (x * 7 + y * 3) % 2)
    hp = full_run(p, 20_000, seed=1).histogram()
    hq = full_run(q, 20_000, seed=2).histogram()
    oracle = oracle_distribution(c)
    assert compare_distributions(hp, oracle).tvd < 0.02
    assert compare_distributions(hq, oracle).tvd < 0.02
    assert compare_distributions(hp, hq).tvd < 0.03
    assert math.isclose(sum(oracle.values()), 1.0)
