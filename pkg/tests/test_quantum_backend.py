import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oneway.circuit_ir import Hadamard, LogicalCircuit, RotX
from oneway.quantum_backend import (
    CapacityError,
    DenseState,
    MeasBasis,
    StabilizerTableau,
    ZeroProbabilityError,
    apply_network_unitary,
    cluster_from_coords,
    dense_expectation,
    measure,
    verify_stabilizers,
)


def chain(m):
    return {i: (i, 0) for i in range(m)}


def grid(w, h):
    return {i: (i % w, i // w) for i in range(w * h)}


def test_basis_validation():
    with pytest.raises(ValueError):
        MeasBasis("Q")
    with pytest.raises(ValueError):
        MeasBasis.equatorial(float("nan"))
    assert MeasBasis.y() == MeasBasis.equatorial(math.pi / 2)


@pytest.mark.parametrize("engine", ["dense", "tableau"])
def test_single_site_is_plus(engine):
    st_ = cluster_from_coords({0: (0, 0)}, {}, engine)
    assert verify_stabilizers(st_, {0: (0, 0)}).eigenvalues[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("engine", ["dense", "tableau"])
@pytest.mark.parametrize("k2, sign", [(0, 1.0), (1, -1.0)])
def test_three_chain_middle_eigenvalue(engine, k2, sign):
    st_ = cluster_from_coords(chain(3), {1: k2}, engine)
    assert verify_stabilizers(st_, chain(3), {1: k2}).eigenvalues[1] == pytest.approx(sign, abs=1e-12)


@pytest.mark.parametrize("engine", ["dense", "tableau"])
def test_square_all_plus(engine):
    st_ = cluster_from_coords(grid(2, 2), {}, engine)
    rep = verify_stabilizers(st_, grid(2, 2))
    assert rep.ok and all(abs(e - 1) < 1e-12 for e in rep.eigenvalues.values())


def test_plus_measured_in_x_is_zero():
    s = DenseState.empty()
    s.add_sites([0])
    assert int(s.measure(0, MeasBasis.x(), uniforms=np.array([0.999]))[0]) == 0


def test_forcing_impossible_branch_raises():
    s = DenseState.empty()
    s.add_sites([0])
    with pytest.raises(ZeroProbabilityError):
        s.measure(0, MeasBasis.x(), forced=1)
    t = StabilizerTableau()
    t.add_site(0)
    with pytest.raises(ZeroProbabilityError):
        t.measure(0, MeasBasis.x(), forced=1)


def test_measuring_dead_site():
    s = DenseState.empty()
    s.add_sites([0])
    s.measure(0, MeasBasis.z(), forced=0)
    with pytest.raises(KeyError):
        s.measure(0, MeasBasis.z(), forced=0)


def test_capacity():
    s = DenseState.empty(cap=3)
    with pytest.raises(CapacityError):
        s.add_sites(range(4))


# an isolated site is |+>, so chains start at two sites
@given(st.integers(2, 6), st.floats(-math.pi, math.pi), st.data())
def test_cluster_marginals_are_uniform(m, phi, data):
    site = data.draw(st.integers(0, m - 1))
    st_ = cluster_from_coords(chain(m), {}, "dense")
    psi = st_.amplitudes[0]
    ax = st_.order.index(site)
    a = np.moveaxis(psi, ax, 0).reshape(2, -1)
    p0 = np.sum(np.abs(a[0] + np.exp(-1j * phi) * a[1]) ** 2) / 2
    assert abs(p0 - 0.5) < 1e-10


@given(st.integers(0, 2**32 - 1))
def test_norm_preserved_by_measurement(seed):
    rng = np.random.default_rng(seed)
    st_ = cluster_from_coords(grid(3, 2), {i: int(rng.integers(2)) for i in range(6)}, "dense")
    for site in rng.permutation(6)[:4]:
        basis = MeasBasis.z() if rng.random() < 0.3 else MeasBasis.equatorial(rng.uniform(-3, 3))
        measure(st_, int(site), basis, rng)
        assert abs(st_.norms()[0] - 1) < 1e-10


@given(st.integers(0, 2**32 - 1))
def test_random_kappa_eigenvalues_tableau_vs_dense(seed):
    rng = np.random.default_rng(seed)
    w, h = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    coords = grid(w, h)
    kap = {i: int(rng.integers(2)) for i in coords}
    tab = verify_stabilizers(cluster_from_coords(coords, kap, "tableau"), coords, kap)
    den = verify_stabilizers(cluster_from_coords(coords, kap, "dense"), coords, kap)
    assert tab.ok and den.ok
    assert all(abs(tab.eigenvalues[a] - den.eigenvalues[a]) < 1e-9 for a in coords)


PAULI_BASES = [MeasBasis.x(), MeasBasis.y(), MeasBasis.z(), MeasBasis.equatorial(-math.pi / 2), MeasBasis.equatorial(math.pi)]


@given(st.integers(0, 2**32 - 1))
def test_dense_and_tableau_agree_on_pauli_sequences(seed):
    """Same forced branch on both engines: same probabilities, same residual stabilizers."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 9))
    coords = {i: (int(x), int(y)) for i, (x, y) in enumerate(rng.permutation([(x, y) for x in range(4) for y in range(3)])[:m])}
    kap = {i: int(rng.integers(2)) for i in coords}
    den = cluster_from_coords(coords, kap, "dense")
    tab = cluster_from_coords(coords, kap, "tableau")
    order = [int(i) for i in rng.permutation(m)[: int(rng.integers(1, m))]]
    for site in order:
        basis = PAULI_BASES[int(rng.integers(len(PAULI_BASES)))]
        bit, random_ = tab.measure(site, basis, rng=rng)
        # dense must admit the tableau branch with probability 1/2 or 1
        ax = den._axis(site)
        before = den.amplitudes.copy()
        den.measure(site, basis, forced=bit)
        if not random_:
            den2 = DenseState(before, den.order + [], den.cap)
            den2.order.insert(ax - 1, site)
            with pytest.raises(ZeroProbabilityError):
                den2.measure(site, basis, forced=1 - bit)
    live = sorted(den.order)
    # every product of Z/X/Y strings on up to two live sites agrees
    for a in live:
        for ch in "XYZ":
            e = dense_expectation(den, {a: ch})
            assert abs(e - tab.pauli_eigenvalue({a: ch})) < 1e-9
    for a in live:
        nb = {a: "X"}
        for b in live:
            if abs(coords[a][0] - coords[b][0]) + abs(coords[a][1] - coords[b][1]) == 1:
                nb[b] = "Z"
        assert abs(dense_expectation(den, nb) - tab.pauli_eigenvalue(nb)) < 1e-9


def test_fair_coin_frequencies_match():
    """A random Y outcome on a chain: both engines produce a fair coin."""
    rng = np.random.default_rng(3)
    n = 10_000
    tab_ones = 0
    for _ in range(n):
        t = cluster_from_coords(chain(3), {}, "tableau")
        tab_ones += t.measure(1, MeasBasis.y(), rng=rng)[0]
    d = DenseState.empty(batch=n)
    d.add_sites([0, 1, 2])
    d.cz(0, 1)
    d.cz(1, 2)
    dense_ones = int(d.measure(1, MeasBasis.y(), uniforms=rng.random(n)).sum())
    # chi-square with one degree of freedom, 99.9% quantile 10.83
    for ones in (tab_ones, dense_ones):
        chi2 = (ones - n / 2) ** 2 / (n / 2) * 2
        assert chi2 < 10.83


def test_z_on_neighbors_then_x_is_deterministic():
    coords = chain(3)
    t = cluster_from_coords(coords, {1: 1}, "tableau")
    t.measure(0, MeasBasis.z(), forced=0)
    t.measure(2, MeasBasis.z(), forced=1)
    bit, random_ = t.measure(1, MeasBasis.x())
    assert not random_ and bit == (1 + 1) % 2


def test_y_labeling():
    s = DenseState.empty()
    s.add_sites([0], np.array([1, 1j]) / math.sqrt(2))
    assert int(s.measure(0, MeasBasis.y(), uniforms=np.array([0.9999]))[0]) == 0


def test_network_unitary_examples():
    one = LogicalCircuit(1)
    v = np.array([0.6, 0.8j])
    assert np.allclose(apply_network_unitary(v, one), v)
    h = LogicalCircuit(1, (Hadamard(0),))
    assert np.allclose(apply_network_unitary(np.array([1, 0]), h), np.array([1, 1]) / math.sqrt(2))
    rx = LogicalCircuit(1, (RotX(0, math.pi),))
    assert np.allclose(apply_network_unitary(np.array([1, 0]), rx), np.array([0, -1j]))
    with pytest.raises(CapacityError):
        apply_network_unitary(np.ones(2**3), LogicalCircuit(3), cap=2)
