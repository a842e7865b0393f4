"""Running a compiled program: measurement rounds and the information flow vector.

The round structure is executed literally by :func:`evaluate_scheme`:

* round 0 measures every fixed-basis site, then ``eta'_j`` modifies the
  algorithm angles and ``I(0) = I_init + sum s_k F_k``;
* round ``t`` measures ``Q_t`` at ``phi'_j (-1)^{(I(t-1), F_j)}`` and adds the
  new outcomes to ``I``;
* the readout is the x-part of the final ``I``.

Physically, measurements on distinct sites commute, so the quantum engines
may visit the sites in any order in which every outcome an angle depends on
is already known.  :func:`full_run` uses such an order to keep only a thin
frontier of the cluster alive, then replays the literal round scheme on the
outcome log and checks that every executed angle is the one the scheme
prescribes.

Randomness: shot ``i`` of a run with seed ``seed`` draws one uniform per site
from ``PCG64(SeedSequence(seed, spawn_key=(i,)))``, indexed by site id, so
outcomes do not depend on batching, threading or visiting order.
"""

from __future__ import annotations

import heapq
from collections.abc import Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .compiler import CompiledProgram
from .f2_pauli import PauliVector, bits_to_hex, symplectic_product
from .quantum_backend import (
    DEFAULT_DENSE_CAP,
    CapacityError,
    DenseState,
    MeasBasis,
    StabilizerTableau,
    ZeroProbabilityError,
    measure,
)

__all__ = [
    "InfoFlowVector",
    "RunRecord",
    "RunResult",
    "SchemeTrace",
    "BackendError",
    "run_round_zero",
    "run_round",
    "readout",
    "full_run",
    "evaluate_scheme",
    "shot_uniforms",
    "execution_plan",
]


class BackendError(ValueError):
    """The chosen engine cannot run this program."""


@dataclass(frozen=True)
class InfoFlowVector:
    value: PauliVector
    round: int  # -1 is I_init

    def __post_init__(self) -> None:
        if self.round < -1:
            raise ValueError("round must be >= -1")


@dataclass(frozen=True)
class RunRecord:
    seed: int
    shot: int
    outcomes: tuple[int, ...]  # indexed by site id
    modified_angles: Mapping[int, float]
    measured_angles: Mapping[int, float]
    i_trace: tuple[InfoFlowVector, ...]
    readout: tuple[int, ...]


# ------------------------------------------------------- literal round scheme


def run_round_zero(
    program: CompiledProgram,
    state: DenseState | StabilizerTableau,
    rng: np.random.Generator | None = None,
    forced: Mapping[int, int] | None = None,
) -> tuple[InfoFlowVector, dict[int, float], dict[int, int]]:
    """Measure Q_0 on a fully prepared cluster; returns ``(I(0), phi', outcomes)``."""
    forced = forced or {}
    pat = program.pattern
    outcomes: dict[int, int] = {}
    for k in program.schedule.rounds[0]:
        bit, _ = measure(state, k, pat.site(k).basis, rng, forced.get(k))
        outcomes[k] = bit
    eta_p = {j: 0 for j in program.algorithm_angles}
    value = program.i_init
    for k, s in outcomes.items():
        if s:
            for j in program.cones.bc[k]:
                eta_p[j] ^= 1
            value = value + program.images.site[k]
    modified = {j: (-1) ** eta_p[j] * a for j, a in program.algorithm_angles.items()}
    return InfoFlowVector(value, 0), modified, outcomes


def run_round(
    program: CompiledProgram,
    state: DenseState | StabilizerTableau,
    t: int,
    i_prev: InfoFlowVector,
    modified: Mapping[int, float],
    rng: np.random.Generator | None = None,
    forced: Mapping[int, int] | None = None,
) -> tuple[dict[int, int], InfoFlowVector, dict[int, float]]:
    """Measure Q_t; returns ``(outcomes, I(t), measured angles)``."""
    if not 1 <= t <= program.schedule.t_max:
        raise IndexError(f"no round {t}")
    if i_prev.round != t - 1:
        raise ValueError("information flow vector is from the wrong round")
    forced = forced or {}
    outcomes: dict[int, int] = {}
    angles: dict[int, float] = {}
    for j in program.schedule.rounds[t]:
        a = modified[j] * (-1) ** symplectic_product(i_prev.value, program.images.site[j])
        angles[j] = a
        bit, _ = measure(state, j, MeasBasis.equatorial(a), rng, forced.get(j))
        outcomes[j] = bit
    value = i_prev.value
    for j, s in outcomes.items():
        if s:
            value = value + program.images.site[j]
    return outcomes, InfoFlowVector(value, t), angles


def readout(i_final: InfoFlowVector | PauliVector) -> tuple[int, ...]:
    """The computation result: the x-part of the final information flow vector."""
    v = i_final.value if isinstance(i_final, InfoFlowVector) else i_final
    return v.x_bits()


# ------------------------------------------------------ vectorized replay


@dataclass
class _Tables:
    adaptive: list[int]
    col: dict[int, int]
    F: np.ndarray  # (m, 2n) stacked images, x then z
    Fsym: np.ndarray  # (m, 2n) images with halves swapped: <I, F_j>_S = I @ Fsym_j
    i_init: np.ndarray  # (2n,)
    bc0: np.ndarray  # (|Q0|, |A|): j in bc(k)
    algo: np.ndarray  # (|A|,)


def _vec(v: PauliVector) -> np.ndarray:
    return np.array(v.x_bits() + v.z_bits(), dtype=np.uint8)


def _tables(program: CompiledProgram) -> _Tables:
    cached = getattr(program, "_runtime_tables", None)
    if cached is not None:
        return cached
    pat = program.pattern
    n = pat.n_logical
    adaptive = sorted(program.algorithm_angles)
    col = {j: i for i, j in enumerate(adaptive)}
    m = len(pat)
    F = np.zeros((m, 2 * n), dtype=np.uint8)
    for k, v in program.images.site.items():
        F[k] = _vec(v)
    Fsym = np.concatenate([F[:, n:], F[:, :n]], axis=1)
    q0 = program.schedule.rounds[0] if program.schedule.rounds else ()
    bc0 = np.zeros((len(q0), len(adaptive)), dtype=np.uint8)
    for r, k in enumerate(q0):
        for j in program.cones.bc[k]:
            bc0[r, col[j]] = 1
    algo = np.array([program.algorithm_angles[j] for j in adaptive], dtype=float)
    t = _Tables(adaptive, col, F, Fsym, _vec(program.i_init), bc0, algo)
    object.__setattr__(program, "_runtime_tables", t)
    return t


def _mod2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact for the sizes used here (float32 holds integers below 2**24)
    return (np.rint(a.astype(np.float32) @ b.astype(np.float32)).astype(np.int64) & 1).astype(np.uint8)


@dataclass(frozen=True)
class SchemeTrace:
    eta_prime: np.ndarray  # (S, |A|)
    flips: np.ndarray  # (S, |A|): (I(t-1), F_j)_S at j's round
    i_trace: np.ndarray  # (S, rounds + 1, 2n); entry 0 is I_init
    readout: np.ndarray  # (S, n)


def evaluate_scheme(program: CompiledProgram, outcomes: np.ndarray) -> SchemeTrace:
    """Replay the round scheme on outcome bits ``(shots, sites)``."""
    tb = _tables(program)
    S = outcomes.shape[0]
    n = program.n
    rounds = program.schedule.rounds
    s = outcomes.astype(np.uint8)
    trace = np.zeros((S, len(rounds) + 1, 2 * n), dtype=np.uint8)
    trace[:, 0] = tb.i_init
    eta = np.zeros((S, len(tb.adaptive)), dtype=np.uint8)
    flips = np.zeros_like(eta)
    cur = np.broadcast_to(tb.i_init, (S, 2 * n)).copy()
    for t, q in enumerate(rounds):
        idx = list(q)
        if t == 0:
            eta = _mod2(s[:, idx], tb.bc0)
        else:
            cols = [tb.col[j] for j in idx]
            flips[:, cols] = _mod2(cur, tb.Fsym[idx].T)
        cur = cur ^ _mod2(s[:, idx], tb.F[idx])
        trace[:, t + 1] = cur
    return SchemeTrace(eta, flips, trace, cur[:, :n].copy())


# ------------------------------------------------------------ fast engines


def shot_uniforms(seed: int, shot: int, m: int) -> np.ndarray:
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(shot,))))
    return gen.random(m)


@dataclass(frozen=True)
class _Plan:
    order: tuple[int, ...]
    deps: Mapping[int, tuple[int, ...]]  # adaptive site -> outcomes its sign depends on
    const: Mapping[int, int]  # adaptive site -> sign bit from I_init
    max_live: int


def execution_plan(program: CompiledProgram) -> _Plan:
    """A visiting order that respects every angle dependency, with a thin frontier.

    The dependency set of ``j`` is read off the round scheme: a round-0 site
    ``k`` enters through ``eta'`` (if ``j`` is in ``bc(k)``) and through
    ``I`` (if ``F_k`` anticommutes with ``F_j``); a site of an earlier round
    enters through ``I`` only.
    """
    cached = getattr(program, "_plan", None)
    if cached is not None:
        return cached
    pat = program.pattern
    rounds = program.schedule.rounds
    rnd = program.schedule.round_of()
    img = program.images.site
    deps: dict[int, tuple[int, ...]] = {}
    const: dict[int, int] = {}
    earlier: list[int] = []
    for t, q in enumerate(rounds):
        if t > 0:
            for j in q:
                fj = img[j]
                d = []
                for k in earlier:
                    c = symplectic_product(img[k], fj)
                    if rnd[k] == 0 and j in program.cones.bc[k]:
                        c ^= 1
                    if c:
                        d.append(k)
                deps[j] = tuple(d)
                const[j] = symplectic_product(program.i_init, fj)
        earlier.extend(q)
    succ: dict[int, list[int]] = {s.id: [] for s in pat.sites}
    indeg = {s.id: 0 for s in pat.sites}
    for j, d in deps.items():
        for k in d:
            succ[k].append(j)
            indeg[j] += 1
    heap = [(pat.site(k).x, pat.site(k).y, k) for k, v in indeg.items() if v == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, _, k = heapq.heappop(heap)
        order.append(k)
        for j in succ[k]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, (pat.site(j).x, pat.site(j).y, j))
    if len(order) != len(pat):
        raise RuntimeError("angle dependencies are cyclic")
    # frontier size along this order
    live: set[int] = set()
    done: set[int] = set()
    max_live = 0
    for k in order:
        for s in [k, *pat.neighbors(k)]:
            if s not in live and s not in done:
                live.add(s)
        max_live = max(max_live, len(live))
        live.discard(k)
        done.add(k)
    plan = _Plan(tuple(order), deps, const, max_live)
    object.__setattr__(program, "_plan", plan)
    return plan


def _run_dense(program: CompiledProgram, U: np.ndarray, forced: Mapping[int, int], cap: int) -> tuple[np.ndarray, np.ndarray]:
    """Outcomes ``(S, m)`` and executed sign bits ``(S, |A|)`` for one batch."""
    pat = program.pattern
    tb = _tables(program)
    plan = execution_plan(program)
    S, m = U.shape
    st = DenseState.empty(S, cap)
    out = np.zeros((S, m), dtype=np.uint8)
    signs = np.zeros((S, len(tb.adaptive)), dtype=np.uint8)
    seen: set[int] = set()
    for k in plan.order:
        for s in [k, *pat.neighbors(k)]:
            if s in seen:
                continue
            st.add_sites([s])
            seen.add(s)
            for nb in pat.neighbors(s):
                if nb in st and nb != s:
                    st.cz(s, nb)
            if pat.site(s).kappa:
                st.z(s)
        f = forced.get(k)
        if k in plan.deps:
            bit = np.full(S, plan.const[k], dtype=np.uint8)
            for d in plan.deps[k]:
                bit ^= out[:, d]
            signs[:, tb.col[k]] = bit
            angles = program.algorithm_angles[k] * np.where(bit == 1, -1.0, 1.0)
            out[:, k] = st.measure(k, angles=angles, uniforms=U[:, k], forced=f)
        else:
            out[:, k] = st.measure(k, basis=pat.site(k).basis, uniforms=U[:, k], forced=f)
    return out, signs


@dataclass
class _Frames:
    """Reference outcomes plus, per random outcome, the sites whose outcome it flips."""

    ref: np.ndarray  # (m,)
    random_sites: list[int]
    flips: list[np.ndarray]  # flips[r]: site ids toggled by random outcome r


def _tableau_frames(program: CompiledProgram) -> _Frames:
    cached = getattr(program, "_frames", None)
    if cached is not None:
        return cached
    pat = program.pattern
    plan = execution_plan(program)
    m = len(pat)
    tab = StabilizerTableau()
    ref = np.zeros(m, dtype=np.uint8)
    # frames are sparse Paulis on live sites: frame[r][site] = (x, z);
    # touching[site] lists the frames with support there
    frame: list[dict[int, list[bool]]] = []
    touching: dict[int, set[int]] = {}
    flips: list[list[int]] = []
    random_sites: list[int] = []
    done: set[int] = set()

    def toggle_z(r: int, site: int) -> None:
        xz = frame[r].setdefault(site, [False, False])
        xz[1] = not xz[1]
        if xz == [False, False]:
            del frame[r][site]
            touching[site].discard(r)
        else:
            touching.setdefault(site, set()).add(r)

    for k in plan.order:
        for s in [k, *pat.neighbors(k)]:
            if s in tab or s in done:
                continue
            tab.add_site(s)
            for nb in pat.neighbors(s):
                if nb in tab and nb != s:
                    tab.cz(s, nb)
                    # conjugate the frames by the same CZ; s is fresh so only nb can carry X
                    for r in [r for r in touching.get(nb, ()) if frame[r][nb][0]]:
                        toggle_z(r, s)
            if pat.site(s).kappa:
                tab.zflip(s)
        axis = pat.site(k).basis.pauli()[0]
        for r in touching.pop(k, ()):
            bx, bz = frame[r].pop(k)
            if {"X": bz, "Z": bx, "Y": bx ^ bz}[axis]:
                flips[r].append(k)
        bit, rnd = tab.measure(k, pat.site(k).basis)
        ref[k] = bit
        done.add(k)
        if rnd:
            r = len(frame)
            frame.append({site: [bx, bz] for site, (bx, bz) in (tab.last_flip or {}).items()})
            for site in frame[r]:
                touching.setdefault(site, set()).add(r)
            flips.append([k])
            random_sites.append(k)
    frames = _Frames(ref, random_sites, [np.array(f, dtype=np.int64) for f in flips])
    object.__setattr__(program, "_frames", frames)
    return frames


def _run_tableau(program: CompiledProgram, U: np.ndarray, forced: Mapping[int, int]) -> np.ndarray:
    fr = _tableau_frames(program)
    S = U.shape[0]
    out = np.broadcast_to(fr.ref, (S, len(fr.ref))).copy()
    if not forced:
        for k, sites in zip(fr.random_sites, fr.flips):
            r = (U[:, k] >= 0.5).astype(np.uint8)
            out[:, sites] ^= r[:, None]
        return out
    order = execution_plan(program).order
    rindex = {k: i for i, k in enumerate(fr.random_sites)}
    for k in order:
        if k in rindex:
            if k in forced:
                r = out[:, k] ^ np.uint8(forced[k])
            else:
                r = (U[:, k] >= 0.5).astype(np.uint8)
            out[:, fr.flips[rindex[k]]] ^= r[:, None]
        elif k in forced and np.any(out[:, k] != forced[k]):
            raise ZeroProbabilityError(f"forced outcome on site {k} has probability 0")
    return out


# ------------------------------------------------------------------ driver


class RunResult(Sequence[RunRecord]):
    """All shots of a run; records are materialized on access."""

    def __init__(self, program: CompiledProgram, seed: int, backend: str, outcomes: np.ndarray, trace: SchemeTrace) -> None:
        self.program = program
        self.seed = seed
        self.backend = backend
        self.outcomes = outcomes
        self.trace = trace
        tb = _tables(program)
        self.adaptive = tuple(tb.adaptive)
        sign = np.where(trace.eta_prime == 1, -1.0, 1.0)
        self.modified_angles = tb.algo[None, :] * sign
        self.measured_angles = self.modified_angles * np.where(trace.flips == 1, -1.0, 1.0)
        self.readouts = trace.readout

    def __len__(self) -> int:
        return self.outcomes.shape[0]

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        n = self.program.n
        rounds = [
            InfoFlowVector(PauliVector(n, _pack(v[:n]), _pack(v[n:])), t - 1) for t, v in enumerate(self.trace.i_trace[i])
        ]
        return RunRecord(
            self.seed,
            i,
            tuple(int(b) for b in self.outcomes[i]),
            {j: float(self.modified_angles[i, c]) for c, j in enumerate(self.adaptive)},
            {j: float(self.measured_angles[i, c]) for c, j in enumerate(self.adaptive)},
            tuple(rounds),
            tuple(int(b) for b in self.readouts[i]),
        )

    def __iter__(self) -> Iterator[RunRecord]:
        for i in range(len(self)):
            yield self[i]

    def histogram(self) -> dict[str, int]:
        """Readout counts keyed by bit strings (wire 0 first)."""
        keys, counts = np.unique(self.readouts, axis=0, return_counts=True)
        return {"".join(str(int(b)) for b in k): int(c) for k, c in zip(keys, counts)}

    def to_json(self, per_shot: bool = True) -> dict:
        out: dict = {
            "seed": self.seed,
            "shots": len(self),
            "backend": self.backend,
            "aggregate": {"readout_histogram": self.histogram()},
        }
        if per_shot:
            n = self.program.n
            shots = []
            for i in range(len(self)):
                shots.append(
                    {
                        "outcomes": bits_to_hex(_pack(self.outcomes[i])),
                        "readout": [int(b) for b in self.readouts[i]],
                        "i_trace": [
                            {"x": bits_to_hex(_pack(v[:n])), "z": bits_to_hex(_pack(v[n:]))} for v in self.trace.i_trace[i]
                        ],
                        "measured_angles": {str(j): float(self.measured_angles[i, c]) for c, j in enumerate(self.adaptive)},
                    }
                )
            out["per_shot"] = shots
        return out


def _pack(bits: np.ndarray) -> int:
    v = 0
    for i in np.nonzero(bits)[0]:
        v |= 1 << int(i)
    return v


def _choose_backend(program: CompiledProgram, backend: str) -> str:
    if backend not in ("auto", "dense", "tableau"):
        raise BackendError(f"unknown backend {backend!r}")
    if backend == "auto":
        return "tableau" if program.is_clifford() else "dense"
    if backend == "tableau" and not program.is_clifford():
        raise BackendError("tableau backend needs a program without adaptive sites")
    return backend


def full_run(
    program: CompiledProgram,
    shots: int,
    seed: int = 0,
    backend: str = "auto",
    forced: Mapping[int, int] | None = None,
    cap: int = DEFAULT_DENSE_CAP,
    threads: int = 1,
    batch_amplitudes: int = 1 << 22,
) -> RunResult:
    """Run ``shots`` independent shots and replay the round scheme on each."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    forced = dict(forced or {})
    engine = _choose_backend(program, backend)
    m = len(program.pattern)
    plan = execution_plan(program)
    U = np.stack([shot_uniforms(seed, i, m) for i in range(shots)])
    if engine == "dense":
        if plan.max_live > cap:
            raise CapacityError(f"frontier of {plan.max_live} sites exceeds dense capacity {cap}")
        step = max(1, batch_amplitudes >> plan.max_live)
        chunks = [U[a : a + step] for a in range(0, shots, step)]
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(threads) as ex:
                parts = list(ex.map(lambda u: _run_dense(program, u, forced, cap), chunks))
        else:
            parts = [_run_dense(program, u, forced, cap) for u in chunks]
        outcomes = np.concatenate([p[0] for p in parts])
        executed = np.concatenate([p[1] for p in parts])
    else:
        outcomes = _run_tableau(program, U, forced)
        executed = np.zeros((shots, 0), dtype=np.uint8)
    trace = evaluate_scheme(program, outcomes)
    prescribed = trace.eta_prime ^ trace.flips
    if engine == "dense" and not np.array_equal(prescribed, executed):
        raise RuntimeError("executed measurement angles differ from the round scheme")
    return RunResult(program, seed, engine, outcomes, trace)
