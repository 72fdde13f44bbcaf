"""Experiment orchestration: learning curves, counterexample studies,
seeded Monte Carlo with Wilson intervals, and CSV emission.

Every sampled quantity is a pure function of (spec, master seed), so
repeated invocations produce byte-identical outputs regardless of how
many workers execute the trials.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .engine import (
    CODE_BOTH,
    DEFAULT_T_CAP,
    PREFER_ZERO,
    TieBreak,
    _cell_codes,
    parse_tiebreak,
    run_exact,
)
from .errors import NTooSmall, StateBudgetExceeded, ValidationError
from .graphs import FAMILIES, SocialGraph, chain, cycle, gnp_connected, read_graph_file, royal_family
from .local import BallSimulator, sample_world
from .seeding import split
from .signals import (
    SignalModel,
    as_fraction,
    make_binary_model,
    make_quantile_model,
    model_from_config,
    model_to_config,
)

WILSON_Z = 1.96


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    if not 0 <= successes <= trials:
        raise ValidationError(f"successes {successes} outside 0..{trials}")
    phat = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    spread = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return (max(0.0, center - spread), min(1.0, center + spread))


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully reproducible description of one learning-curve experiment."""

    family: str
    sizes: tuple[int, ...]
    model: dict
    tiebreak: str = "prefer_zero"
    engine: str = "exact"
    horizon: int | None = None
    trials: int = 0
    master_seed: int = 0
    gnp_p: str | None = None
    graph_file: str | None = None

    def __post_init__(self):
        if self.engine not in ("exact", "local"):
            raise ValidationError(f"engine must be 'exact' or 'local', got {self.engine!r}")
        if self.engine == "local" and not self.horizon:
            raise ValidationError("local engine requires a horizon")
        if self.family not in (*FAMILIES, "gnp", "file"):
            raise ValidationError(f"unknown family {self.family!r}")

    def to_json(self) -> str:
        payload = {k: v for k, v in self.__dict__.items() if v is not None}
        payload["sizes"] = list(self.sizes)
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        data = json.loads(text)
        data["sizes"] = tuple(data["sizes"])
        return cls(**data)

    def signal_model(self) -> SignalModel:
        return model_from_config(self.model)

    def tie(self) -> TieBreak:
        return parse_tiebreak(self.tiebreak)

    def graph_for(self, n: int) -> SocialGraph:
        if self.family == "file":
            if not self.graph_file:
                raise ValidationError("family 'file' requires graph_file")
            return read_graph_file(self.graph_file)
        if self.family == "gnp":
            if self.gnp_p is None:
                raise ValidationError("family 'gnp' requires gnp_p")
            return gnp_connected(n, as_fraction(self.gnp_p), split(self.master_seed, n, 97))
        return FAMILIES[self.family](n)


@dataclass
class EstimateRow:
    n: int
    engine: str
    successes: int
    trials: int
    estimate: float
    wilson_lo: float
    wilson_hi: float
    exact: Fraction | None = None
    seconds: float = 0.0
    note: str = ""

    def __post_init__(self):
        assert self.wilson_lo <= self.estimate + 1e-12
        assert self.estimate <= self.wilson_hi + 1e-12


def _exact_learning(graph: SocialGraph, model: SignalModel, tiebreak: TieBreak,
                    t_cap: int = DEFAULT_T_CAP, budget: int | None = None) -> Fraction:
    run = run_exact(graph, model, tiebreak, t_cap=t_cap, budget=budget, keep_history=False)
    p_learn, _, _ = run.learning_and_agreement()
    return p_learn


def _local_trial(sim: BallSimulator, graph: SocialGraph, model: SignalModel,
                 seed: int) -> bool:
    world = sample_world(model, graph, seed)
    result = sim.run(world)
    t = sim.horizon
    return all(result.actions[u][t - 1] == world.state for u in range(graph.n))


def _trial_block(spec_json: str, n: int, start: int, stop: int) -> int:
    spec = ExperimentSpec.from_json(spec_json)
    model = spec.signal_model()
    graph = spec.graph_for(n)
    sim = BallSimulator(graph, model, spec.horizon, spec.tie())
    successes = 0
    for trial in range(start, stop):
        if _local_trial(sim, graph, model, split(spec.master_seed, n, trial)):
            successes += 1
    return successes


def learning_curve(spec: ExperimentSpec, workers: int = 1,
                   budget: int | None = None) -> list[EstimateRow]:
    """Estimate or exactly compute the all-agents-learn probability per size.

    The exact engine ignores `trials` and emits a degenerate interval;
    the local engine counts worlds in which every agent's action at the
    horizon equals the state, with per-trial seeds split from
    (master_seed, n, trial).
    """
    rows: list[EstimateRow] = []
    for n in spec.sizes:
        started = time.monotonic()
        if spec.engine == "exact":
            try:
                exact = _exact_learning(spec.graph_for(n), spec.signal_model(), spec.tie(),
                                        budget=budget)
            except (StateBudgetExceeded, NTooSmall) as err:
                rows.append(EstimateRow(n, "exact", 0, 0, 0.0, 0.0, 1.0,
                                        note=f"skipped: {err}"))
                continue
            est = float(exact)
            rows.append(EstimateRow(n, "exact", 0, 0, est, est, est, exact,
                                    time.monotonic() - started))
            continue
        trials = spec.trials
        if workers > 1 and trials >= 2 * workers:
            bounds = [trials * k // workers for k in range(workers + 1)]
            args = [(spec.to_json(), n, bounds[k], bounds[k + 1]) for k in range(workers)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                successes = sum(pool.map(_block_star, args))
        else:
            successes = _trial_block(spec.to_json(), n, 0, trials)
        lo, hi = wilson_interval(successes, trials)
        est = successes / trials if trials else 0.0
        rows.append(EstimateRow(n, "local", successes, trials, est, lo, hi,
                                seconds=time.monotonic() - started))
    return rows


def _block_star(args) -> int:
    return _trial_block(*args)


# -- counterexample experiments ---------------------------------------------------

@dataclass
class RoyalFamilyReport:
    rows: list[EstimateRow]
    analytic_floor: float
    weak_signal_warning: bool
    exact_event_verified: bool
    exact_event_size: int


def royal_family_experiment(sizes, q, trials: int, master_seed: int,
                            horizon: int = 3, workers: int = 1) -> RoyalFamilyReport:
    """Non-learning frequency on the royal-family graph.

    Also verifies exhaustively, on the smallest requested size that fits
    the exact engine, that whenever all five royals draw the wrong
    signal every agent's limit action set is the wrong singleton.
    """
    q = as_fraction(q)
    model = make_binary_model(q)
    floor = float((1 - q) ** 5)
    warn = trials > 0 and floor < 10 / trials
    exact_n = 8
    verified = _royal_event_check(exact_n, model)
    rows: list[EstimateRow] = []
    for n in sizes:
        if n < 7:
            raise NTooSmall(f"royal_family needs n >= 7, got {n}")
        started = time.monotonic()
        spec = ExperimentSpec(
            family="royal_family", sizes=(n,), model=model_to_config(model),
            tiebreak="prefer_zero", engine="local", horizon=horizon,
            trials=trials, master_seed=master_seed,
        )
        if workers > 1 and trials >= 2 * workers:
            bounds = [trials * k // workers for k in range(workers + 1)]
            args = [(spec.to_json(), n, bounds[k], bounds[k + 1]) for k in range(workers)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                learned = sum(pool.map(_block_star, args))
        else:
            learned = _trial_block(spec.to_json(), n, 0, trials)
        failures = trials - learned
        lo, hi = wilson_interval(failures, trials)
        rows.append(EstimateRow(n, "local", failures, trials,
                                failures / trials if trials else 0.0, lo, hi,
                                seconds=time.monotonic() - started,
                                note="non-learning frequency at horizon"))
    return RoyalFamilyReport(rows, floor, warn, verified, exact_n)


def _royal_event_check(n: int, model: SignalModel) -> bool:
    graph = royal_family(n)
    run = run_exact(graph, model, PREFER_ZERO)
    codes = run.limit_codes()
    for state in (0, 1):
        wrong = 1 - state
        for i in range(run.space.count):
            sig = run.space.signals(i)
            if all(sig[r] == wrong for r in range(5)):
                if any(int(codes[u][i]) != wrong for u in range(graph.n)):
                    return False
    return True


@dataclass
class ChainReport:
    n: int
    non_learning: Fraction
    stuck_claim_holds: bool
    fixpoint_time: int | None


def atomic_chain_experiment(sizes, master_seed: int = 0) -> list[ChainReport]:
    """Undirected chain with binary 2/3 signals and own-initial ties.

    Checks, profile by profile, that an agent sharing its signal with a
    neighbor never moves (its action equals its signal in every round),
    and reports the exact non-learning probability.
    """
    model = make_binary_model(Fraction(2, 3))
    tie = parse_tiebreak("own_initial")
    reports: list[ChainReport] = []
    for n in sizes:
        graph = chain(n)
        run = run_exact(graph, model, tie)
        stuck = True
        for i in range(run.space.count):
            sig = run.space.signals(i)
            for u in range(n):
                if any(sig[v] == sig[u] for v in graph.adjacency[u]):
                    if any(run.action(i, u, t) != sig[u]
                           for t in range(1, run.last_round + 1)):
                        stuck = False
        p_learn, _, _ = run.learning_and_agreement()
        reports.append(ChainReport(n, 1 - p_learn, stuck, run.fixpoint_time))
    return reports


@dataclass
class AgreementReport:
    m: int
    p_disagree: Fraction
    every_disagreement_has_tied_agent: bool
    counterexample: int | None


def agreement_refinement_experiment(graph: SocialGraph, m_list,
                                    tiebreak: TieBreak = PREFER_ZERO,
                                    budget: int | None = None) -> list[AgreementReport]:
    """Disagreement mass as signal resolution m refines.

    Verifies that every profile on which limit action sets differ
    contains at least one agent whose limit belief is exactly 1/2.
    """
    reports = []
    for m in m_list:
        model = make_quantile_model(m)
        run = run_exact(graph, model, tiebreak, budget=budget)
        _, _, p_disagree = run.learning_and_agreement()
        codes = run.limit_codes()
        stacked = np.stack(codes)
        disagree = np.any(stacked != stacked[0], axis=0)
        has_tie = np.any(stacked == CODE_BOTH, axis=0)
        bad = disagree & ~has_tie
        counterexample = int(np.nonzero(bad)[0][0]) if bad.any() else None
        reports.append(AgreementReport(m, p_disagree, counterexample is None, counterexample))
    return reports


# -- exact learning on cycles past the naive enumeration limit ----------------------

@dataclass
class CyclePoint:
    n: int
    p_learn: Fraction | None
    method: str
    certified: bool
    note: str = ""


def _path_window_codes(model: SignalModel, radius: int, tiebreak: TieBreak,
                       budget: int) -> np.ndarray:
    """Limit-set codes of the center of a (2*radius+1)-path at round `radius`,
    one entry per joint signal assignment of the window."""
    g = chain(2 * radius + 1)
    run = run_exact(g, model, tiebreak, t_cap=radius, budget=budget, keep_history=False)
    center = radius
    rnd = run._core.final[center]
    return _cell_codes(rnd.s0, rnd.s1, rnd.n_cells)[rnd.cells]


def _certified_window_radius(model: SignalModel, tiebreak: TieBreak,
                             profile_limit: int) -> tuple[int | None, int, str]:
    """Largest refinement round of a path center, certified by observing a
    non-refining later round while the path ball is still exact.

    Returns (tau or None, last radius probed, note).  Certification
    requires a path of 2*(tau+1)+1 vertices, which caps how strong a
    statement the available budget can make.
    """
    best_note = ""
    radius = 1
    while True:
        radius += 1
        size = 2 * radius + 1
        if model.m ** size > profile_limit:
            return None, radius - 1, (
                f"center still refining at round {radius - 1}; certifying needs a "
                f"{size}-vertex path with {model.m}^{size} profiles > limit {profile_limit}"
            )
        g = chain(size)
        run = run_exact(g, model, tiebreak, t_cap=radius,
                        budget=model.m ** size * size * radius, keep_history=False)
        counts = [run._core.cell_counts[t - 1][radius] for t in range(1, run.last_round + 1)]
        refined = [t for t in range(2, len(counts) + 1) if counts[t - 1] > counts[t - 2]]
        tau = max(refined) if refined else 1
        if tau + 1 <= min(radius, len(counts)):
            return tau, radius, best_note
        best_note = f"refinement observed through round {tau} at path radius {radius}"


def _reverse_digit_table(m: int, width: int) -> np.ndarray:
    """index permutation mapping most-significant-first digit order to the
    engine's least-significant-first profile indexing."""
    idx = np.arange(m ** width, dtype=np.int64)
    out = np.zeros_like(idx)
    rem = idx.copy()
    for _ in range(width):
        out = out * m + rem % m
        rem //= m
    return out


def _transfer_p_all(model: SignalModel, tau: int, n: int, window_codes: np.ndarray,
                    target_state: int) -> Fraction:
    """P(every agent's window code equals target | state), exact, via the
    trace of the n-step weighted window-transfer operator on the cycle."""
    m = model.m
    width = 2 * tau + 1
    states = m ** (2 * tau)
    if states > 8192:
        raise StateBudgetExceeded(
            f"transfer operator needs {states}x{states} int64 entries; too large"
        )
    num0, num1, den = model.numerators()
    nums = num1 if target_state == 1 else num0
    if den ** n > 1 << 62:
        raise StateBudgetExceeded(f"transfer weights {den}^{n} overflow the int64 path")
    rev = _reverse_digit_table(m, width)
    ok = window_codes[rev] == target_state  # indexed most-significant-first
    mat = np.zeros((states, states), dtype=np.int64)
    z = np.arange(states, dtype=np.int64)
    steps = []
    for d in range(m):
        full = z * m + d
        steps.append((full % states, ok[full]))
    for d in range(m):
        succ, good = steps[d]
        mat[z[good], succ[good]] += nums[d]
    for _ in range(n - 1):
        nxt = np.zeros_like(mat)
        for d in range(m):
            succ, good = steps[d]
            nxt[good] += nums[d] * mat[succ[good]]
        mat = nxt
    trace = int(np.trace(mat))
    return Fraction(trace, den ** n)


def cycle_learning_curve(model: SignalModel, sizes, tiebreak: TieBreak = PREFER_ZERO,
                         naive_profile_limit: int = 20_000_000,
                         path_profile_limit: int = 3_000_000,
                         t_cap: int = 24) -> list[CyclePoint]:
    """Exact P_learn on undirected cycles, switching strategy by size.

    Small cycles are enumerated directly.  Larger ones use the locality
    of the dynamic: when the path-center's partition provably stops
    refining at round tau (certified on a path whose balls are still
    exact one round beyond tau), every agent on a cycle with
    n >= 2*tau + 4 reaches its fixpoint at tau with beliefs given by a
    radius-tau window function, and the joint all-agents event is an
    exact cyclic transfer-operator trace.  Sizes that neither strategy
    covers are reported with p_learn=None rather than approximated.
    """
    tau, probed, note = None, 0, ""
    window: np.ndarray | None = None
    points: list[CyclePoint] = []
    need_window = any(model.m ** n > naive_profile_limit for n in sizes)
    if need_window:
        tau, probed, note = _certified_window_radius(model, tiebreak, path_profile_limit)
        if tau is not None:
            width = 2 * tau + 1
            window = _path_window_codes(model, tau, tiebreak,
                                        budget=model.m ** width * width * max(tau, 1))
    for n in sorted(sizes):
        count = model.m ** n
        if count <= naive_profile_limit:
            graph = cycle(n)
            run = run_exact(graph, model, tiebreak, t_cap=t_cap,
                            budget=count * n * t_cap, keep_history=False)
            p_learn, _, _ = run.learning_and_agreement()
            points.append(CyclePoint(n, p_learn, "enumeration", True))
            continue
        if tau is not None and n >= 2 * tau + 4:
            p0 = _transfer_p_all(model, tau, n, window, 0)
            p1 = _transfer_p_all(model, tau, n, window, 1)
            points.append(CyclePoint(n, (p0 + p1) / 2, f"window-transfer(tau={tau})", True))
            continue
        why = note or (f"n={n} below window validity threshold 2*tau+4={2 * (tau or 0) + 4}"
                       if tau is not None else "no certified window radius")
        points.append(CyclePoint(n, None, "none", False, why))
    return points


# -- CSV ------------------------------------------------------------------------

CURVE_COLUMNS = ("family", "n", "engine", "trials", "successes", "estimate",
                 "wilson_lo", "wilson_hi", "exact", "master_seed")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_curve_csv(path: str, spec: ExperimentSpec, rows: list[EstimateRow]) -> None:
    """Atomic CSV write with the full config echoed in a header comment."""
    lines = [f"# config: {spec.to_json()}"]
    lines.append(",".join(CURVE_COLUMNS))
    for row in rows:
        exact = "" if row.exact is None else f"{row.exact.numerator}/{row.exact.denominator}"
        lines.append(",".join([
            spec.family, str(row.n), row.engine, str(row.trials), str(row.successes),
            _fmt(row.estimate), _fmt(row.wilson_lo), _fmt(row.wilson_hi),
            exact, str(spec.master_seed),
        ]))
    write_atomic(path, "\n".join(lines) + "\n")


def write_atomic(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
