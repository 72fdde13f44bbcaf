"""Exact forward-induction engine over joint signal profiles.

The dynamic is computed by refining, round by round, each agent's
partition of the space of all m^n joint signal assignments: two profiles
sit in the same cell of agent u at round t exactly when they give u the
same own signal and the same observed neighbor action histories.  Cell
weights are exact integer sums (numerators over a common denominator),
so beliefs are exact rationals and comparisons with 1/2 are decidable.

Grouping is vectorized with numpy on int64 keys, which is exact by
construction; weight sums use int64 arrays when the total weight fits
in 62 bits and arbitrary-precision Python integers otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    FixpointNotReached,
    HistoryNotRecorded,
    StateBudgetExceeded,
    TimeOutOfRange,
    ValidationError,
)
from .graphs import SocialGraph
from .seeding import coin_bit
from .signals import SignalModel

DEFAULT_T_CAP = 64
DEFAULT_BUDGET = 1 << 26
_INT64_SAFE = 1 << 61
_BINCOUNT_SAFE = 1 << 53

CODE_ZERO, CODE_ONE, CODE_BOTH = 0, 1, 2
ACTION_SETS = (frozenset({0}), frozenset({1}), frozenset({0, 1}))


def action_set_from_code(code: int) -> frozenset:
    return ACTION_SETS[code]


# -- tie-breaking ----------------------------------------------------------

_TIE_KINDS = ("prefer_zero", "prefer_one", "own_initial", "seeded_coin")


@dataclass(frozen=True)
class TieBreak:
    """Rule applied when a posterior equals exactly 1/2.

    `own_initial` repeats the agent's round-1 action (round-1 ties fall
    back to 0).  `seeded_coin` draws a reproducible bit keyed by
    (seed, agent id, round), so runs stay deterministic.
    """

    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in _TIE_KINDS:
            raise ValidationError(f"unknown tie-break kind {self.kind!r}")
        if (self.kind == "seeded_coin") != (self.seed is not None):
            raise ValidationError("seed is required for seeded_coin and only for it")

    def describe(self) -> str:
        if self.kind == "seeded_coin":
            return f"seeded_coin:{self.seed}"
        return self.kind


PREFER_ZERO = TieBreak("prefer_zero")
PREFER_ONE = TieBreak("prefer_one")
OWN_INITIAL = TieBreak("own_initial")


def seeded_coin(seed: int) -> TieBreak:
    return TieBreak("seeded_coin", seed)


def parse_tiebreak(text: str) -> TieBreak:
    t = text.strip().lower().replace("-", "_")
    if t.startswith("seeded_coin"):
        parts = t.split(":")
        if len(parts) != 2:
            raise ValidationError("seeded_coin needs a seed, e.g. 'seeded-coin:42'")
        return seeded_coin(int(parts[1]))
    return TieBreak(t)


# -- profile space -----------------------------------------------------------

class ProfileSpace:
    """All m^n joint signal assignments with exact per-state weights."""

    def __init__(self, model: SignalModel, n: int):
        if n < 1:
            raise ValidationError(f"need at least one agent, got n={n}")
        self.model = model
        self.n = n
        self.m = model.m
        self.count = self.m ** n
        self.sig_num0, self.sig_num1, self.den = model.numerators()
        self.total = self.den ** n  # sum of profile numerators under either state

    def signals(self, i: int) -> tuple[int, ...]:
        """Support indices per agent for profile i (agent 0 varies fastest)."""
        out = []
        for _ in range(self.n):
            out.append(i % self.m)
            i //= self.m
        return tuple(out)

    def index_of(self, digits) -> int:
        if len(digits) != self.n:
            raise ValidationError(f"profile needs {self.n} signals, got {len(digits)}")
        idx = 0
        for u in reversed(range(self.n)):
            d = digits[u]
            if not 0 <= d < self.m:
                raise ValidationError(f"signal index {d} outside 0..{self.m - 1}")
            idx = idx * self.m + d
        return idx

    def weight_numerators(self, i: int) -> tuple[int, int]:
        w0 = w1 = 1
        for d in self.signals(i):
            w0 *= self.sig_num0[d]
            w1 *= self.sig_num1[d]
        return w0, w1

    def weight0(self, i: int) -> Fraction:
        return Fraction(self.weight_numerators(i)[0], self.total)

    def weight1(self, i: int) -> Fraction:
        return Fraction(self.weight_numerators(i)[1], self.total)


# -- internal helpers ---------------------------------------------------------

def _digit_array(count: int, m: int, u: int) -> np.ndarray:
    idx = np.arange(count, dtype=np.int64)
    return (idx // (m ** u)) % m


def _fold(cells: np.ndarray, digit_arrays: list[np.ndarray], base: int,
          count: int) -> tuple[np.ndarray, int, np.ndarray]:
    """Canonical regrouping by (existing cell, extra digits).

    Returns (new cell ids, cell count, first-occurrence index per cell).
    Keys are packed into int64; when too many digits would overflow, the
    key is re-canonicalized in chunks, which preserves the grouping.
    """
    key = cells.astype(np.int64)
    if digit_arrays:
        room = 1
        while count * base ** (room + 1) <= _INT64_SAFE:
            room += 1
        pending = list(digit_arrays)
        while pending:
            chunk, pending = pending[:room], pending[room:]
            for d in chunk:
                key = key * base + d
            if pending:
                _, key = np.unique(key, return_inverse=True)
    uniq, rep, inv = np.unique(key, return_index=True, return_inverse=True)
    return inv.astype(np.int32), len(uniq), rep


@dataclass
class _Round:
    cells: np.ndarray          # int32 per profile
    n_cells: int
    s0: object                 # per-cell state-0 weight sums (np.int64 or list[int])
    s1: object
    act: np.ndarray            # uint8 per profile
    acc_num: int               # accuracy numerator over 2 * total


class _Weights:
    """Per-profile weight numerators with exact cell aggregation."""

    def __init__(self, space: ProfileSpace):
        self.space = space
        self.fast = space.total <= _INT64_SAFE
        if self.fast:
            w0 = np.ones(space.count, dtype=np.int64)
            w1 = np.ones(space.count, dtype=np.int64)
            n0 = np.asarray(space.sig_num0, dtype=np.int64)
            n1 = np.asarray(space.sig_num1, dtype=np.int64)
            for u in range(space.n):
                d = _digit_array(space.count, space.m, u)
                w0 *= n0[d]
                w1 *= n1[d]
            self.w0, self.w1 = w0, w1
        else:
            w0l, w1l = [], []
            for i in range(space.count):
                a, b = space.weight_numerators(i)
                w0l.append(a)
                w1l.append(b)
            self.w0, self.w1 = w0l, w1l

    def cell_sums(self, cells: np.ndarray, n_cells: int):
        if self.fast:
            if self.space.total <= _BINCOUNT_SAFE:
                s0 = np.bincount(cells, weights=self.w0.astype(np.float64),
                                 minlength=n_cells).astype(np.int64)
                s1 = np.bincount(cells, weights=self.w1.astype(np.float64),
                                 minlength=n_cells).astype(np.int64)
            else:
                s0 = np.zeros(n_cells, dtype=np.int64)
                s1 = np.zeros(n_cells, dtype=np.int64)
                np.add.at(s0, cells, self.w0)
                np.add.at(s1, cells, self.w1)
            return s0, s1
        s0 = [0] * n_cells
        s1 = [0] * n_cells
        for i, c in enumerate(cells.tolist()):
            s0[c] += self.w0[i]
            s1[c] += self.w1[i]
        return s0, s1

    def masked_sums(self, mask: np.ndarray) -> tuple[int, int]:
        if self.fast:
            return int(self.w0[mask].sum()), int(self.w1[mask].sum())
        t0 = t1 = 0
        for i in np.nonzero(mask)[0].tolist():
            t0 += self.w0[i]
            t1 += self.w1[i]
        return t0, t1


def _cell_codes(s0, s1, n_cells: int) -> np.ndarray:
    """Per-cell trichotomy code: 0 below 1/2, 1 above, 2 exactly 1/2."""
    if isinstance(s0, np.ndarray):
        codes = np.full(n_cells, CODE_BOTH, dtype=np.uint8)
        codes[s1 > s0] = CODE_ONE
        codes[s1 < s0] = CODE_ZERO
        return codes
    codes = np.empty(n_cells, dtype=np.uint8)
    for c in range(n_cells):
        if s1[c] > s0[c]:
            codes[c] = CODE_ONE
        elif s1[c] < s0[c]:
            codes[c] = CODE_ZERO
        else:
            codes[c] = CODE_BOTH
    return codes


def _cell_actions(codes: np.ndarray, tiebreak: TieBreak, t: int, coin_id: int,
                  a1_cell: np.ndarray | None) -> np.ndarray:
    act = np.where(codes == CODE_ONE, 1, 0).astype(np.uint8)
    ties = codes == CODE_BOTH
    if ties.any():
        if tiebreak.kind == "prefer_one":
            act[ties] = 1
        elif tiebreak.kind == "own_initial" and a1_cell is not None:
            act[ties] = a1_cell[ties]
        elif tiebreak.kind == "seeded_coin":
            act[ties] = coin_bit(tiebreak.seed, coin_id, t)
        # prefer_zero and round-1 own_initial keep the 0 fill
    return act


class _Core:
    """Forward induction on an explicit adjacency; no connectivity assumptions."""

    def __init__(self, adjacency, space: ProfileSpace, tiebreak: TieBreak,
                 t_cap: int, coin_ids, keep_history: bool, extra_rounds: int):
        if t_cap < 1:
            raise ValidationError(f"t_cap must be >= 1, got {t_cap}")
        self.adjacency = [tuple(a) for a in adjacency]
        self.space = space
        self.tiebreak = tiebreak
        self.t_cap = t_cap
        self.coin_ids = list(coin_ids)
        self.keep_history = keep_history
        self.weights = _Weights(space)
        self.n = space.n
        self.history: list[list[_Round]] | None = [] if keep_history else None
        self.acc_nums: list[list[int]] = []   # [t-1][u]
        self.cell_counts: list[list[int]] = []
        self.fixpoint_time: int | None = None
        self.capped = False
        self.a1: list[np.ndarray] = []
        self._run(extra_rounds)

    def _round_from_cells(self, u: int, t: int, cells: np.ndarray, n_cells: int,
                          rep: np.ndarray | None) -> _Round:
        s0, s1 = self.weights.cell_sums(cells, n_cells)
        codes = _cell_codes(s0, s1, n_cells)
        a1_cell = None
        if t > 1 and self.tiebreak.kind == "own_initial":
            a1_cell = self.a1[u][rep]
        act_cell = _cell_actions(codes, self.tiebreak, t, self.coin_ids[u], a1_cell)
        act = act_cell[cells]
        t0, _ = self.weights.masked_sums(act == 0)
        _, t1 = self.weights.masked_sums(act == 1)
        return _Round(cells, n_cells, s0, s1, act, t0 + t1)

    def _run(self, extra_rounds: int) -> None:
        space = self.space
        current: list[_Round] = []
        for u in range(self.n):
            cells = _digit_array(space.count, space.m, u).astype(np.int32)
            rnd = self._round_from_cells(u, 1, cells, space.m, None)
            current.append(rnd)
            self.a1.append(rnd.act.copy())
        self._record(current)

        remaining_extra = None
        for t in range(2, self.t_cap + 1):
            nxt: list[_Round] = []
            refined = False
            for u in range(self.n):
                prev = current[u]
                digits = [current[v].act for v in self.adjacency[u]]
                cells, n_cells, rep = _fold(prev.cells, digits, 2, space.count)
                if n_cells != prev.n_cells:
                    refined = True
                nxt.append(self._round_from_cells(u, t, cells, n_cells, rep))
            current = nxt
            self._record(current)
            if not refined and self.fixpoint_time is None and self._stable(current):
                self.fixpoint_time = t - 1
                remaining_extra = extra_rounds
            if remaining_extra is not None:
                if remaining_extra == 0:
                    break
                remaining_extra -= 1
        if self.fixpoint_time is None:
            self.capped = True
        self.final = current

    def _stable(self, current: list[_Round]) -> bool:
        """With a seeded coin, tie cells eventually separate from both
        constant-action classes, so an unrefined round is a true fixpoint
        only if splitting by the neighbors' full trichotomy codes refines
        nothing either."""
        if self.tiebreak.kind != "seeded_coin":
            return True
        signs = [
            _cell_codes(r.s0, r.s1, r.n_cells)[r.cells] for r in current
        ]
        for u in range(self.n):
            digits = [signs[v] for v in self.adjacency[u]]
            if not digits:
                continue
            _, n_cells, _ = _fold(current[u].cells, digits, 3, self.space.count)
            if n_cells != current[u].n_cells:
                return False
        return True

    def _record(self, rounds: list[_Round]) -> None:
        if self.history is not None:
            self.history.append(rounds)
        self.acc_nums.append([r.acc_num for r in rounds])
        self.cell_counts.append([r.n_cells for r in rounds])

    @property
    def last_round(self) -> int:
        return len(self.acc_nums)


# -- public run object ---------------------------------------------------------

class DynamicsRun:
    """Results of one exact run: actions, beliefs, partitions, limits."""

    def __init__(self, core: _Core, graph: SocialGraph | None):
        self._core = core
        self.graph = graph
        self.space = core.space
        self.tiebreak = core.tiebreak
        self.n = core.n
        self.fixpoint_time = core.fixpoint_time
        self.capped = core.capped
        self.last_round = core.last_round
        self._limit_codes: list[np.ndarray] | None = None
        self._odds_tables: dict = {}
        self._late_act_cache: dict = {}

    # -- time handling

    def _round(self, u: int, t: int) -> _Round:
        if t < 1:
            raise TimeOutOfRange(f"time {t} < 1")
        if t > self.last_round:
            if self.fixpoint_time is None:
                raise TimeOutOfRange(
                    f"time {t} beyond computed horizon {self.last_round} (no fixpoint; capped run)"
                )
            t = self.last_round
        if self._core.history is None:
            if t != self.last_round:
                raise HistoryNotRecorded(
                    "run was executed with keep_history=False; only the final round is queryable"
                )
            return self._core.final[u]
        return self._core.history[t - 1][u]

    # -- per-profile queries

    def action(self, profile: int, u: int, t: int) -> int:
        if t < 1:
            raise TimeOutOfRange(f"time {t} < 1")
        if t <= self.last_round:
            return int(self._round(u, t).act[profile])
        if self.fixpoint_time is None:
            raise TimeOutOfRange(f"time {t} beyond capped horizon {self.last_round}")
        # beyond the fixpoint partitions and beliefs are frozen; only a
        # seeded coin can make tie actions vary with t
        rnd = self._round(u, self.last_round)
        if self.tiebreak.kind != "seeded_coin":
            return int(rnd.act[profile])
        key = (u, t)
        if key not in self._late_act_cache:
            codes = _cell_codes(rnd.s0, rnd.s1, rnd.n_cells)
            act_cell = _cell_actions(codes, self.tiebreak, t, self._core.coin_ids[u], None)
            self._late_act_cache[key] = act_cell[rnd.cells]
        return int(self._late_act_cache[key][profile])

    def belief(self, profile: int, u: int, t: int) -> Fraction:
        rnd = self._round(u, t)
        c = int(rnd.cells[profile])
        s0, s1 = int(rnd.s0[c]), int(rnd.s1[c])
        return Fraction(s1, s0 + s1)

    def cell_id(self, profile: int, u: int, t: int) -> int:
        return int(self._round(u, t).cells[profile])

    def cell_count(self, u: int, t: int) -> int:
        return self._round(u, t).n_cells

    # -- accuracy

    def accuracy(self, u: int, t: int) -> Fraction:
        if t < 1:
            raise TimeOutOfRange(f"time {t} < 1")
        if t > self.last_round and self.fixpoint_time is None:
            raise TimeOutOfRange(f"time {t} beyond capped horizon {self.last_round}")
        t = min(t, self.last_round)
        return Fraction(self._core.acc_nums[t - 1][u], 2 * self.space.total)

    def limit_accuracy(self) -> tuple[Fraction, list[Fraction]]:
        """Common fixpoint accuracy p and the per-agent values."""
        per_agent = [self.accuracy(u, self.last_round) for u in range(self.n)]
        if self.fixpoint_time is None:
            err = FixpointNotReached(
                f"no fixpoint within t_cap={self._core.t_cap}; per-agent accuracies attached"
            )
            err.per_agent = per_agent
            raise err
        first = per_agent[0]
        if any(p != first for p in per_agent):
            raise AssertionError(f"fixpoint accuracies differ across agents: {per_agent}")
        return first, per_agent

    # -- limits

    def _require_fixpoint(self) -> None:
        if self.fixpoint_time is None:
            raise FixpointNotReached(
                f"run capped at t={self.last_round} without fixpoint; raise t_cap"
            )

    def limit_codes(self) -> list[np.ndarray]:
        """Per agent, per profile: 0, 1, or 2 (= both) for the limit action set."""
        self._require_fixpoint()
        if self._limit_codes is None:
            out = []
            for u in range(self.n):
                rnd = self._round(u, self.last_round)
                out.append(_cell_codes(rnd.s0, rnd.s1, rnd.n_cells)[rnd.cells])
            self._limit_codes = out
        return self._limit_codes

    def limit_action_set(self, profile: int, u: int) -> frozenset:
        return ACTION_SETS[int(self.limit_codes()[u][profile])]

    def limit_belief(self, profile: int, u: int) -> Fraction:
        self._require_fixpoint()
        return self.belief(profile, u, self.last_round)

    def learning_and_agreement(self) -> tuple[Fraction, Fraction, Fraction]:
        """(P_learn, P_agree, P_disagree), exact.

        P_learn is the probability that every agent's limit action set is
        exactly {state}; P_agree that all agents share one limit set.
        """
        codes = self.limit_codes()
        w = self._core.weights
        learn0 = codes[0] == CODE_ZERO
        learn1 = codes[0] == CODE_ONE
        agree = np.ones(self.space.count, dtype=bool)
        for u in range(1, self.n):
            learn0 &= codes[u] == CODE_ZERO
            learn1 &= codes[u] == CODE_ONE
            agree &= codes[u] == codes[0]
        l0, _ = w.masked_sums(learn0)
        _, l1 = w.masked_sums(learn1)
        a0, a1 = w.masked_sums(agree)
        total = self.space.total
        p_learn = Fraction(l0 + l1, 2 * total)
        p_agree = Fraction(a0 + a1, 2 * total)
        return p_learn, p_agree, 1 - p_agree

    # -- limit-set estimation

    def map_limit_estimate(self, u: int, t: int) -> np.ndarray:
        """Per profile: the most probable limit action set given u's round-t
        cell, coded 0/1/2, ties resolved in the order {0} < {1} < {0,1}."""
        codes_u = self.limit_codes()[u]
        rnd = self._round(u, t)
        w = self._core.weights
        best_code = np.zeros(rnd.n_cells, dtype=np.uint8)
        best_mass: list[int] = [0] * rnd.n_cells
        for code in (CODE_ZERO, CODE_ONE, CODE_BOTH):
            mask = codes_u == code
            if w.fast:
                acc = np.zeros(rnd.n_cells, dtype=np.int64)
                np.add.at(acc, rnd.cells[mask], (w.w0 + w.w1)[mask])
                mass = acc.tolist()
            else:
                mass = [0] * rnd.n_cells
                for i in np.nonzero(mask)[0].tolist():
                    mass[int(rnd.cells[i])] += w.w0[i] + w.w1[i]
            for c in range(rnd.n_cells):
                if mass[c] > best_mass[c]:
                    best_mass[c] = mass[c]
                    best_code[c] = code
        return best_code[rnd.cells]

    def map_limit_sets(self, u: int, t: int) -> list[frozenset]:
        return [ACTION_SETS[int(c)] for c in self.map_limit_estimate(u, t)]

    def coin_action(self, u: int, t: int, seed: int) -> np.ndarray:
        """Per profile: the estimator's action; a reproducible bit keyed by
        (seed, agent, round) whenever the estimated limit set is {0, 1}."""
        est = self.map_limit_estimate(u, t)
        out = est.copy()
        both = est == CODE_BOTH
        if both.any():
            out[both] = coin_bit(seed, self._core.coin_ids[u], t)
        return out

    def coin_accuracy(self, u: int, t: int, seed: int) -> Fraction:
        c = self.coin_action(u, t, seed)
        w = self._core.weights
        s0, _ = w.masked_sums(c == 0)
        _, s1 = w.masked_sums(c == 1)
        return Fraction(s0 + s1, 2 * self.space.total)

    # -- odds decomposition

    def _history_tables(self, u: int, t: int):
        """Groupings by own action history and by neighbor action history."""
        if self._core.history is None:
            raise HistoryNotRecorded("odds decomposition needs keep_history=True")
        if t > self.last_round:
            raise TimeOutOfRange(f"time {t} beyond computed horizon {self.last_round}")
        key = (u, t)
        if key in self._odds_tables:
            return self._odds_tables[key]
        count = self.space.count
        own = np.zeros(count, dtype=np.int32)
        nbr = np.zeros(count, dtype=np.int32)
        for past in range(1, t):
            rounds = self._core.history[past - 1]
            own, _, _ = _fold(own, [rounds[u].act], 2, count)
            nbr, _, _ = _fold(nbr, [rounds[v].act for v in self.adjacency(u)], 2, count)
        joint, n_joint, _ = _fold(own, [nbr], int(nbr.max()) + 1 if nbr.max() > 0 else 2, count)
        w = self._core.weights
        own_s0, own_s1 = w.cell_sums(own, int(own.max()) + 1)
        j_s0, j_s1 = w.cell_sums(joint, n_joint)
        tables = (own, joint, own_s0, own_s1, j_s0, j_s1)
        self._odds_tables[key] = tables
        return tables

    def adjacency(self, u: int) -> tuple[int, ...]:
        return self._core.adjacency[u]

    def odds_decompose(self, u: int, t: int, profile: int) -> tuple[Fraction, Fraction]:
        """Split posterior odds into the private-signal odds and the odds
        contributed by observed actions.

        The action part is P(observed neighbor history | state 1, own
        action history) over the same conditioned on state 0; the product
        of the two returned factors equals the posterior odds of the
        round-t belief exactly.
        """
        digit = self.space.signals(profile)[u]
        initial = Fraction(self.space.sig_num1[digit], self.space.sig_num0[digit])
        own, joint, own_s0, own_s1, j_s0, j_s1 = self._history_tables(u, t)
        o = int(own[profile])
        j = int(joint[profile])
        num = Fraction(int(j_s1[j]), int(own_s1[o]))
        den = Fraction(int(j_s0[j]), int(own_s0[o]))
        return initial, num / den


def run_exact(graph: SocialGraph, model: SignalModel, tiebreak: TieBreak = PREFER_ZERO,
              t_cap: int = DEFAULT_T_CAP, budget: int | None = None,
              keep_history: bool = True, extra_rounds: int = 0) -> DynamicsRun:
    """Run the full exact dynamic on a strongly connected graph.

    Stops at the first round after which no agent's partition refines
    (the fixpoint) or at t_cap, whichever comes first; `extra_rounds`
    keeps simulating past a detected fixpoint, which is useful for
    stability checks.  Refuses to start if m^n * n * t_cap exceeds the
    budget (default 2^26, overridable via the BAYES_AGORA_BUDGET
    environment variable handled by the CLI).
    """
    if not isinstance(graph, SocialGraph):
        raise ValidationError("run_exact requires a validated SocialGraph")
    space = ProfileSpace(model, graph.n)
    limit = DEFAULT_BUDGET if budget is None else budget
    cost = space.count * space.n * t_cap
    if cost > limit:
        raise StateBudgetExceeded(
            f"state space m^n*n*t_cap = {space.count}*{space.n}*{t_cap} = {cost} "
            f"exceeds budget {limit}"
        )
    core = _Core(graph.adjacency, space, tiebreak, t_cap,
                 coin_ids=range(graph.n), keep_history=keep_history,
                 extra_rounds=extra_rounds)
    return DynamicsRun(core, graph)


def run_on_adjacency(adjacency, model: SignalModel, tiebreak: TieBreak,
                     t_cap: int, coin_ids, keep_history: bool = True) -> DynamicsRun:
    """Engine entry point without connectivity validation (for ball runs)."""
    space = ProfileSpace(model, len(adjacency))
    core = _Core(adjacency, space, tiebreak, t_cap, coin_ids=coin_ids,
                 keep_history=keep_history, extra_rounds=0)
    return DynamicsRun(core, None)
