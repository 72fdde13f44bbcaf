"""Almost-independence measurement and the three-bit estimator bounds.

Everything here is exact rational arithmetic over finite outcome
spaces: total variation gaps against product-of-marginals, the majority
and MAP accuracies for three conditionally independent bits with their
explicit improvement constant, and the far-ball independence check that
couples the engine's limit behavior to signals in a distant ball.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import log10
from typing import Sequence

from .engine import PREFER_ZERO, TieBreak, run_exact
from .errors import (
    InvalidConditional,
    POutOfRange,
    ValidationError,
    VerticesTooClose,
)
from .graphs import SocialGraph, ball, star
from .signals import RationalLike, SignalModel, as_fraction, first_round_accuracy

_CELL_GUARD = 1 << 20


@dataclass(frozen=True)
class FiniteJointDistribution:
    """Exact joint distribution of k variables over finite outcome sets."""

    outcome_sets: tuple[tuple, ...]
    probs: dict[tuple, Fraction]

    def __post_init__(self):
        if len(self.outcome_sets) < 1:
            raise ValidationError("need at least one variable")
        cells = 1
        for s in self.outcome_sets:
            cells *= len(s)
        if cells > _CELL_GUARD:
            raise ValidationError(f"outcome table with {cells} cells exceeds guard {_CELL_GUARD}")
        total = sum(self.probs.values(), Fraction(0))
        if total != 1:
            raise ValidationError(f"probabilities sum to {total}, expected 1")
        for outcome, p in self.probs.items():
            if p < 0:
                raise ValidationError(f"negative probability {p} at {outcome}")
            if len(outcome) != len(self.outcome_sets):
                raise ValidationError(f"outcome {outcome} has wrong arity")

    @property
    def arity(self) -> int:
        return len(self.outcome_sets)

    def prob(self, outcome: tuple) -> Fraction:
        return self.probs.get(outcome, Fraction(0))

    def marginal(self, i: int) -> dict:
        out: dict = {v: Fraction(0) for v in self.outcome_sets[i]}
        for outcome, p in self.probs.items():
            out[outcome[i]] += p
        return out

    def outcomes(self):
        return itertools.product(*self.outcome_sets)

    def tv_to_product_of_marginals(self) -> Fraction:
        marginals = [self.marginal(i) for i in range(self.arity)]
        gap = Fraction(0)
        for outcome in self.outcomes():
            prod = Fraction(1)
            for i, v in enumerate(outcome):
                prod *= marginals[i][v]
            gap += abs(self.prob(outcome) - prod)
        return gap / 2


def joint_from_weights(outcome_sets, weights: dict) -> FiniteJointDistribution:
    """Normalize exact nonnegative weights into a joint distribution."""
    total = sum(weights.values(), Fraction(0))
    if total <= 0:
        raise ValidationError("weights must have positive total")
    probs = {k: Fraction(v) / total for k, v in weights.items() if v != 0}
    return FiniteJointDistribution(tuple(tuple(s) for s in outcome_sets), probs)


def delta_independence_gap(joint: FiniteJointDistribution) -> Fraction:
    """TV distance between a joint and the product of its marginals."""
    if joint.arity < 2:
        raise ValidationError("independence gap needs at least two variables")
    return joint.tv_to_product_of_marginals()


# -- three-bit estimators ------------------------------------------------------

def majority_accuracy(p: RationalLike) -> Fraction:
    """Probability that the majority of three independent p-bits is right."""
    p = as_fraction(p)
    if not Fraction(1, 2) < p < 1:
        raise POutOfRange(f"p must lie strictly between 1/2 and 1, got {p}")
    return p ** 3 + 3 * p ** 2 * (1 - p)


def eta_p(p: RationalLike) -> Fraction:
    """Majority improvement over a single bit: majority_accuracy(p) - p."""
    p = as_fraction(p)
    return majority_accuracy(p) - p


def epsilon_p(p: RationalLike) -> Fraction:
    """Guaranteed MAP improvement constant (2p-1)(3p^2-2p^3-p)/100."""
    p = as_fraction(p)
    if not Fraction(1, 2) < p < 1:
        raise POutOfRange(f"p must lie strictly between 1/2 and 1, got {p}")
    return Fraction(1, 100) * (2 * p - 1) * (3 * p ** 2 - 2 * p ** 3 - p)


def map_accuracy(cond0: dict, cond1: dict) -> Fraction:
    """Exact accuracy of the MAP rule for a uniform binary state.

    `cond0[x]` and `cond1[x]` are the conditional outcome distributions;
    the MAP rule picks the state with the larger likelihood, so its
    accuracy is half the sum over outcomes of the pointwise maximum.
    """
    acc = Fraction(0)
    for x in set(cond0) | set(cond1):
        acc += max(cond0.get(x, Fraction(0)), cond1.get(x, Fraction(0)))
    return acc / 2


def three_bit_conditionals(bits: Sequence[tuple[RationalLike, RationalLike]]):
    """Joint conditionals of three bits independent given the state.

    Each bit is given as (P(X=1 | S=1), P(X=0 | S=0)).
    """
    if len(bits) != 3:
        raise ValidationError(f"exactly three bits required, got {len(bits)}")
    ps = []
    for p11, p00 in bits:
        p11, p00 = as_fraction(p11), as_fraction(p00)
        for v in (p11, p00):
            if not 0 <= v <= 1:
                raise InvalidConditional(f"conditional {v} outside [0, 1]")
        ps.append((p11, p00))
    cond0: dict[tuple, Fraction] = {}
    cond1: dict[tuple, Fraction] = {}
    for outcome in itertools.product((0, 1), repeat=3):
        pr0 = pr1 = Fraction(1)
        for x, (p11, p00) in zip(outcome, ps):
            pr1 *= p11 if x == 1 else 1 - p11
            pr0 *= 1 - p00 if x == 1 else p00
        cond0[outcome] = pr0
        cond1[outcome] = pr1
    return cond0, cond1


def map_three_bits(bits: Sequence[tuple[RationalLike, RationalLike]]) -> Fraction:
    """Exact MAP accuracy for three conditionally independent bits."""
    cond0, cond1 = three_bit_conditionals(bits)
    return map_accuracy(cond0, cond1)


# -- far-ball independence -------------------------------------------------------

def far_ball_independence(graph: SocialGraph, model: SignalModel, u0: int, u: int,
                          r: int, tiebreak: TieBreak = PREFER_ZERO, *,
                          t_cap: int | None = None,
                          budget: int | None = None) -> Fraction:
    """Gap between independence and the joint law of far-ball signals and
    the limit action set of u0, conditioned on the state.

    Returns the larger of the two conditional gaps.  The "limit set" is
    the finite run's fixpoint value for u0, which the caller should keep
    in mind when comparing against infinite-graph statements.
    """
    if r < 0:
        raise ValidationError(f"radius must be >= 0, got {r}")
    dist = graph.distances_from(u0)[u]
    if dist >= 0 and dist <= 2 * r:
        raise VerticesTooClose(f"d({u0},{u}) = {dist} <= 2r = {2 * r}")
    b = ball(graph, u, r)
    kwargs = {} if t_cap is None else {"t_cap": t_cap}
    if budget is not None:
        kwargs["budget"] = budget
    run = run_exact(graph, model, tiebreak, **kwargs)
    codes = run.limit_codes()[u0]
    members = list(b.vertices)
    w = run._core.weights
    weights0: dict[tuple, Fraction] = {}
    weights1: dict[tuple, Fraction] = {}
    total = run.space.total
    for i in range(run.space.count):
        sig = run.space.signals(i)
        key = (tuple(sig[v] for v in members), int(codes[i]))
        if w.fast:
            w0, w1 = int(w.w0[i]), int(w.w1[i])
        else:
            w0, w1 = w.w0[i], w.w1[i]
        weights0[key] = weights0.get(key, 0) + Fraction(w0, total)
        weights1[key] = weights1.get(key, 0) + Fraction(w1, total)
    signal_outcomes = tuple(itertools.product(range(model.m), repeat=len(members)))
    outcome_sets = (signal_outcomes, (0, 1, 2))
    gap = Fraction(0)
    for weights in (weights0, weights1):
        joint = FiniteJointDistribution(
            outcome_sets, {k: v for k, v in weights.items() if v != 0}
        )
        gap = max(gap, delta_independence_gap(joint))
    return gap


# -- out-degree accuracy curve -----------------------------------------------------

def degree_accuracy_curve(model: SignalModel, degrees: Sequence[int], *,
                          budget: int | None = None) -> list[tuple[int, Fraction, float]]:
    """Exact second-round accuracy of a hub observing d leaves, per d.

    Returns (d, p, log10(1 - p)) rows; the last column makes exponential
    decay in d easy to eyeball.
    """
    rows = []
    for d in degrees:
        if d < 0:
            raise ValidationError(f"degree must be >= 0, got {d}")
        if d == 0:
            p = first_round_accuracy(model)
        else:
            g = star(d + 1)
            kwargs = {} if budget is None else {"budget": budget}
            run = run_exact(g, model, PREFER_ZERO, t_cap=2, **kwargs)
            p = run.accuracy(0, 2)
        rows.append((d, p, log10(1 - p) if p < 1 else float("-inf")))
    return rows
