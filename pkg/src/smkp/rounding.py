"""Randomized rounding of a fractional block solution into a feasible
assignment.

A trial samples an element set from the scaled fractional point, rejects
it unless its indicator lies in the (1 - mu)-shrunk polytope, and converts
accepted sets by placing elements in weight-descending order onto the
currently lightest bin of their block. Several independent trials run and
the best feasible outcome is kept; if every trial is rejected the empty
assignment is returned, so the output is feasible unconditionally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import (
    BlockConstraintInstance,
    FractionalPoint,
    build_block_instance,
)
from .errors import InputError
from .extension import rng_for
from .greedy import ContinuousGreedyResult, GreedyConfig, continuous_greedy, scale_point
from .instance import Assignment, RestrictedInstance


def max_singleton_gain(objective, items) -> float:
    """Largest single-item gain over the empty set (zero for no items)."""
    items = list(items)
    if not items:
        return 0.0
    rows = np.zeros((len(items) + 1, len(objective.ids)), dtype=bool)
    for r, i in enumerate(items):
        rows[r] = objective.mask_of([i])
    vals = objective.batch_values(rows)
    return float(vals[:-1].max() - vals[-1])


def sample_set(point: FractionalPoint, seed: int) -> frozenset:
    """Independent Bernoulli draw per element; deterministic in the seed."""
    rng = rng_for(seed)
    draws = rng.random(len(point.elements))
    return frozenset(e for e, u, p in zip(point.elements, draws, point.vector) if u < p)


def convert_block_solution(bci: BlockConstraintInstance, chosen) -> Assignment:
    """Place chosen elements onto bins, heaviest first, lightest bin first.

    Ties break deterministically: configurations before singletons, then
    lexicographic items, then block index; bin ties go to the smaller id.
    The output's item union equals the union of the chosen elements, so
    its objective value is exactly the lifted value of the chosen set.
    Capacity feasibility is guaranteed when the chosen set's indicator
    lies in the (1 - mu)-shrunk polytope; the caller checks membership.
    """
    base = bci.restricted.base
    ordered = sorted(chosen, key=lambda e: (-e.weight, 0 if e.is_configuration else 1,
                                            tuple(sorted(e.items)), e.block))
    spec_of = {spec.index: spec for spec in bci.blocks}
    contents: dict = {}
    loads: dict = {}
    for e in ordered:
        spec = spec_of.get(e.block)
        if spec is None:
            raise InputError(f"element references unknown block {e.block}")
        target = min(spec.bin_ids, key=lambda b: (loads.get(b, 0.0), b))
        current = contents.setdefault(target, set())
        new_items = set(e.items) - current
        current.update(new_items)
        loads[target] = loads.get(target, 0.0) + base.weight_of(new_items)
    return Assignment(contents)


@dataclass
class TrialRecord:
    index: int
    accepted: bool
    value: float | None = None


@dataclass
class RoundingResult:
    assignment: Assignment
    value: float
    trials: list = field(default_factory=list)
    membership_failures: int = 0
    chosen_trial: int | None = None
    relaxed: FractionalPoint | None = None
    scaled: FractionalPoint | None = None
    trace: list = field(default_factory=list)
    element_count: int = 0


def relax_and_round(restricted: RestrictedInstance, ublocks, mu: float,
                    cfg: GreedyConfig, repetitions: int,
                    config_cap: int = 10 ** 6) -> RoundingResult:
    """Continuous greedy once, then independent sample/reject/convert trials.

    Returns the best feasible assignment across trials, or the empty
    assignment when every trial fails the membership check.
    """
    if repetitions < 1:
        raise InputError("repetitions must be at least 1")
    if not (0 < mu < 1):
        raise InputError("mu must lie in (0, 1)")
    objective = restricted.base.objective
    empty_value = objective.value(())
    bci = build_block_instance(restricted, ublocks, mu, config_cap)
    if not bci.elements:
        return RoundingResult(assignment=Assignment({}), value=empty_value)

    run: ContinuousGreedyResult = continuous_greedy(bci.oracle, bci.polytope, cfg)
    x_star = scale_point(run.point, mu)

    best: tuple | None = None
    trials = []
    failures = 0
    for t in range(repetitions):
        chosen = sample_set(x_star, cfg.seed ^ (t + 1))
        indicator = FractionalPoint.indicator(bci.elements, chosen)
        if not bci.polytope.membership(indicator, 1.0 - mu):
            failures += 1
            trials.append(TrialRecord(index=t, accepted=False))
            continue
        assignment = convert_block_solution(bci, chosen)
        value = objective.value(assignment.union_items())
        trials.append(TrialRecord(index=t, accepted=True, value=value))
        if best is None or value > best[0]:
            best = (value, t, assignment)

    if best is None:
        return RoundingResult(assignment=Assignment({}), value=empty_value,
                              trials=trials, membership_failures=failures,
                              relaxed=run.point, scaled=x_star, trace=run.trace,
                              element_count=len(bci.elements))
    return RoundingResult(assignment=best[2], value=best[0], trials=trials,
                          membership_failures=failures, chosen_trial=best[1],
                          relaxed=run.point, scaled=x_star, trace=run.trace,
                          element_count=len(bci.elements))


def failure_probability_bound(restricted: RestrictedInstance, ublocks, mu: float,
                              delta: float, opt_estimate: float,
                              top_singleton_gain: float) -> float:
    """Upper bound on the probability that a rounding trial is wasted.

    Three exponential terms: concentration of the lifted value around its
    mean (driven by the optimum-to-singleton-gain ratio), one rejection
    term per restricted bin, and two per unrestricted block. A constant
    objective (zero singleton gain) short-circuits to zero since the
    optimum is zero. The bound is computed for the supplied optimum
    estimate and should be labeled with it.
    """
    if top_singleton_gain < 0:
        raise InputError("the singleton gain must be non-negative")
    if top_singleton_gain == 0:
        return 0.0
    if opt_estimate <= 0:
        raise InputError("opt_estimate must be positive")
    term_value = math.exp(-(mu ** 3 / 16.0) * opt_estimate / top_singleton_gain)
    term_restricted = len(restricted.restricted_bins) * math.exp(-(mu ** 2 / 12.0) / delta)
    term_blocks = 2.0 * sum(math.exp(-(mu ** 2 / 12.0) * len(b)) for b in ublocks)
    return term_value + term_restricted + term_blocks


__all__ = [
    "max_singleton_gain",
    "sample_set",
    "convert_block_solution",
    "TrialRecord",
    "RoundingResult",
    "relax_and_round",
    "failure_probability_bound",
]
