"""End-to-end solver: enumerate small partial assignments, build the
residual instance for each, level its bins, restrict the singleton blocks,
extend the partial by relax-and-round over the remaining blocks, and keep
the best candidate.

Also ships the desk-scale verification tools: an exact branch-and-bound
solver, a density-greedy baseline, and the guarantee-mode parameter
derivation (whose outputs are astronomically large and exist for study,
not for running).
"""

from __future__ import annotations

import hashlib
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SizeLimitError
from .greedy import GreedyConfig
from .instance import (
    Assignment,
    RestrictedInstance,
    SmkpInstance,
    assignment_value,
    check_feasible,
    fits,
)
from .objectives import ResidualOracle
from .rounding import (
    RoundingResult,
    failure_probability_bound,
    max_singleton_gain,
    relax_and_round,
)
from .structuring import build_leveled_structure

MODES = ("practical", "paper_faithful")


@dataclass
class PipelineParams:
    xi: int = 2
    leveling_n: int = 2
    mu: float = 0.1
    delta: float = 0.25
    repetitions: int = 30
    mode: str = "practical"
    epsilon: float | None = None
    greedy: GreedyConfig = field(default_factory=GreedyConfig)
    seed: int = 0
    threads: int = 1
    max_branches: int | None = 1_000_000
    config_cap: int = 10 ** 6

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        if self.xi < 0:
            raise InputError("xi must be non-negative")
        if self.leveling_n < 2:
            raise InputError("the leveling base must be at least 2")
        mu_cap = 0.1 if self.mode == "paper_faithful" else 0.5
        if not (0 < self.mu < mu_cap):
            raise InputError(f"mu must lie in (0, {mu_cap}) in {self.mode} mode")
        if not (0 < self.delta < 1):
            raise InputError("delta must lie in (0, 1)")
        if self.repetitions < 1:
            raise InputError("repetitions must be at least 1")
        if self.threads < 1:
            raise InputError("threads must be at least 1")


def _mu_for_gap(epsilon: float) -> float:
    """Largest grid multiple of 1e-4 (refined if needed) keeping the cubic
    shrink factor above 1 - epsilon^2."""
    bound = 1.0 - epsilon * epsilon
    step = 1e-4
    while step >= 1e-15:
        k = int(0.1 / step) - 1
        while k >= 1:
            mu = k * step
            if (1.0 - mu) ** 3 / (1.0 + mu) >= bound:
                return mu
            k -= 1
        step /= 10.0
    raise InputError("epsilon is too small to place mu on the grid")


def _level_tail(n_level: int, mu: float) -> float:
    """2 N^2 sum over t >= 1 of exp(-mu^2 N^t / 12), truncated at 1e-18."""
    total = 0.0
    coeff = 2.0 * n_level * n_level
    for t in range(1, 10_000):
        if t * math.log10(n_level) > 306:
            break
        term = coeff * math.exp(-(mu * mu / 12.0) * float(n_level) ** t)
        if term < 1e-18:
            break
        total += term
    return total


def parameters_for_target_gap(epsilon: float, **overrides) -> PipelineParams:
    """Parameters meeting the full approximation guarantee for a target gap.

    Resulting magnitudes are astronomically large for small gaps; a
    warning reports them. Gaps of 0.1 and above keep the parameters finite
    but void the formal guarantee, which needs epsilon below 0.1.
    """
    if not (0 < epsilon < 1):
        raise InputError("epsilon must lie in (0, 1)")
    if epsilon >= 0.1:
        warnings.warn("the approximation guarantee holds for epsilon below 0.1; "
                      "larger gaps are accepted for experimentation")
    mu = _mu_for_gap(epsilon)
    target = epsilon * epsilon / 2.0

    n0 = int(math.floor(1.0 / (epsilon * epsilon))) + 1
    if _level_tail(n0, mu) < target:
        n_level = n0
    else:
        hi = n0
        while _level_tail(hi, mu) >= target:
            hi *= 2
            if hi > 10 ** 18:
                raise SizeLimitError("leveling base would exceed 1e18")
        lo = hi // 2
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if _level_tail(mid, mu) < target:
                hi = mid
            else:
                lo = mid
        n_level = hi
        for _ in range(1000):  # polish against non-monotone dips
            if n_level - 1 >= n0 and _level_tail(n_level - 1, mu) < target:
                n_level -= 1
            else:
                break

    gap = target - _level_tail(n_level, mu)
    delta = (mu * mu) / (12.0 * math.log(2.0 * n_level * n_level / gap))
    xi_small = math.ceil(n_level * n_level / (epsilon * epsilon * delta))
    xi_conc = math.ceil(80.0 * math.log(2.0 / (epsilon * epsilon)) / mu ** 3)
    xi = max(int(xi_small), int(xi_conc), 1)

    warnings.warn(
        f"guarantee-mode parameters for gap {epsilon}: xi={xi:.4g}, "
        f"N={n_level}, delta={delta:.4g}, mu={mu:.6g}; these sizes are "
        "far beyond desk scale")
    return PipelineParams(xi=xi, leveling_n=n_level, mu=mu, delta=delta,
                          mode="paper_faithful", epsilon=epsilon, **overrides)


# ---------------------------------------------------------------------------
# Residual instances and partial enumeration


def residual_instance(instance: SmkpInstance, partial: Assignment, xi: int) -> SmkpInstance:
    """Instance left after fixing a feasible partial assignment.

    Capacities shrink by the partial loads, the objective becomes the gain
    over the fixed items, and only leftover items whose singleton gain is
    at most a 1/xi fraction of the fixed value remain.
    """
    if xi < 1:
        raise InputError("xi must be at least 1")
    verdict = check_feasible(instance, partial)
    if not verdict:
        raise InputError(f"partial assignment is infeasible: {verdict.violation}")
    anchor = partial.union_items()
    oracle = ResidualOracle(instance.objective, anchor)
    threshold = oracle.anchor_value / xi
    slack = max(1e-12, 1e-9 * abs(threshold))
    leftovers = [i for i in instance.item_ids if i not in anchor]
    kept = []
    if leftovers:
        rows = np.stack([oracle.mask_of([i]) for i in leftovers])
        gains = oracle.batch_values(rows)
        kept = [i for i, gain in zip(leftovers, gains) if gain <= threshold + slack]
    bins = []
    for b in instance.bin_ids:
        load = instance.weight_of(partial.items_in(b))
        bins.append((b, max(instance.capacities[b] - load, 0.0)))
    return SmkpInstance(items=[(i, instance.weights[i]) for i in kept],
                        bins=bins, objective=oracle)


def enumerate_partials(instance: SmkpInstance, xi: int):
    """All feasible partial assignments of at most xi items, each once.

    Partials place each item in at most one bin (a duplicate placement is
    dominated: same value, less capacity). Enumeration follows the
    lexicographic (item, bin) pair order, so output order and content are
    deterministic; the empty assignment always comes first.
    """
    if xi < 0:
        raise InputError("xi must be non-negative")
    yield Assignment({})
    if xi == 0:
        return
    items = sorted(instance.item_ids)
    bins = sorted(instance.bin_ids)
    pairs = [(i, b) for i in items for b in bins]
    chosen: list = []
    used: set = set()
    loads = {b: 0.0 for b in bins}

    def build():
        grouped: dict = {}
        for i, b in chosen:
            grouped.setdefault(b, set()).add(i)
        return Assignment(grouped)

    def rec(start):
        for idx in range(start, len(pairs)):
            i, b = pairs[idx]
            if i in used:
                continue
            w = instance.weights[i]
            if not fits(loads[b] + w, instance.capacities[b]):
                continue
            chosen.append((i, b))
            used.add(i)
            loads[b] += w
            yield build()
            if len(chosen) < xi:
                yield from rec(idx + 1)
            chosen.pop()
            used.remove(i)
            loads[b] -= w

    yield from rec(0)


def greedy_marginal_prefix(instance: SmkpInstance, assignment: Assignment,
                           size: int) -> Assignment:
    """Prefix of a disjoint assignment in greedy marginal order.

    Repeatedly takes the assigned item with the largest gain over those
    already taken and keeps the first `size` items in their original bins.
    The suffix of the input assignment is then feasible for the residual
    instance built from the returned prefix; tests rely on this.
    """
    if not assignment.is_disjoint():
        raise InputError("assignment must use pairwise disjoint bin sets")
    bin_of = {}
    for b, items in assignment.bins.items():
        for i in items:
            bin_of[i] = b
    remaining = sorted(bin_of)
    taken: list = []
    oracle = instance.objective
    while remaining and len(taken) < size:
        rows = np.stack([oracle.mask_of(taken + [i]) for i in remaining])
        base = oracle.value(taken)
        gains = oracle.batch_values(rows) - base
        best_gain = float(gains.max())
        # ties broken toward the lexicographically smallest item id
        pick = min(i for g, i in zip(gains, remaining) if g >= best_gain - 1e-12)
        taken.append(pick)
        remaining.remove(pick)
    grouped: dict = {}
    for i in taken:
        grouped.setdefault(bin_of[i], set()).add(i)
    return Assignment(grouped)


# ---------------------------------------------------------------------------
# The solver


@dataclass
class BranchRecord:
    index: int
    partial: dict
    partial_items: int
    residual_items: int
    surviving_bins: int
    block_count: int
    value: float
    rounding_value: float
    trials: int
    membership_failures: int
    chosen_trial: int | None


@dataclass
class SolveReport:
    best_assignment: Assignment
    best_value: float
    branches: list
    branch_count: int
    oracle_calls: int
    runtime_seconds: float
    seed: int
    params: PipelineParams
    gamma_bound: float | None
    gamma_opt_estimate: float | None
    total_trials: int
    total_membership_failures: int
    winning_trace: list = field(default_factory=list)


def _canonical_partial(partial: Assignment) -> str:
    return ";".join(f"{b}:{','.join(sorted(items))}"
                    for b, items in sorted(partial.bins.items()))


def derive_seed(seed: int, text: str) -> int:
    digest = hashlib.sha256(f"{seed}|{text}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class _BranchOutcome:
    record: BranchRecord
    assignment: Assignment
    restricted: RestrictedInstance | None
    ublocks: list
    rounding: RoundingResult | None


def _run_branch(instance, partial, params, index) -> _BranchOutcome:
    branch_seed = derive_seed(params.seed, _canonical_partial(partial))
    res = residual_instance(instance, partial, max(params.xi, 1))
    leveled = build_leveled_structure(res.capacities, params.leveling_n)
    nn = params.leveling_n * params.leveling_n
    k = leveled.k
    restricted_bins: set = set()
    for j in range(min(nn - 1, k) + 1):
        restricted_bins.update(leveled.blocks[j])
    ublocks = [leveled.blocks[j] for j in range(nn, k + 1)]
    leveled_inst = SmkpInstance(
        items=[(i, res.weights[i]) for i in res.item_ids],
        bins=[(b, leveled.reduced[b]) for blk in leveled.blocks for b in blk],
        objective=res.objective,
    )
    restricted = RestrictedInstance(leveled_inst, frozenset(restricted_bins), params.delta)
    rounding = relax_and_round(restricted, ublocks, params.mu,
                               params.greedy.with_seed(branch_seed),
                               params.repetitions, params.config_cap)
    merged = partial.merged_with(rounding.assignment)
    value = assignment_value(instance, merged)
    record = BranchRecord(
        index=index,
        partial=partial.to_dict(),
        partial_items=partial.total_items(),
        residual_items=res.n,
        surviving_bins=len(leveled.survivors),
        block_count=k + 1,
        value=value,
        rounding_value=rounding.value,
        trials=len(rounding.trials),
        membership_failures=rounding.membership_failures,
        chosen_trial=rounding.chosen_trial,
    )
    return _BranchOutcome(record=record, assignment=merged, restricted=restricted,
                          ublocks=ublocks, rounding=rounding)


def solve(instance: SmkpInstance, params: PipelineParams) -> SolveReport:
    """Run the full pipeline and return the best candidate found.

    The output is always feasible for the input capacities: each branch's
    extension respects the residual capacities left by its partial.
    """
    start = time.perf_counter()
    calls_before = instance.objective.calls

    if instance.m == 0:
        empty = Assignment({})
        return SolveReport(best_assignment=empty,
                           best_value=assignment_value(instance, empty),
                           branches=[], branch_count=0,
                           oracle_calls=instance.objective.calls - calls_before,
                           runtime_seconds=time.perf_counter() - start,
                           seed=params.seed, params=params, gamma_bound=None,
                           gamma_opt_estimate=None, total_trials=0,
                           total_membership_failures=0)

    outcomes: list = []

    def handle(partial_index):
        index, partial = partial_index
        if params.max_branches is not None and index >= params.max_branches:
            raise SizeLimitError(
                f"enumeration exceeds {params.max_branches} branches; "
                "raise --max-branches or lower xi")
        return _run_branch(instance, partial, params, index)

    numbered = enumerate(enumerate_partials(instance, params.xi))
    if params.threads > 1:
        with ThreadPoolExecutor(max_workers=params.threads) as pool:
            for outcome in pool.map(handle, numbered, chunksize=8):
                outcomes.append(outcome)
    else:
        for pair in numbered:
            outcomes.append(handle(pair))

    best = max(outcomes, key=lambda o: (o.record.value, -o.record.index))
    verdict = check_feasible(instance, best.assignment)
    if not verdict:
        raise AssertionError(f"internal error: best assignment infeasible: "
                             f"{verdict.violation}")

    gamma = None
    gamma_estimate = None
    if best.restricted is not None:
        upsilon = max_singleton_gain(best.restricted.base.objective,
                                     best.restricted.base.item_ids)
        if upsilon == 0:
            gamma = 0.0
        elif best.rounding is not None and best.rounding.value > 0:
            gamma_estimate = best.rounding.value
            gamma = failure_probability_bound(best.restricted, best.ublocks,
                                              params.mu, params.delta,
                                              gamma_estimate, upsilon)

    records = [o.record for o in outcomes]
    return SolveReport(
        best_assignment=best.assignment,
        best_value=best.record.value,
        branches=records,
        branch_count=len(records),
        oracle_calls=instance.objective.calls - calls_before,
        runtime_seconds=time.perf_counter() - start,
        seed=params.seed,
        params=params,
        gamma_bound=gamma,
        gamma_opt_estimate=gamma_estimate,
        total_trials=sum(r.trials for r in records),
        total_membership_failures=sum(r.membership_failures for r in records),
        winning_trace=list(best.rounding.trace) if best.rounding else [],
    )


# ---------------------------------------------------------------------------
# Exact solver and baseline


@dataclass
class ExactResult:
    assignment: Assignment
    value: float
    nodes: int


def solve_exact(problem, size_limit: int = 10 ** 8) -> ExactResult:
    """Exhaustive branch-and-bound over item-to-bin maps.

    Items are tried heaviest first; the bound completes the current union
    with every undecided item, which is admissible for any monotone
    objective. Accepts a plain or a restricted instance; bins with equal
    remaining capacity (and equal restriction state) are interchangeable
    and only the first is branched on.
    """
    if isinstance(problem, RestrictedInstance):
        base, restricted_bins, delta = problem.base, problem.restricted_bins, problem.delta
    else:
        base, restricted_bins, delta = problem, frozenset(), None
    n, m = base.n, base.m
    if (m + 1) ** max(n, 1) > size_limit:
        raise SizeLimitError(f"search space (m+1)^n exceeds {size_limit}")
    oracle = base.objective
    items = sorted(base.item_ids, key=lambda i: (-base.weights[i], i))
    bins = sorted(base.bin_ids)
    caps = np.array([base.capacities[b] for b in bins])
    is_restricted = [b in restricted_bins for b in bins]

    suffix_masks = []
    running = np.zeros(len(oracle.ids), dtype=bool)
    for idx in range(n, -1, -1):
        suffix_masks.append(running.copy())
        if idx > 0:
            running |= oracle.mask_of([items[idx - 1]])
    suffix_masks.reverse()

    empty_value = oracle.value(())
    best = {"value": empty_value, "assignment": {}, "nodes": 0}
    loads = np.zeros(m)
    contents: list = [[] for _ in range(m)]
    cur_mask = np.zeros(len(oracle.ids), dtype=bool)

    def rec(idx):
        best["nodes"] += 1
        if idx == n:
            val = float(oracle.batch_values(cur_mask[None])[0])
            if val > best["value"] + max(1e-12, 1e-9 * abs(best["value"])):
                best["value"] = val
                best["assignment"] = {bins[p]: list(contents[p])
                                      for p in range(m) if contents[p]}
            return
        ub = float(oracle.batch_values((cur_mask | suffix_masks[idx])[None])[0])
        if ub <= best["value"] + max(1e-12, 1e-9 * abs(best["value"])):
            return
        item = items[idx]
        w = base.weights[item]
        imask = oracle.mask_of([item])
        seen_caps = set()
        for p in range(m):
            remaining = caps[p] - loads[p]
            key = (round(remaining, 9), is_restricted[p])
            if key in seen_caps:
                continue
            seen_caps.add(key)
            if not fits(loads[p] + w, caps[p]):
                continue
            if is_restricted[p] and not fits(w, delta * caps[p]):
                continue
            loads[p] += w
            contents[p].append(item)
            cur_mask[imask] = True
            rec(idx + 1)
            cur_mask[imask] = False
            contents[p].pop()
            loads[p] -= w
        rec(idx + 1)

    rec(0)
    return ExactResult(assignment=Assignment(best["assignment"]),
                       value=best["value"], nodes=best["nodes"])


@dataclass
class BaselineResult:
    assignment: Assignment
    value: float


def solve_greedy(instance: SmkpInstance) -> BaselineResult:
    """Density greedy plus a best-single-item fix-up.

    Repeatedly inserts the fitting (item, bin) pair with the best marginal
    gain per unit weight (ties: larger gain, then lexicographic pair) and
    finally returns the better of the greedy packing and the single best
    item that fits anywhere.
    """
    oracle = instance.objective
    bins = sorted(instance.bin_ids)
    loads = {b: 0.0 for b in bins}
    contents: dict = {}
    union: set = set()
    current = oracle.value(())

    while True:
        avail = [i for i in sorted(instance.item_ids) if i not in union]
        placeable = []
        for i in avail:
            open_bins = [b for b in bins
                         if fits(loads[b] + instance.weights[i], instance.capacities[b])]
            if open_bins:
                placeable.append((i, open_bins[0]))
        if not placeable:
            break
        rows = np.stack([oracle.mask_of(union | {i}) for i, _ in placeable])
        gains = oracle.batch_values(rows) - current
        scored = []
        for (i, b), gain in zip(placeable, gains):
            w = instance.weights[i]
            ratio = gain / w if w > 0 else (math.inf if gain > 0 else 0.0)
            scored.append((-ratio, -gain, i, b))
        _, neg_gain, item, target = min(scored)
        union.add(item)
        loads[target] += instance.weights[item]
        contents.setdefault(target, set()).add(item)
        current += -neg_gain

    greedy = BaselineResult(Assignment(contents), oracle.value(union))

    best_single = None
    for i in sorted(instance.item_ids):
        target = next((b for b in bins if fits(instance.weights[i], instance.capacities[b])),
                      None)
        if target is None:
            continue
        val = oracle.value([i])
        if best_single is None or val > best_single[0]:
            best_single = (val, i, target)
    if best_single and best_single[0] > greedy.value:
        val, i, target = best_single
        return BaselineResult(Assignment({target: {i}}), val)
    return greedy
