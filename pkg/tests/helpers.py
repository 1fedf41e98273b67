"""Shared test utilities: independent brute-force oracles and corpus
builders. Everything here is deliberately dumb and slow so it cannot share
bugs with the library code it checks."""

from __future__ import annotations

import itertools

import numpy as np

import smkp
from smkp.instance import Assignment, RestrictedInstance, check_feasible, fits


def naive_optimum(problem):
    """Exhaustive optimum over item-to-bin maps; accepts restricted too."""
    if isinstance(problem, RestrictedInstance):
        base = problem.base
    else:
        base = problem
    best = base.objective.value(())
    best_assignment = Assignment({})
    bins = list(base.bin_ids)
    for combo in itertools.product([None] + bins, repeat=base.n):
        grouped: dict = {}
        for item, b in zip(base.item_ids, combo):
            if b is not None:
                grouped.setdefault(b, set()).add(item)
        candidate = Assignment(grouped)
        if not check_feasible(problem, candidate):
            continue
        value = base.objective.value(candidate.union_items())
        if value > best + 1e-12:
            best = value
            best_assignment = candidate
    return best, best_assignment


def lp_vertex_optimum(lam, w, is_config, kappa, omega):
    """LP optimum by enumerating all vertices (<= 2 fractional coords)."""
    lam = np.asarray(lam, dtype=float)
    w = np.asarray(w, dtype=float)
    is_config = np.asarray(is_config, dtype=bool)
    n = len(lam)
    best = 0.0
    idx = list(range(n))

    def feasible_value(x):
        x = np.asarray(x)
        if (x < -1e-9).any() or (x > 1 + 1e-9).any():
            return None
        x = np.clip(x, 0, 1)
        if kappa is not None and x[is_config].sum() > kappa + 1e-9:
            return None
        if (x * w).sum() > omega + 1e-9:
            return None
        return float(lam @ x)

    for pattern in itertools.product([0.0, 1.0], repeat=n):
        v = feasible_value(np.array(pattern))
        if v is not None:
            best = max(best, v)
    for e in idx:
        rest = [i for i in idx if i != e]
        for pattern in itertools.product([0.0, 1.0], repeat=n - 1):
            x = np.zeros(n)
            for i, p in zip(rest, pattern):
                x[i] = p
            candidates = []
            if kappa is not None and is_config[e]:
                candidates.append(kappa - x[is_config].sum())
            if w[e] > 0:
                candidates.append((omega - (x * w).sum()) / w[e])
            for xe in candidates:
                if 0 <= xe <= 1:
                    x2 = x.copy()
                    x2[e] = xe
                    v = feasible_value(x2)
                    if v is not None:
                        best = max(best, v)
    if kappa is not None:
        for e, f in itertools.combinations(idx, 2):
            rest = [i for i in idx if i not in (e, f)]
            for pattern in itertools.product([0.0, 1.0], repeat=n - 2):
                x = np.zeros(n)
                for i, p in zip(rest, pattern):
                    x[i] = p
                mat = np.array([[1.0 if is_config[e] else 0.0,
                                 1.0 if is_config[f] else 0.0],
                                [w[e], w[f]]])
                rhs = np.array([kappa - x[is_config].sum(), omega - (x * w).sum()])
                if abs(np.linalg.det(mat)) < 1e-12:
                    continue
                y = np.linalg.solve(mat, rhs)
                if (y >= -1e-9).all() and (y <= 1 + 1e-9).all():
                    x2 = x.copy()
                    x2[e], x2[f] = y
                    v = feasible_value(x2)
                    if v is not None:
                        best = max(best, v)
    return best


def random_feasible_assignment(instance, rng, keep=0.7) -> Assignment:
    """Disjoint feasible assignment by random placement with random skips."""
    loads = {b: 0.0 for b in instance.bin_ids}
    grouped: dict = {}
    for i in instance.item_ids:
        if rng.random() > keep:
            continue
        options = [b for b in instance.bin_ids
                   if fits(loads[b] + instance.weights[i], instance.capacities[b])]
        if not options:
            continue
        b = options[int(rng.integers(0, len(options)))]
        loads[b] += instance.weights[i]
        grouped.setdefault(b, set()).add(i)
    return Assignment(grouped)


def exact_marginal_expectation(oracle, x, element_index):
    """E over R ~ x of value(R with e) - value(R without e), enumerated.

    This is the partial derivative of the multilinear extension in the
    e-th coordinate.
    """
    n = len(oracle.ids)
    x = np.asarray(x, dtype=float)
    total = 0.0
    for mask_bits in range(1 << n):
        mask = np.array([(mask_bits >> b) & 1 for b in range(n)], dtype=bool)
        prob = float(np.where(mask, x, 1 - x).prod())
        if prob == 0.0:
            continue
        with_e = mask.copy()
        with_e[element_index] = True
        without_e = mask.copy()
        without_e[element_index] = False
        vals = oracle.batch_values(np.stack([with_e, without_e]))
        total += prob * float(vals[0] - vals[1])
    return total


def tight_capacity_instance(kind, n, m, seed, max_opt_items):
    """Instance whose total capacity admits at most `max_opt_items` items."""
    inst = smkp.generate_instance(kind, n, m, seed=seed)
    weights = sorted(inst.weights.values())
    limit = sum(weights[:max_opt_items + 1])  # packing this many must fail
    total_cap = sum(inst.capacities.values())
    scale = 0.95 * limit / total_cap if total_cap > 0 else 1.0
    items = [(i, inst.weights[i]) for i in inst.item_ids]
    bins = [(b, round(inst.capacities[b] * min(scale, 1.0), 4)) for b in inst.bin_ids]
    return smkp.SmkpInstance(items, bins, inst.objective)


def max_packable_items(instance) -> int:
    """Largest number of items placeable at once (exhaustive, small n)."""
    best = 0
    bins = list(instance.bin_ids)
    for combo in itertools.product([None] + bins, repeat=instance.n):
        loads = {b: 0.0 for b in bins}
        count = 0
        ok = True
        for item, b in zip(instance.item_ids, combo):
            if b is None:
                continue
            loads[b] += instance.weights[item]
            if not fits(loads[b], instance.capacities[b]):
                ok = False
                break
            count += 1
        if ok:
            best = max(best, count)
    return best
