"""Block-constraint relaxation of a restricted instance.

The element universe pairs item sets with block indices: configurations
(sets of large items that fit one bin of an unrestricted block) and small
singletons. The polytope keeps two constraints per unrestricted block (a
configuration count bound and an aggregate weight bound) and one weight
bound per restricted singleton block; it is down-monotone.

The linear oracle maximizes any coefficient vector over the polytope
exactly. It decomposes per block, dispatches the three easy shapes
(nothing binds, only the weight bound binds, only the count bound binds)
to greedy fills which are provably optimal there, and resolves the
both-bounds-tight case by enumerating the dual threshold lines through
pairs of element points, then reconstructing a primal point from the best
threshold's tie set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationBudgetError, InputError
from .instance import Assignment, RestrictedInstance, fits
from .objectives import LiftedOracle

_REL = 1e-9
_ABS = 1e-12


def _slack_ok(lhs, rhs):
    return lhs <= rhs + max(_ABS, _REL * abs(rhs))


@dataclass(frozen=True)
class Element:
    """One selectable unit: an item set destined for a specific block."""

    items: frozenset
    block: int
    weight: float
    is_configuration: bool

    def sort_key(self):
        return (self.block, 0 if self.is_configuration else 1,
                -self.weight, tuple(sorted(self.items)))

    def label(self) -> str:
        kind = "cfg" if self.is_configuration else "one"
        return f"{kind}[{','.join(sorted(self.items))}]@{self.block}"


@dataclass(frozen=True)
class BlockSpec:
    index: int
    bin_ids: tuple
    capacity: float
    restricted: bool


class FractionalPoint:
    """Vector in [0, 1]^E aligned to a fixed element order."""

    def __init__(self, elements, vector):
        self.elements = tuple(elements)
        vec = np.asarray(vector, dtype=float)
        if vec.shape != (len(self.elements),):
            raise InputError("vector length does not match element universe")
        if vec.size and (vec.min() < -1e-9 or vec.max() > 1 + 1e-9):
            raise InputError("coordinates must lie in [0, 1]")
        self.vector = np.clip(vec, 0.0, 1.0)
        self._pos = {e: i for i, e in enumerate(self.elements)}

    @classmethod
    def zeros(cls, elements):
        return cls(elements, np.zeros(len(tuple(elements))))

    @classmethod
    def indicator(cls, elements, subset):
        elements = tuple(elements)
        subset = set(subset)
        vec = np.array([1.0 if e in subset else 0.0 for e in elements])
        return cls(elements, vec)

    def scale(self, factor: float) -> "FractionalPoint":
        if not (0 <= factor <= 1 + 1e-12):
            raise InputError("scale factor must lie in [0, 1]")
        return FractionalPoint(self.elements, self.vector * min(factor, 1.0))

    def support(self):
        return tuple(self.elements[i] for i in np.flatnonzero(self.vector > 0))

    def __getitem__(self, element) -> float:
        return float(self.vector[self._pos[element]])

    def __len__(self):
        return len(self.elements)


@dataclass
class MembershipReport:
    ok: bool
    rows: list = field(default_factory=list)  # per-constraint slack rows

    def __bool__(self):
        return self.ok


class BlockPolytope:
    """Count and weight bounds per block, scalable by a factor eta."""

    def __init__(self, blocks, elements):
        self.blocks = tuple(blocks)
        self.elements = tuple(elements)
        self._eb = np.array([e.block for e in self.elements], dtype=int)
        self._ew = np.array([e.weight for e in self.elements], dtype=float)
        self._ec = np.array([e.is_configuration for e in self.elements], dtype=bool)
        self.count_budgets = {}
        self.weight_budgets = {}
        self._members = {}
        for spec in self.blocks:
            self.count_budgets[spec.index] = None if spec.restricted else float(len(spec.bin_ids))
            self.weight_budgets[spec.index] = len(spec.bin_ids) * spec.capacity
            self._members[spec.index] = np.flatnonzero(self._eb == spec.index)

    def _vec(self, point):
        if isinstance(point, FractionalPoint):
            if point.elements != self.elements:
                raise InputError("point is aligned to a different element universe")
            return point.vector
        vec = np.asarray(point, dtype=float)
        if vec.shape != (len(self.elements),):
            raise InputError("vector length does not match element universe")
        return vec

    def membership(self, point, eta: float = 1.0) -> MembershipReport:
        """Check point in eta * polytope; reports slack per constraint."""
        if not (0 < eta <= 1):
            raise InputError("eta must lie in (0, 1]")
        x = self._vec(point)
        ok = True
        rows = []
        for spec in self.blocks:
            members = self._members[spec.index]
            xm = x[members]
            if self.count_budgets[spec.index] is not None:
                lhs = float(xm[self._ec[members]].sum())
                rhs = eta * self.count_budgets[spec.index]
                good = _slack_ok(lhs, rhs)
                ok = ok and good
                rows.append({"block": spec.index, "kind": "count",
                             "lhs": lhs, "rhs": rhs, "slack": rhs - lhs})
            lhs = float((xm * self._ew[members]).sum())
            rhs = eta * self.weight_budgets[spec.index]
            good = _slack_ok(lhs, rhs)
            ok = ok and good
            rows.append({"block": spec.index, "kind": "weight",
                         "lhs": lhs, "rhs": rhs, "slack": rhs - lhs})
        return MembershipReport(ok=ok, rows=rows)

    def linear_maximize(self, coeffs) -> np.ndarray:
        """Exact maximizer of coeffs . x over the polytope (eta = 1).

        Negative coefficients are never selected; the polytope is
        down-monotone so zero is feasible coordinate-wise.
        """
        if isinstance(coeffs, dict):
            lam = np.zeros(len(self.elements))
            pos = {e: i for i, e in enumerate(self.elements)}
            for e, v in coeffs.items():
                lam[pos[e]] = float(v)
        else:
            lam = np.asarray(coeffs, dtype=float)
            if lam.shape != (len(self.elements),):
                raise InputError("coefficient vector length mismatch")
        if not np.all(np.isfinite(lam)):
            raise InputError("coefficients must be finite")
        x = np.zeros(len(self.elements))
        for spec in self.blocks:
            members = self._members[spec.index]
            if members.size == 0:
                continue
            x[members] = _maximize_block(
                lam[members],
                self._ew[members],
                self._ec[members],
                self.count_budgets[spec.index],
                self.weight_budgets[spec.index],
            )
        return x


# ---------------------------------------------------------------------------
# Per-block exact solver


def _fractional_knapsack(lam, w, budget, eligible):
    """Exact max of lam . x under one weight bound and the box."""
    x = np.zeros(len(lam))
    x[eligible & (w <= 0)] = 1.0
    idx = np.flatnonzero(eligible & (w > 0))
    if idx.size == 0 or budget <= 0:
        return x
    ratio = lam[idx] / w[idx]
    order = idx[np.lexsort((idx, -ratio))]
    remaining = float(budget)
    for e in order:
        if remaining <= 0:
            break
        take = min(1.0, remaining / w[e])
        x[e] = take
        remaining -= take * w[e]
    return x


def _count_greedy(lam, is_config, count_budget, eligible):
    """Exact max of lam . x under the configuration count bound alone."""
    x = np.zeros(len(lam))
    x[eligible & ~is_config] = 1.0
    cfg = np.flatnonzero(eligible & is_config)
    if cfg.size:
        order = cfg[np.lexsort((cfg, -lam[cfg]))]
        remaining = float(count_budget)
        for e in order:
            if remaining <= 0:
                break
            take = min(1.0, remaining)
            x[e] = take
            remaining -= take
    return x


def _profile_weight(weights_sorted, mass):
    """Weight of filling the given sorted weights fractionally up to mass."""
    total = 0.0
    rem = mass
    for wv in weights_sorted:
        if rem <= 0:
            break
        take = min(1.0, rem)
        total += take * wv
        rem -= take
    return total


def _fill_profile(order, w, mass):
    """Fractional fill along the given index order up to total mass."""
    y = {}
    rem = mass
    for e in order:
        if rem <= 1e-15:
            break
        take = min(1.0, rem)
        y[e] = take
        rem -= take
    return y


def _maximize_block(lam, w, is_config, count_budget, weight_budget):
    n = len(lam)
    eligible = lam > 0
    if not eligible.any():
        return np.zeros(n)

    def count_of(x):
        return float(x[is_config].sum())

    def weight_of(x):
        return float((x * w).sum())

    # nothing binds
    x = np.where(eligible, 1.0, 0.0)
    if _slack_ok(weight_of(x), weight_budget) and (
            count_budget is None or _slack_ok(count_of(x), count_budget)):
        return x

    # only the weight bound binds
    x = _fractional_knapsack(lam, w, weight_budget, eligible)
    if count_budget is None or _slack_ok(count_of(x), count_budget):
        return x

    # only the count bound binds
    x = _count_greedy(lam, is_config, count_budget, eligible)
    if _slack_ok(weight_of(x), weight_budget):
        return x

    return _dual_threshold_solve(lam, w, is_config, count_budget, weight_budget, eligible)


def _dual_threshold_solve(lam, w, is_config, kappa, omega, eligible):
    """Both bounds tight: enumerate dual threshold candidates.

    A dual point (theta, phi) prices configurations at theta + phi * weight
    and singles at phi * weight. The optimal pricing is attained where two
    element lines meet (or on an axis), so all pairwise intersections are
    tried and the cheapest bound is reconstructed into a primal point.
    """
    cfg = np.flatnonzero(eligible & is_config)
    sml = np.flatnonzero(eligible & ~is_config)

    thetas = [0.0]
    phis = [0.0]
    ratio_set = set()
    for e in sml:
        if w[e] > 0:
            ratio_set.add(lam[e] / w[e])
    for e in cfg:
        thetas.append(float(lam[e]))
        phis.append(0.0)
        if w[e] > 0:
            ratio_set.add(lam[e] / w[e])
    for phi in ratio_set:
        if phi < 0:
            continue
        thetas.append(0.0)
        phis.append(float(phi))
        for e in cfg:
            t = lam[e] - phi * w[e]
            if t >= 0:
                thetas.append(float(t))
                phis.append(float(phi))
    for a in range(len(cfg)):
        for b in range(a + 1, len(cfg)):
            e, f = cfg[a], cfg[b]
            if w[e] == w[f]:
                continue
            phi = (lam[e] - lam[f]) / (w[e] - w[f])
            if phi < 0:
                continue
            t = lam[e] - phi * w[e]
            if t >= 0:
                thetas.append(float(t))
                phis.append(float(phi))

    thetas = np.array(thetas)
    phis = np.array(phis)
    a_vec = is_config.astype(float)
    best_dual = np.inf
    best = (0.0, 0.0)
    for start in range(0, len(thetas), 2048):
        tt = thetas[start:start + 2048]
        pp = phis[start:start + 2048]
        rc = lam[None, :] - tt[:, None] * a_vec[None, :] - pp[:, None] * w[None, :]
        dual = tt * kappa + pp * omega + np.clip(rc, 0.0, None).sum(axis=1)
        k = int(np.argmin(dual))
        if dual[k] < best_dual - 1e-15:
            best_dual = float(dual[k])
            best = (float(tt[k]), float(pp[k]))
    theta, phi = best

    scale = max(1.0, float(np.abs(lam).max()))
    tol = 1e-9 * scale
    rc = lam - theta * a_vec - phi * w
    ones = eligible & (rc > tol)
    ties = eligible & (np.abs(rc) <= tol)

    x = np.zeros(len(lam))
    x[ones] = 1.0
    d_kappa = max(kappa - count_of_arr(x, is_config), 0.0)
    d_omega = max(omega - float((x * w).sum()), 0.0)

    tie_cfg = [int(e) for e in np.flatnonzero(ties & is_config)]
    tie_cfg.sort(key=lambda e: (w[e], e))  # lightest first
    tie_sml = [int(e) for e in np.flatnonzero(ties & ~is_config)]
    tie_sml.sort(key=lambda e: (-w[e], e))  # heaviest first

    if theta > tol and phi > tol:
        c_mass = min(d_kappa, float(len(tie_cfg)))
        min_w = _profile_weight([w[e] for e in tie_cfg], c_mass)
        max_w = _profile_weight([w[e] for e in reversed(tie_cfg)], c_mass)
        small_cap = sum(w[e] for e in tie_sml)
        cw = min(max(d_omega - small_cap, min_w), max_w, d_omega)
        y = _fill_profile(tie_cfg, w, c_mass)
        cur = sum(v * w[e] for e, v in y.items())
        lo, hi = 0, len(tie_cfg) - 1
        while cur < cw - 1e-12 and lo < hi:
            e_lo, e_hi = tie_cfg[lo], tie_cfg[hi]
            if y.get(e_lo, 0.0) <= 0:
                lo += 1
                continue
            if y.get(e_hi, 0.0) >= 1:
                hi -= 1
                continue
            dw = w[e_hi] - w[e_lo]
            if dw <= 1e-15:
                break
            move = min(y[e_lo], 1 - y.get(e_hi, 0.0), (cw - cur) / dw)
            y[e_lo] -= move
            y[e_hi] = y.get(e_hi, 0.0) + move
            cur += move * dw
        for e, v in y.items():
            x[e] = v
        rem = max(d_omega - cur, 0.0)
        for e in tie_sml:
            if rem <= 1e-15:
                break
            take = min(1.0, rem / w[e]) if w[e] > 0 else 1.0
            x[e] = take
            rem -= take * w[e]
    elif theta > tol:
        for e, v in _fill_profile(tie_cfg, w, min(d_kappa, float(len(tie_cfg)))).items():
            x[e] = v
    elif phi > tol:
        rem = d_omega
        for e in tie_sml:
            if rem <= 1e-15:
                break
            take = min(1.0, rem / w[e]) if w[e] > 0 else 1.0
            x[e] = take
            rem -= take * w[e]
        heavy_cfg = sorted(tie_cfg, key=lambda e: (-w[e], e))
        c_rem = d_kappa
        for e in heavy_cfg:
            if rem <= 1e-15 or c_rem <= 1e-15:
                break
            take = min(1.0, c_rem, rem / w[e] if w[e] > 0 else 1.0)
            x[e] = take
            rem -= take * w[e]
            c_rem -= take

    # numerical safety: scale back into the polytope if a hair over
    cnt = count_of_arr(x, is_config)
    wt = float((x * w).sum())
    factor = 1.0
    if cnt > kappa and cnt > 0:
        factor = min(factor, kappa / cnt)
    if wt > omega and wt > 0:
        factor = min(factor, omega / wt)
    if factor < 1.0 - 1e-12:
        x = x * factor
    return np.clip(x, 0.0, 1.0)


def count_of_arr(x, is_config):
    return float(x[is_config].sum())


# ---------------------------------------------------------------------------
# Configuration enumeration and instance construction


def large_threshold(mu: float, capacity: float) -> float:
    return mu * capacity


def enumerate_configurations(block: BlockSpec, weights, mu: float,
                             config_cap: int = 10 ** 6):
    """All non-empty sets of large items that fit one bin of the block.

    An item is large for the block when its weight exceeds mu times the
    block capacity; a configuration packs at most floor(1/mu) of them.
    Output is sorted by weight descending, then lexicographic item ids.
    """
    if block.restricted:
        raise InputError("restricted blocks have no configurations")
    if not (0 < mu < 1):
        raise InputError("mu must lie in (0, 1)")
    threshold = large_threshold(mu, block.capacity)
    large = [i for i in sorted(weights) if not fits(weights[i], threshold)]
    large.sort(key=lambda i: (weights[i], i))  # ascending enables subtree pruning
    max_size = math.floor(1.0 / mu + 1e-9)
    found = []

    def extend(start, chosen, total):
        if len(found) > config_cap:
            raise ConfigurationBudgetError(
                f"more than {config_cap} configurations for block {block.index}; "
                "increase mu or raise the configuration cap")
        if chosen:
            found.append((frozenset(chosen), total))
        if len(chosen) >= max_size:
            return
        for pos in range(start, len(large)):
            item = large[pos]
            if not fits(total + weights[item], block.capacity):
                break  # weights ascend, nothing later fits either
            chosen.append(item)
            extend(pos + 1, chosen, total + weights[item])
            chosen.pop()

    extend(0, [], 0.0)
    elems = [Element(items=s, block=block.index, weight=t, is_configuration=True)
             for s, t in found]
    elems.sort(key=lambda e: e.sort_key())
    return elems


@dataclass
class BlockConstraintInstance:
    blocks: tuple
    elements: tuple
    polytope: BlockPolytope
    oracle: LiftedOracle
    mu: float
    delta: float
    restricted: RestrictedInstance

    def element_set(self):
        return frozenset(self.elements)

    def point(self, vector) -> FractionalPoint:
        return FractionalPoint(self.elements, vector)


def build_block_instance(restricted: RestrictedInstance, ublocks, mu: float,
                         config_cap: int = 10 ** 6) -> BlockConstraintInstance:
    """Element universe, polytope and lifted objective for a restricted
    instance whose unrestricted bins are pre-partitioned into blocks.

    Restricted bins become singleton blocks appended after the k
    unrestricted ones; the empty configuration is excluded.
    """
    base = restricted.base
    covered = set()
    blocks = []
    for j, bin_ids in enumerate(ublocks):
        bin_ids = tuple(bin_ids)
        if not bin_ids:
            raise InputError(f"unrestricted block {j} is empty")
        caps = {base.capacities[b] for b in bin_ids}
        if len(caps) != 1:
            raise InputError(f"unrestricted block {j} mixes capacities {sorted(caps)}")
        overlap = covered & set(bin_ids)
        if overlap:
            raise InputError(f"bins {sorted(overlap)} appear in two blocks")
        if set(bin_ids) & restricted.restricted_bins:
            raise InputError(f"block {j} contains restricted bins")
        covered.update(bin_ids)
        blocks.append(BlockSpec(index=j, bin_ids=bin_ids,
                                capacity=caps.pop(), restricted=False))
    if covered | restricted.restricted_bins != set(base.bin_ids):
        raise InputError("blocks plus restricted bins must cover every bin exactly")
    k = len(blocks)
    for offset, b in enumerate(sorted(restricted.restricted_bins)):
        blocks.append(BlockSpec(index=k + offset, bin_ids=(b,),
                                capacity=base.capacities[b], restricted=True))

    elements = []
    for spec in blocks:
        if spec.restricted:
            bound = restricted.delta * spec.capacity
        else:
            elements.extend(enumerate_configurations(spec, base.weights, mu, config_cap))
            bound = large_threshold(mu, spec.capacity)
        for i in base.item_ids:
            if fits(base.weights[i], bound):
                elements.append(Element(items=frozenset([i]), block=spec.index,
                                        weight=base.weights[i], is_configuration=False))
    elements.sort(key=lambda e: e.sort_key())
    polytope = BlockPolytope(blocks, elements)
    oracle = LiftedOracle(base.objective, elements)
    return BlockConstraintInstance(blocks=tuple(blocks), elements=tuple(elements),
                                   polytope=polytope, oracle=oracle,
                                   mu=mu, delta=restricted.delta, restricted=restricted)


def assignment_to_elements(bci: BlockConstraintInstance,
                           assignment: Assignment) -> frozenset:
    """Translate a feasible restricted assignment into an element set.

    Each bin's content splits into its large part (one configuration) and
    small singletons; restricted bins contribute singletons only. The
    translated set is integral-feasible in the polytope and has the same
    objective value as the assignment.
    """
    base = bci.restricted.base
    block_of = {}
    for spec in bci.blocks:
        for b in spec.bin_ids:
            block_of[b] = spec
    universe = bci.element_set()
    chosen = set()
    for b, items in assignment.bins.items():
        spec = block_of.get(b)
        if spec is None:
            raise InputError(f"unknown bin {b!r}")
        if spec.restricted:
            singles = sorted(items)
            large = []
        else:
            threshold = large_threshold(bci.mu, spec.capacity)
            large = [i for i in sorted(items) if not fits(base.weights[i], threshold)]
            singles = [i for i in sorted(items) if fits(base.weights[i], threshold)]
        if large:
            e = Element(items=frozenset(large), block=spec.index,
                        weight=base.weight_of(large), is_configuration=True)
            if e not in universe:
                raise InputError(f"bin {b!r}: large part does not form a known configuration")
            chosen.add(e)
        for i in singles:
            e = Element(items=frozenset([i]), block=spec.index,
                        weight=base.weights[i], is_configuration=False)
            if e not in universe:
                raise InputError(f"bin {b!r}: item {i!r} is not a known element")
            chosen.add(e)
    return frozenset(chosen)


def block_instance_to_dict(bci: BlockConstraintInstance) -> dict:
    """Debug dump of the element universe and polytope bounds."""
    return {
        "mu": bci.mu,
        "delta": bci.delta,
        "blocks": [
            {
                "index": spec.index,
                "bins": list(spec.bin_ids),
                "capacity": spec.capacity,
                "restricted": spec.restricted,
                "count_bound": (None if spec.restricted else len(spec.bin_ids)),
                "weight_bound": len(spec.bin_ids) * spec.capacity,
            }
            for spec in bci.blocks
        ],
        "elements": [
            {
                "items": sorted(e.items),
                "block": e.block,
                "weight": e.weight,
                "configuration": e.is_configuration,
            }
            for e in bci.elements
        ],
    }
