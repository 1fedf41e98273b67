"""Monotone submodular objectives behind a counted oracle interface.

Three concrete kinds are shipped: modular sums, weighted coverage and
capped group saturation. All are normalized (the empty set evaluates to
zero) and expose both single-set and boolean-mask batch evaluation; the
batch path is what the samplers and the continuous greedy lean on.

Wrappers derive new oracles from existing ones: ResidualOracle for the
gain over a fixed anchor set, AnchoredOracle for evaluation with the
anchor merged in, and LiftedOracle for universes whose elements each carry
a set of base items. All wrappers forward evaluation to the base oracle,
so the base call counter keeps counting true objective accesses.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SizeLimitError

REL_TOL = 1e-9
ABS_TOL = 1e-12


def close(a: float, b: float) -> bool:
    """Relative comparison at 1e-9 with a 1e-12 absolute floor."""
    return abs(a - b) <= max(ABS_TOL, REL_TOL * max(abs(a), abs(b)))


def _check_finite_nonneg(name, values):
    arr = np.asarray(list(values), dtype=float)
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0):
        raise InputError(f"{name} must be finite and non-negative")


class Oracle:
    """Base oracle: id bookkeeping, call counting, mask conversion."""

    kind = "abstract"

    def __init__(self, ids):
        ids = tuple(ids)
        if len(set(ids)) != len(ids):
            raise InputError("duplicate identifiers in ground set")
        self.ids = ids
        self._index = {x: i for i, x in enumerate(ids)}
        self.calls = 0
        self._calls_lock = threading.Lock()

    def __len__(self):
        return len(self.ids)

    def mask_of(self, items) -> np.ndarray:
        mask = np.zeros(len(self.ids), dtype=bool)
        for x in items:
            pos = self._index.get(x)
            if pos is None:
                raise InputError(f"unknown item {x!r}")
            mask[pos] = True
        return mask

    def set_of(self, mask) -> frozenset:
        return frozenset(self.ids[i] for i in np.flatnonzero(mask))

    def batch_values(self, masks) -> np.ndarray:
        """Evaluate one row per subset mask; counts one call per row."""
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        if masks.shape[1] != len(self.ids):
            raise InputError("mask width does not match ground set size")
        with self._calls_lock:
            self.calls += int(masks.shape[0])
        return self._values(masks)

    def value(self, items) -> float:
        return float(self.batch_values(self.mask_of(items)[None, :])[0])

    def marginal(self, items, item) -> float:
        """Gain of adding one item; zero when it is already present."""
        items = frozenset(items)
        if item in items:
            return 0.0
        pair = np.vstack([self.mask_of(items), self.mask_of(items | {item})])
        lo, hi = self.batch_values(pair)
        return float(hi - lo)

    def _values(self, masks) -> np.ndarray:
        raise NotImplementedError


class ModularObjective(Oracle):
    kind = "modular"

    def __init__(self, values):
        super().__init__(values.keys())
        _check_finite_nonneg("item values", values.values())
        self.item_values = {i: float(values[i]) for i in self.ids}
        self._vec = np.array([self.item_values[i] for i in self.ids])

    def _values(self, masks):
        return masks @ self._vec


class CoverageObjective(Oracle):
    """Weighted coverage: value of a set is the total weight of universe
    elements covered by at least one chosen item."""

    kind = "weighted_coverage"

    def __init__(self, universe, covers):
        super().__init__(covers.keys())
        _check_finite_nonneg("universe weights", universe.values())
        self.universe = {u: float(w) for u, w in universe.items()}
        elems = tuple(self.universe)
        epos = {u: i for i, u in enumerate(elems)}
        cover = np.zeros((len(self.ids), len(elems)), dtype=bool)
        clean = {}
        for r, item in enumerate(self.ids):
            for u in covers[item]:
                if u not in epos:
                    raise InputError(f"item {item!r} covers unknown element {u!r}")
                cover[r, epos[u]] = True
            clean[item] = frozenset(covers[item])
        self.covers = clean
        self._cover = cover
        self._weights = np.array([self.universe[u] for u in elems])

    def _values(self, masks):
        covered = (masks @ self._cover) > 0
        return covered @ self._weights


class GroupSaturationObjective(Oracle):
    """Sum over groups of min(cap, total contribution of chosen items)."""

    kind = "group_saturation"

    def __init__(self, caps, contrib):
        super().__init__(contrib.keys())
        _check_finite_nonneg("group caps", caps.values())
        self.caps = {g: float(c) for g, c in caps.items()}
        groups = tuple(self.caps)
        gpos = {g: i for i, g in enumerate(groups)}
        mat = np.zeros((len(self.ids), len(groups)))
        clean = {}
        for r, item in enumerate(self.ids):
            row = {}
            for g, v in contrib[item].items():
                if g not in gpos:
                    raise InputError(f"item {item!r} contributes to unknown group {g!r}")
                if not np.isfinite(v) or v < 0:
                    raise InputError("contributions must be finite and non-negative")
                mat[r, gpos[g]] = float(v)
                row[g] = float(v)
            clean[item] = row
        self.contrib = clean
        self._mat = mat
        self._caps = np.array([self.caps[g] for g in groups])

    def _values(self, masks):
        return np.minimum(masks @ self._mat, self._caps).sum(axis=1)


class ResidualOracle(Oracle):
    """Gain over a fixed anchor set: value(S) = base(anchor | S) - base(anchor)."""

    kind = "residual"

    def __init__(self, base, anchor):
        super().__init__(base.ids)
        self.base = base
        self.anchor = frozenset(anchor)
        self._anchor_mask = base.mask_of(self.anchor)
        self.anchor_value = base.value(self.anchor)

    def _values(self, masks):
        return self.base.batch_values(masks | self._anchor_mask) - self.anchor_value


class AnchoredOracle(Oracle):
    """Evaluation with the anchor merged in: value(S) = base(anchor | S)."""

    kind = "anchored"

    def __init__(self, base, anchor):
        super().__init__(base.ids)
        self.base = base
        self.anchor = frozenset(anchor)
        self._anchor_mask = base.mask_of(self.anchor)

    def _values(self, masks):
        return self.base.batch_values(masks | self._anchor_mask)


def element_items(element):
    """Item set carried by a lifted-universe element.

    Accepts objects with an ``items`` attribute or (item set, tag) pairs.
    """
    items = getattr(element, "items", None)
    if items is None:
        items = element[0]
    return items


class LiftedOracle(Oracle):
    """Objective over elements that each carry a set of base items.

    The value of an element set is the base value of the union of the
    carried item sets, so an item shared by several elements counts once.
    """

    kind = "lifted"

    def __init__(self, base, elements):
        super().__init__(elements)
        self.base = base
        inc = np.zeros((len(self.ids), len(base.ids)), dtype=bool)
        for r, e in enumerate(self.ids):
            inc[r] = base.mask_of(element_items(e))
        self._incidence = inc

    def _values(self, masks):
        return self.base.batch_values((masks @ self._incidence) > 0)


@dataclass
class SubmodularityReport:
    ok: bool
    monotone_ok: bool
    submodular_ok: bool
    normalized: bool
    evaluations: int
    violation: tuple | None = None  # (kind, smaller set, larger set, item)


def check_submodular_monotone(oracle, max_ground: int = 10) -> SubmodularityReport:
    """Exhaustively verify monotonicity and submodularity of an oracle.

    Enumerates all 2^n subset values once and checks every single-item
    marginal comparison; reports the first violating triple found.
    """
    n = len(oracle.ids)
    if max_ground > 12:
        raise SizeLimitError("exhaustive check is limited to ground sets of size 12")
    if n > max_ground:
        raise SizeLimitError(f"ground set of size {n} exceeds max_ground={max_ground}")
    total = 1 << n
    idx = np.arange(total)
    masks = ((idx[:, None] >> np.arange(n)) & 1).astype(bool)
    vals = oracle.batch_values(masks)
    scale = max(1.0, float(np.abs(vals).max())) if total else 1.0
    tol = max(ABS_TOL, REL_TOL * scale)

    normalized = abs(float(vals[0])) <= tol
    violation = None
    monotone_ok = True
    submodular_ok = True

    for i in range(n):
        bit = 1 << i
        # marginal of item i on every subset (zero where i already present)
        marg = vals[idx | bit] - vals
        without_i = idx[(idx & bit) == 0]
        bad = np.flatnonzero(marg[without_i] < -tol)
        if bad.size and monotone_ok:
            monotone_ok = False
            m = int(without_i[bad[0]])
            violation = violation or (
                "monotonicity",
                oracle.set_of(masks[m]),
                oracle.set_of(masks[m | bit]),
                oracle.ids[i],
            )
        for j in range(n):
            if j == i:
                continue
            bj = 1 << j
            base_masks = without_i[(without_i & bj) == 0]
            bad = np.flatnonzero(marg[base_masks | bj] > marg[base_masks] + tol)
            if bad.size and submodular_ok:
                submodular_ok = False
                m = int(base_masks[bad[0]])
                violation = violation or (
                    "submodularity",
                    oracle.set_of(masks[m]),
                    oracle.set_of(masks[m | bj]),
                    oracle.ids[i],
                )
    return SubmodularityReport(
        ok=monotone_ok and submodular_ok,
        monotone_ok=monotone_ok,
        submodular_ok=submodular_ok,
        normalized=normalized,
        evaluations=total,
        violation=violation,
    )


def least_marginal_part(oracle, parts) -> int:
    """Index of the disjoint part with the smallest prefix marginal.

    Scanning the parts in the given order, returns the (0-based) index r
    minimizing value(parts[0] | ... | parts[r]) - value(parts[0] | ... |
    parts[r-1]). Dropping that part keeps at least a (1 - 1/N) fraction of
    the value of the full union, N being the number of parts.
    """
    parts = [frozenset(p) for p in parts]
    if not parts:
        raise InputError("at least one part is required")
    union = frozenset().union(*parts)
    if sum(len(p) for p in parts) != len(union):
        raise InputError("parts must be pairwise disjoint")
    acc: frozenset = frozenset()
    values = [oracle.value(acc)]
    for part in parts:
        acc = acc | part
        values.append(oracle.value(acc))
    margins = [values[r + 1] - values[r] for r in range(len(parts))]
    return int(np.argmin(margins))
