"""Canonical data model: instances, assignments, feasibility, JSON I/O and
seeded random instance generation.

An assignment may legally place one item in several bins; the objective is
union-valued so the duplicate is harmless, and dedup_assignment offers an
optional normalization pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .extension import rng_for
from .objectives import (
    CoverageObjective,
    GroupSaturationObjective,
    ModularObjective,
    Oracle,
)

_FIT_REL = 1e-9
_FIT_ABS = 1e-12


def fits(load: float, capacity: float) -> bool:
    """Capacity test with the package-wide float tolerance."""
    return load <= capacity + max(_FIT_ABS, _FIT_REL * abs(capacity))


class Assignment:
    """Per-bin item sets; bins absent from the map hold the empty set."""

    def __init__(self, bins=None):
        data = {}
        for b, items in (bins or {}).items():
            items = frozenset(items)
            if items:
                data[b] = items
        self._bins = data

    @property
    def bins(self) -> dict:
        return dict(self._bins)

    def items_in(self, bin_id) -> frozenset:
        return self._bins.get(bin_id, frozenset())

    def union_items(self) -> frozenset:
        out: frozenset = frozenset()
        for items in self._bins.values():
            out |= items
        return out

    def total_items(self) -> int:
        return sum(len(s) for s in self._bins.values())

    def is_disjoint(self) -> bool:
        return self.total_items() == len(self.union_items())

    def merged_with(self, other: "Assignment") -> "Assignment":
        data = {b: set(s) for b, s in self._bins.items()}
        for b, s in other._bins.items():
            data.setdefault(b, set()).update(s)
        return Assignment(data)

    def to_dict(self) -> dict:
        return {b: sorted(self._bins[b]) for b in sorted(self._bins)}

    @classmethod
    def from_dict(cls, data) -> "Assignment":
        if not isinstance(data, dict):
            raise InputError("assignment must be a mapping of bin to item list")
        return cls({b: list(items) for b, items in data.items()})

    def __eq__(self, other):
        return isinstance(other, Assignment) and self._bins == other._bins

    def __hash__(self):
        return hash(frozenset(self._bins.items()))

    def __repr__(self):
        return f"Assignment({self.to_dict()})"


class SmkpInstance:
    """Items with weights, bins with capacities, and an objective oracle."""

    def __init__(self, items, bins, objective: Oracle):
        item_ids = [i for i, _ in items]
        bin_ids = [b for b, _ in bins]
        if len(set(item_ids)) != len(item_ids):
            raise InputError("duplicate item ids")
        if len(set(bin_ids)) != len(bin_ids):
            raise InputError("duplicate bin ids")
        self.item_ids = tuple(item_ids)
        self.bin_ids = tuple(bin_ids)
        self.weights = {}
        for i, w in items:
            w = float(w)
            if not np.isfinite(w) or w < 0:
                raise InputError(f"item {i!r} has invalid weight {w}")
            self.weights[i] = w
        self.capacities = {}
        for b, c in bins:
            c = float(c)
            if not np.isfinite(c) or c < 0:
                raise InputError(f"bin {b!r} has invalid capacity {c}")
            self.capacities[b] = c
        missing = set(self.item_ids) - set(objective.ids)
        if missing:
            raise InputError(f"objective does not cover items {sorted(missing)}")
        self.objective = objective

    @property
    def n(self) -> int:
        return len(self.item_ids)

    @property
    def m(self) -> int:
        return len(self.bin_ids)

    def weight_of(self, items) -> float:
        total = 0.0
        for i in items:
            if i not in self.weights:
                raise InputError(f"unknown item {i!r}")
            total += self.weights[i]
        return total


@dataclass
class RestrictedInstance:
    """SMKP instance where designated bins accept only small items.

    An assignment is feasible when every bin load fits and every item
    placed in a restricted bin weighs at most delta times that bin's
    capacity.
    """

    base: SmkpInstance
    restricted_bins: frozenset
    delta: float

    def __post_init__(self):
        self.restricted_bins = frozenset(self.restricted_bins)
        unknown = self.restricted_bins - set(self.base.bin_ids)
        if unknown:
            raise InputError(f"unknown restricted bins {sorted(unknown)}")
        if not (0 < self.delta <= 1):
            raise InputError("delta must lie in (0, 1]")


@dataclass
class Feasibility:
    ok: bool
    violation: str | None = None

    def __bool__(self):
        return self.ok


def check_feasible(instance, assignment: Assignment) -> Feasibility:
    """True iff every bin load fits its capacity; restricted instances also
    enforce the per-item smallness rule on restricted bins.

    Returns the first violation found, scanning bins in id order.
    """
    if isinstance(instance, RestrictedInstance):
        base, restricted, delta = instance.base, instance.restricted_bins, instance.delta
    else:
        base, restricted, delta = instance, frozenset(), None
    for b in sorted(assignment.bins):
        if b not in base.capacities:
            raise InputError(f"unknown bin {b!r}")
        items = assignment.items_in(b)
        load = base.weight_of(items)
        cap = base.capacities[b]
        if not fits(load, cap):
            return Feasibility(False, f"bin {b!r}: load {load:.6g} exceeds capacity {cap:.6g}")
        if b in restricted:
            for i in sorted(items):
                if not fits(base.weights[i], delta * cap):
                    return Feasibility(
                        False,
                        f"bin {b!r}: item {i!r} of weight {base.weights[i]:.6g} "
                        f"exceeds smallness bound {delta * cap:.6g}",
                    )
    return Feasibility(True)


def assignment_value(instance, assignment: Assignment) -> float:
    """Objective value of the union of all assigned sets."""
    base = instance.base if isinstance(instance, RestrictedInstance) else instance
    return base.objective.value(assignment.union_items())


def dedup_assignment(assignment: Assignment) -> Assignment:
    """Keep each item only in the first bin (by id order) it appears in."""
    seen: set = set()
    out = {}
    for b in sorted(assignment.bins):
        kept = [i for i in sorted(assignment.items_in(b)) if i not in seen]
        seen.update(kept)
        if kept:
            out[b] = frozenset(kept)
    return Assignment(out)


# ---------------------------------------------------------------------------
# JSON schema


_OBJECTIVE_KEYS = {
    "modular": {"type", "values"},
    "weighted_coverage": {"type", "universe", "covers"},
    "group_saturation": {"type", "caps", "contrib"},
}


def objective_to_dict(objective: Oracle) -> dict:
    if isinstance(objective, ModularObjective):
        return {"type": "modular", "values": dict(objective.item_values)}
    if isinstance(objective, CoverageObjective):
        return {
            "type": "weighted_coverage",
            "universe": dict(objective.universe),
            "covers": {i: sorted(objective.covers[i]) for i in objective.ids},
        }
    if isinstance(objective, GroupSaturationObjective):
        return {
            "type": "group_saturation",
            "caps": dict(objective.caps),
            "contrib": {i: dict(objective.contrib[i]) for i in objective.ids},
        }
    raise InputError(f"objective kind {objective.kind!r} has no file representation")


def objective_from_dict(data) -> Oracle:
    if not isinstance(data, dict) or "type" not in data:
        raise InputError("objective must be a mapping with a 'type' key")
    kind = data["type"]
    expected = _OBJECTIVE_KEYS.get(kind)
    if expected is None:
        raise InputError(f"unknown objective type {kind!r}")
    extra = set(data) - expected
    if extra:
        raise InputError(f"unknown objective keys {sorted(extra)}")
    missing = expected - set(data)
    if missing:
        raise InputError(f"objective missing keys {sorted(missing)}")
    if kind == "modular":
        return ModularObjective(data["values"])
    if kind == "weighted_coverage":
        return CoverageObjective(data["universe"], data["covers"])
    return GroupSaturationObjective(data["caps"], data["contrib"])


def instance_to_dict(instance: SmkpInstance) -> dict:
    return {
        "items": [{"id": i, "weight": instance.weights[i]} for i in instance.item_ids],
        "bins": [{"id": b, "capacity": instance.capacities[b]} for b in instance.bin_ids],
        "objective": objective_to_dict(instance.objective),
    }


def instance_from_dict(data) -> SmkpInstance:
    if not isinstance(data, dict):
        raise InputError("instance file must contain a JSON object")
    extra = set(data) - {"items", "bins", "objective"}
    if extra:
        raise InputError(f"unknown instance keys {sorted(extra)}")
    for key in ("items", "bins", "objective"):
        if key not in data:
            raise InputError(f"instance missing key {key!r}")
    items = []
    for row in data["items"]:
        if not isinstance(row, dict) or set(row) != {"id", "weight"}:
            raise InputError("each item must be an object with keys id and weight")
        items.append((row["id"], row["weight"]))
    bins = []
    for row in data["bins"]:
        if not isinstance(row, dict) or set(row) != {"id", "capacity"}:
            raise InputError("each bin must be an object with keys id and capacity")
        bins.append((row["id"], row["capacity"]))
    objective = objective_from_dict(data["objective"])
    if set(i for i, _ in items) != set(objective.ids):
        raise InputError("objective ground set must match the item list")
    return SmkpInstance(items, bins, objective)


def dumps_canonical(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def serialize_instance(instance: SmkpInstance) -> str:
    return dumps_canonical(instance_to_dict(instance))


def parse_instance(text: str) -> SmkpInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from exc
    return instance_from_dict(data)


# ---------------------------------------------------------------------------
# Random instance generation


def _round4(x):
    return float(np.round(x, 4))


def _capacities(rng, profile, m, budget):
    if profile == "uniform":
        raw = np.ones(m)
    elif profile == "geometric":
        ratio = rng.uniform(0.45, 0.75)
        raw = ratio ** np.arange(m)
    elif profile == "random":
        raw = rng.uniform(0.5, 1.5, size=m)
    else:
        raise InputError(f"unknown capacity profile {profile!r}")
    return budget * raw / raw.sum()


def generate_instance(kind, n, m, seed, capacity_profile="random") -> SmkpInstance:
    """Seed-deterministic random instance.

    Weights are drawn from [1, 100]; total capacity is a 35-80% fraction of
    the total weight, split across bins by the requested profile, so a
    typical optimum packs roughly a third to four fifths of the items.
    """
    if n < 1 or m < 1:
        raise InputError("need at least one item and one bin")
    if kind not in ("modular", "coverage", "group_saturation"):
        raise InputError(f"unknown instance kind {kind!r}")
    rng = rng_for(seed)
    pad = max(3, len(str(n)))
    item_ids = [f"i{idx:0{pad}d}" for idx in range(1, n + 1)]
    bin_ids = [f"b{idx}" for idx in range(1, m + 1)]
    weights = rng.uniform(1.0, 100.0, size=n)
    budget = rng.uniform(0.35, 0.8) * weights.sum()
    caps = _capacities(rng, capacity_profile, m, budget)

    if kind == "modular":
        values = {i: _round4(v) for i, v in zip(item_ids, rng.uniform(1.0, 100.0, size=n))}
        objective = ModularObjective(values)
    elif kind == "coverage":
        u_count = max(4, 2 * n)
        universe = {f"u{idx:03d}": _round4(w)
                    for idx, w in enumerate(rng.uniform(1.0, 10.0, size=u_count), start=1)}
        elems = list(universe)
        covers = {}
        for i in item_ids:
            size = int(rng.integers(1, max(2, u_count // 3) + 1))
            chosen = rng.choice(len(elems), size=size, replace=False)
            covers[i] = sorted(elems[j] for j in chosen)
        objective = CoverageObjective(universe, covers)
    else:
        g_count = max(2, n // 2)
        groups = [f"g{idx}" for idx in range(1, g_count + 1)]
        contrib = {}
        totals = dict.fromkeys(groups, 0.0)
        for i in item_ids:
            size = int(rng.integers(1, min(3, g_count) + 1))
            chosen = rng.choice(g_count, size=size, replace=False)
            row = {}
            for j in chosen:
                v = _round4(rng.uniform(1.0, 10.0))
                row[groups[j]] = v
                totals[groups[j]] += v
            contrib[i] = row
        caps_g = {g: _round4(rng.uniform(0.3, 0.7) * max(totals[g], 1.0)) for g in groups}
        objective = GroupSaturationObjective(caps_g, contrib)

    items = [(i, _round4(w)) for i, w in zip(item_ids, weights)]
    bins = [(b, _round4(c)) for b, c in zip(bin_ids, caps)]
    return SmkpInstance(items, bins, objective)
