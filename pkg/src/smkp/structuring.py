"""Leveled block structuring of bin capacities.

Bins are sorted by capacity (descending, ties by id) and grouped into
blocks whose sizes grow geometrically: block j holds N^(j // N^2) bins, so
each run of N^2 consecutive blocks forms a level and every block of one
level is N times larger than a block of the previous level. Capacities are
reduced to the block minimum and trailing bins that do not fill a block
are discarded.

transform_assignment rewrites any feasible assignment for the original
bins into one feasible for the reduced capacities while keeping at least a
(1 - 1/N) fraction of its value. It proceeds in three steps: evict the
super-block column with the least marginal value, shuffle the surviving
last-column contents into the evicted slots, and shift every level's
blocks one position back so the head block of the next level lands in the
freed super-block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InputError
from .instance import Assignment, SmkpInstance, check_feasible, fits
from .objectives import AnchoredOracle, least_marginal_part


@dataclass
class LeveledStructure:
    order: tuple  # all bins, capacity-descending (ties by id)
    blocks: tuple  # tuple of bin-id tuples, block j has N^(j // N^2) bins
    reduced: dict  # surviving bin id -> reduced capacity
    n_level: int

    k: int = field(init=False)
    survivors: tuple = field(init=False)
    discarded: tuple = field(init=False)

    def __post_init__(self):
        self.k = len(self.blocks) - 1
        count = sum(len(b) for b in self.blocks)
        self.survivors = self.order[:count]
        self.discarded = self.order[count:]

    def level_of(self, j: int) -> int:
        return j // (self.n_level * self.n_level)

    def block_sizes(self):
        return tuple(len(b) for b in self.blocks)


def block_size(n_level: int, j: int) -> int:
    return n_level ** (j // (n_level * n_level))


def build_leveled_structure(capacities, n_level: int) -> LeveledStructure:
    """Group capacity-sorted bins into leveled blocks with reduced capacities.

    The number of blocks is the largest k+1 whose total size fits the bin
    count; remaining bins are discarded. Every bin's capacity drops to the
    minimum over its block, which is the capacity of the block's last bin.
    """
    if n_level < 2:
        raise InputError("the leveling base must be at least 2")
    if not capacities:
        raise InputError("at least one bin is required")
    order = [b for b, _ in sorted(capacities.items(), key=lambda kv: (-kv[1], kv[0]))]
    m = len(order)
    blocks = []
    reduced = {}
    start = 0
    j = 0
    while start + block_size(n_level, j) <= m:
        size = block_size(n_level, j)
        members = tuple(order[start:start + size])
        floor_cap = capacities[members[-1]]  # minimum: bins sorted descending
        for b in members:
            reduced[b] = floor_cap
        blocks.append(members)
        start += size
        j += 1
    return LeveledStructure(order=tuple(order), blocks=tuple(blocks),
                            reduced=reduced, n_level=n_level)


def _super_block(n_level: int, j: int) -> int:
    return (j % (n_level * n_level)) // n_level


def transform_assignment(instance: SmkpInstance, leveled: LeveledStructure,
                         assignment: Assignment) -> Assignment:
    """Rewrite a feasible assignment for the leveled capacities.

    Requires the input to be feasible for the original capacities and to
    use pairwise disjoint bin sets (dedup first if needed). The output is
    feasible for the reduced capacities of the surviving bins, its item
    union is contained in the input's union, and its value is at least
    (1 - 1/N) times the input value.
    """
    n = leveled.n_level
    nn = n * n
    order = leveled.order
    m = len(order)
    pos_of = {b: p for p, b in enumerate(order)}

    verdict = check_feasible(instance, assignment)
    if not verdict:
        raise InputError(f"assignment is not feasible for the original capacities: "
                         f"{verdict.violation}")
    if not assignment.is_disjoint():
        raise InputError("assignment must use pairwise disjoint bin sets")

    content = [frozenset()] * m
    for b, items in assignment.bins.items():
        if b not in pos_of:
            raise InputError(f"unknown bin {b!r}")
        content[pos_of[b]] = items

    survivors = len(leveled.survivors)
    # block index per position; trailing discarded bins act as block k+1
    block_of = [0] * m
    p = 0
    for j, members in enumerate(leveled.blocks):
        for _ in members:
            block_of[p] = j
            p += 1
    for q in range(p, m):
        block_of[q] = leveled.k + 1

    ell = (leveled.k + 1) // nn
    if ell == 0:
        # every block is a singleton with its original capacity; nothing moves
        return Assignment({order[q]: content[q] for q in range(survivors) if content[q]})

    def positions_of_super(t, r):
        lo_block = t * nn + r * n
        out = []
        for q in range(m):
            if lo_block <= block_of[q] < lo_block + n:
                out.append(q)
        return out

    # eviction: pick the super-block column with the least prefix marginal,
    # anchoring on the items of the last level which are never evicted
    last_level_items: frozenset = frozenset()
    for q in range(m):
        if block_of[q] // nn == ell:
            last_level_items |= content[q]
    parts = []
    for r in range(n):
        part: frozenset = frozenset()
        for t in range(ell):
            for q in positions_of_super(t, r):
                part |= content[q]
        parts.append(part)
    r_star = least_marginal_part(AnchoredOracle(instance.objective, last_level_items), parts)

    evicted = [False] * m
    for t in range(ell):
        for q in positions_of_super(t, r_star):
            evicted[q] = True
    moved = [frozenset() if evicted[q] else content[q] for q in range(m)]

    # shuffle: move the last column's contents into the evicted column
    if r_star != n - 1:
        for t in range(ell):
            dst = positions_of_super(t, r_star)
            src = positions_of_super(t, n - 1)
            for a, b in zip(dst, src):
                moved[a] = moved[b]
                moved[b] = frozenset()

    def pull(q):
        return moved[q] if q < m else frozenset()

    # shift: last super-block of level t receives the head block of level
    # t+1; other blocks receive their successor within the level; the first
    # n^2 - n singleton bins stay in place
    shifted = [frozenset()] * survivors
    for q in range(survivors):
        j = block_of[q]
        t = j // nn
        if q < nn - n:
            shifted[q] = moved[q]
        elif t < ell and _super_block(n, j) == n - 1:
            shifted[q] = pull(q + n ** (t + 1))
        elif t < ell:
            shifted[q] = pull(q + n ** t)
        else:
            shifted[q] = pull(q + n ** ell)

    out = Assignment({order[q]: shifted[q] for q in range(survivors) if shifted[q]})
    for b, items in out.bins.items():
        load = instance.weight_of(items)
        if not fits(load, leveled.reduced[b]):
            raise AssertionError(
                f"internal error: shifted load {load} exceeds reduced capacity "
                f"{leveled.reduced[b]} of bin {b!r}")
    return out
