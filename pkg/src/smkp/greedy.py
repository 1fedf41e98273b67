"""Continuous greedy ascent of the multilinear extension over the block
polytope.

Each step samples a batch of random element sets from the current point
and estimates every coordinate's partial derivative with common random
numbers: the mean of value(set with e forced in) - value(set with e forced
out) over one sample batch shared by all coordinates. The linear oracle
turns the gradient estimate into the best direction and the point advances
by 1/steps of it, so the result is a convex combination of polytope points
and lies in the polytope itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockPolytope, FractionalPoint
from .errors import InputError
from .extension import rng_for
from .objectives import LiftedOracle

_ROW_CHUNK = 1 << 15


@dataclass
class GreedyConfig:
    steps: int = 100
    samples: int = 200
    seed: int = 0
    track_values: bool = False

    def __post_init__(self):
        if self.steps < 1 or self.samples < 1:
            raise InputError("steps and samples must be positive")

    def with_seed(self, seed: int) -> "GreedyConfig":
        return GreedyConfig(steps=self.steps, samples=self.samples,
                            seed=seed, track_values=self.track_values)


@dataclass
class ContinuousGreedyResult:
    point: FractionalPoint
    trace: list = field(default_factory=list)


def _estimate_gradient(oracle: LiftedOracle, draws: np.ndarray):
    """Partial-derivative estimate per element over shared sample rows.

    For each element the same sample batch is evaluated once with the
    element forced in and once forced out; the mean difference estimates
    the derivative of the extension in that coordinate (for a modular
    objective it is exact). Also returns the mean and standard error of
    the sampled extension value at the current point.
    """
    s, n = draws.shape
    base = oracle.batch_values(draws)
    lam = np.empty(n)
    # forced-in and forced-out rows in chunks of columns to bound memory
    per = max(1, _ROW_CHUNK // max(2 * s, 1))
    for start in range(0, n, per):
        cols = range(start, min(start + per, n))
        stacked = np.tile(draws, (2 * len(cols), 1))
        for row, e in enumerate(cols):
            stacked[2 * row * s:(2 * row + 1) * s, e] = True
            stacked[(2 * row + 1) * s:(2 * row + 2) * s, e] = False
        vals = oracle.batch_values(stacked)
        for row, e in enumerate(cols):
            forced_in = vals[2 * row * s:(2 * row + 1) * s]
            forced_out = vals[(2 * row + 1) * s:(2 * row + 2) * s]
            lam[e] = float((forced_in - forced_out).mean())
    se = float(base.std(ddof=1) / np.sqrt(s)) if s > 1 else 0.0
    return lam, float(base.mean()), se


def continuous_greedy(oracle: LiftedOracle, polytope: BlockPolytope,
                      cfg: GreedyConfig) -> ContinuousGreedyResult:
    """Maximize the (sampled) multilinear extension over the polytope.

    Deterministic for a fixed seed. The returned point is the average of
    the per-step oracle outputs and therefore lies in the polytope.
    """
    elements = polytope.elements
    n = len(elements)
    if n == 0:
        return ContinuousGreedyResult(point=FractionalPoint.zeros(elements))
    rng = rng_for(cfg.seed)
    x = np.zeros(n)
    trace = []
    for step in range(cfg.steps):
        draws = rng.random((cfg.samples, n)) < x
        lam, current, se = _estimate_gradient(oracle, draws)
        direction = polytope.linear_maximize(lam)
        x = x + direction / cfg.steps
        if cfg.track_values:
            trace.append({
                "step": step,
                "estimate": current,
                "estimate_se": se,
                "oracle_value": float(lam @ direction),
            })
    point = FractionalPoint(elements, np.clip(x, 0.0, 1.0))
    return ContinuousGreedyResult(point=point, trace=trace)


def scale_point(point: FractionalPoint, mu: float) -> FractionalPoint:
    """Shrink a point by (1 - mu) / (1 + mu) coordinate-wise.

    Along rays from the origin the multilinear extension is concave, so
    the value shrinks by at most the same factor.
    """
    if not (0 < mu < 1):
        raise InputError("mu must lie in (0, 1)")
    return point.scale((1.0 - mu) / (1.0 + mu))
