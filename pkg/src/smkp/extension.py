"""Multilinear extension of a set oracle.

Exact evaluation enumerates all subsets and is capped at 20 coordinates;
beyond that the seeded Monte Carlo estimator applies. Sampling uses the
counter-based Philox generator so estimates are reproducible and worker
seeds can be derived by xor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, SizeLimitError

_SEED_MASK = (1 << 64) - 1
_CHUNK = 1 << 14


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _SEED_MASK))


@dataclass(frozen=True)
class MultilinearEstimate:
    mean: float
    standard_error: float
    sample_count: int
    seed: int


def coordinate_vector(oracle, point) -> np.ndarray:
    """Inclusion probabilities aligned to the oracle's ground-set order.

    Accepts a mapping (missing coordinates default to zero) or a sequence.
    """
    if hasattr(point, "keys"):
        x = np.zeros(len(oracle.ids))
        for key, v in point.items():
            pos = oracle._index.get(key)
            if pos is None:
                raise InputError(f"unknown coordinate {key!r}")
            x[pos] = float(v)
    else:
        x = np.asarray(point, dtype=float)
        if x.shape != (len(oracle.ids),):
            raise InputError("coordinate vector length does not match ground set")
    if not np.all(np.isfinite(x)) or x.min() < -1e-9 or x.max() > 1 + 1e-9:
        raise InputError("coordinates must lie in [0, 1]")
    return np.clip(x, 0.0, 1.0)


def multilinear_exact(oracle, point, size_limit: int = 20) -> float:
    """Exact expectation of the oracle under independent inclusion.

    Enumerates all 2^n subsets; refuses ground sets larger than
    ``size_limit`` and points the caller at multilinear_sample instead.
    """
    n = len(oracle.ids)
    if n > size_limit:
        raise SizeLimitError(
            f"ground set of size {n} is too large for exact enumeration; "
            "use multilinear_sample"
        )
    x = coordinate_vector(oracle, point)
    bits = np.arange(n)
    total = 0.0
    for start in range(0, 1 << n, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, 1 << n))
        masks = ((idx[:, None] >> bits) & 1).astype(bool)
        probs = np.where(masks, x, 1.0 - x).prod(axis=1)
        total += float(probs @ oracle.batch_values(masks))
    return total


def multilinear_sample(oracle, point, sample_count: int, seed: int) -> MultilinearEstimate:
    """Unbiased Monte Carlo estimate of the multilinear extension."""
    if sample_count < 2:
        raise InputError("sample_count must be at least 2")
    x = coordinate_vector(oracle, point)
    rng = rng_for(seed)
    draws = rng.random((sample_count, len(x))) < x
    vals = oracle.batch_values(draws)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(sample_count))
    return MultilinearEstimate(mean=mean, standard_error=se, sample_count=sample_count, seed=seed)
