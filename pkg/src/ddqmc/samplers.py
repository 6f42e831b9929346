"""Keyed random streams and exact integer sampling helpers.

Streams are counter-based (Philox) so a (seed, stream id) pair always
reproduces the same sequence regardless of what other streams were
drawn from in between; the walker engine keys one stream per
(step, shard).
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox


def rng_stream(seed, stream=0):
    """Independent reproducible generator for the (seed, stream) key."""
    return Generator(Philox(key=[np.uint64(seed), np.uint64(stream)]))


def binomial(n, q, rng):
    """Exact Binomial(n, q) draw (numpy's BTPE / inverse-CDF kernel)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    return int(rng.binomial(n, q))


def multinomial(n, probs, rng):
    """Distribute n among len(probs) bins by sequential conditional binomials.

    Marginal of bin j is Binomial(n, probs[j]); counts always sum to n.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("probs must be a non-empty 1-d array")
    if np.any(probs < 0):
        raise ValueError("probabilities must be >= 0")
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    counts = np.zeros(probs.size, dtype=np.int64)
    remaining = int(n)
    rest = 1.0
    for j in range(probs.size - 1):
        if remaining == 0:
            break
        q = probs[j] / rest if rest > 0 else 1.0
        counts[j] = rng.binomial(remaining, min(max(q, 0.0), 1.0))
        remaining -= counts[j]
        rest -= probs[j]
    else:
        counts[-1] = remaining
        remaining = 0
    assert counts.sum() + remaining == n
    return counts


def stochastic_round(x, rng):
    """floor(x) plus a Bernoulli on the fractional part; unbiased, E = x."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("stochastic_round requires non-negative input")
    lo = np.floor(arr)
    out = (lo + (rng.random(arr.shape) < (arr - lo))).astype(np.int64)
    return out if arr.ndim else int(out)
