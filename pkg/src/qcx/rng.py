"""Seed plumbing: one 64-bit root seed, counted stream splits per consumer."""

import numpy as np


def child_rng(seed, *key) -> np.random.Generator:
    """Generator for the stream identified by (seed, key...).

    Splitting by explicit spawn keys keeps parallel consumers (restarts,
    samples) bitwise reproducible regardless of execution order.
    """
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def as_rng(seed_or_rng) -> np.random.Generator:
    """Pass a Generator through; wrap anything else as a fresh root stream."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
