#!/usr/bin/env python3
"""Seeded rational samplers built on numpy's Generator."""

from __future__ import annotations

import os
from fractions import Fraction
from typing import Iterator

import numpy as np

from core_spaces import SparseVector
from errors import ConfigError


DEFAULT_SEED = 20240917
DEFAULT_DENOMINATOR = 64


def resolve_seed(seed: int | None) -> int:
    """AFP_SEED in the environment wins over the configured seed."""
    env = os.environ.get("AFP_SEED", "").strip()
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"AFP_SEED is not an integer: {env!r}") from exc
    return DEFAULT_SEED if seed is None else int(seed)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def rational_unit(rng: np.random.Generator, denominator: int = DEFAULT_DENOMINATOR) -> Fraction:
    """Uniform on {0, 1/d, ..., 1}."""
    return Fraction(int(rng.integers(0, denominator + 1)), denominator)


def rational_between(
    rng: np.random.Generator, low: Fraction, high: Fraction, denominator: int = DEFAULT_DENOMINATOR
) -> Fraction:
    return low + (high - low) * rational_unit(rng, denominator)


def signed_rational(
    rng: np.random.Generator, bound: int = 4, denominator: int = DEFAULT_DENOMINATOR
) -> Fraction:
    return Fraction(int(rng.integers(-bound * denominator, bound * denominator + 1)), denominator)


def simplex_weights(
    rng: np.random.Generator, size: int, denominator: int = DEFAULT_DENOMINATOR
) -> list[Fraction]:
    """Nonnegative rationals summing to exactly 1 (sorted-cut construction)."""
    cuts = sorted(int(c) for c in rng.integers(0, denominator + 1, size=size - 1))
    edges = [0, *cuts, denominator]
    return [Fraction(edges[i + 1] - edges[i], denominator) for i in range(size)]


def random_sparse(
    rng: np.random.Generator,
    max_index: int,
    nnz: int,
    bound: int = 2,
    denominator: int = DEFAULT_DENOMINATOR,
    nonnegative: bool = False,
) -> SparseVector:
    picks = rng.choice(np.arange(1, max_index + 1), size=min(nnz, max_index), replace=False)
    entries = {}
    for idx in picks:
        value = rational_unit(rng, denominator) * bound if nonnegative else signed_rational(rng, bound, denominator)
        entries[int(idx)] = value
    return SparseVector(entries)


def box_point(
    rng: np.random.Generator,
    lower: tuple[Fraction, ...],
    upper: tuple[Fraction, ...],
    denominator: int = DEFAULT_DENOMINATOR,
) -> SparseVector:
    return SparseVector.dense(
        [rational_between(rng, lo, hi, denominator) for lo, hi in zip(lower, upper)]
    )


def box_stream(
    rng: np.random.Generator,
    lower: tuple[Fraction, ...],
    upper: tuple[Fraction, ...],
    denominator: int = DEFAULT_DENOMINATOR,
) -> Iterator[SparseVector]:
    while True:
        yield box_point(rng, lower, upper, denominator)


def ordered_indices(rng: np.random.Generator, count: int, upper: int) -> tuple[int, ...]:
    """`count` distinct increasing indices from 1..upper."""
    picks = rng.choice(np.arange(1, upper + 1), size=count, replace=False)
    return tuple(sorted(int(p) for p in picks))
