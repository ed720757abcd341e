#!/usr/bin/env python3
import sys
from typing import AbstractSet, Any, Tuple, Union

from numpy.random import Generator, SeedSequence, default_rng
from typer import style

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

SeedLike = Union[int, Generator]


def title(message: str) -> None:
    dotted_message = f'\n{message}...'
    print(style(dotted_message, 'magenta', bold=True))


def warning(message: str, **kwargs: Any) -> None:
    print(style(message, 'yellow'), **kwargs, file=sys.stderr)


def mix64(value: int) -> int:
    """Splitmix64 finalizer over a 64-bit unsigned integer."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Mix `index` into `seed`, giving an independent 64-bit child seed."""
    return mix64((seed & MASK64) + ((index + 1) * GOLDEN_GAMMA & MASK64))


def as_rng(seed: SeedLike) -> Generator:
    if isinstance(seed, Generator):
        return seed
    return default_rng(seed & MASK64)


def keyed_uniform(seed: int, key: Tuple[int, int],
                  w: AbstractSet[int]) -> float:
    """Uniform draw determined by (seed, key, W) alone."""
    entropy = [seed & MASK64, key[0], key[1], len(w), *sorted(w)]
    return float(default_rng(SeedSequence(entropy)).random())


class ExpertPcError(Exception):
    pass
