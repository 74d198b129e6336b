"""Shared plumbing: seeded random streams, time budgets, exceptions."""
from __future__ import annotations

import time
import zlib

import numpy as np


class UrsLabError(Exception):
    """Base class for errors raised by urslab."""


class FrontierError(UrsLabError):
    """A computation needed data beyond the materialized part of a view."""


class BudgetExceeded(UrsLabError):
    """A search ran out of its time or iteration budget."""


def rng_stream(seed: int, name: str = "") -> np.random.Generator:
    """Independent generator for the named substream of a 64-bit seed.

    Streams with different names are statistically independent, so modules
    can draw randomness without perturbing each other.
    """
    key = zlib.crc32(name.encode("utf8"))
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, key])
    return np.random.default_rng(ss)


class Budget:
    """Wall-clock budget checked cooperatively by long searches."""

    def __init__(self, ms: float | None = None):
        self.ms = ms
        self.start = time.perf_counter()

    def expired(self) -> bool:
        if self.ms is None:
            return False
        return (time.perf_counter() - self.start) * 1000.0 > self.ms

    def check(self, what: str = "search") -> None:
        if self.expired():
            raise BudgetExceeded(f"{what} exceeded its budget of {self.ms} ms")


def as_budget(budget) -> Budget:
    if isinstance(budget, Budget):
        return budget
    return Budget(budget)
