"""Per-slot user/channel assignments and their success feedback."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Assignment:
    """A partial matching: each user and each channel appears at most once.

    ``pairs`` holds 0-based ``(user, channel)`` tuples.
    """

    pairs: tuple[tuple[int, int], ...]
    n: int
    m: int

    def __post_init__(self):
        users = [i for i, _ in self.pairs]
        chans = [j for _, j in self.pairs]
        if len(set(users)) != len(users) or len(set(chans)) != len(chans):
            raise ValueError(f"not a matching: {self.pairs}")
        for i, j in self.pairs:
            if not (0 <= i < self.n and 0 <= j < self.m):
                raise ValueError(f"pair {(i, j)} outside {self.n}x{self.m}")

    @classmethod
    def from_permutation(cls, perm: Sequence[int], n: int, m: int) -> "Assignment":
        """Drop the padding rows/columns of an s x s permutation."""
        return cls(tuple((i, int(j)) for i, j in enumerate(perm[:n]) if j < m), n, m)

    def matrix(self) -> np.ndarray:
        Y = np.zeros((self.n, self.m))
        for i, j in self.pairs:
            Y[i, j] = 1.0
        return Y

    def channel_of_user(self) -> np.ndarray:
        out = np.full(self.n, -1, dtype=np.int64)
        for i, j in self.pairs:
            out[i] = j
        return out

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class Feedback:
    """Success indicators, one per assigned pair (aligned with ``assignment.pairs``)."""

    assignment: Assignment
    successes: tuple[bool, ...]

    def __post_init__(self):
        if len(self.successes) != len(self.assignment.pairs):
            raise ValueError("one success flag per assigned pair is required")

    def delivered(self) -> np.ndarray:
        """X(t): per-user success count, each entry in {0, 1}."""
        X = np.zeros(self.assignment.n)
        for (i, _), ok in zip(self.assignment.pairs, self.successes):
            if ok:
                X[i] = 1.0
        return X

    def success_matrix(self) -> np.ndarray:
        """S * Y: ones on assigned pairs that succeeded."""
        a = self.assignment
        S = np.zeros((a.n, a.m))
        for (i, j), ok in zip(a.pairs, self.successes):
            if ok:
                S[i, j] = 1.0
        return S
