"""Nested cylinder intervals U^v and the coding map."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .branches import DEFAULT_TOL
from .errors import HorizonExhausted, PrecisionLoss
from .orbit import backward_pass
from .symbolic import DEFAULT_BUDGET, CylinderWord, _require_admissible, enumerate_words

TOUCH_TOL = 1e-13


@dataclass(frozen=True)
class IntervalNode:
    word: CylinderWord
    left: float
    right: float
    left_neighbor: int | None = None
    right_neighbor: int | None = None
    touches_left: bool = False
    touches_right: bool = False

    @property
    def length(self) -> float:
        return self.right - self.left


def interval_endpoints(fiber, start, W, tol=DEFAULT_TOL):
    """(left, right) arrays of U^w for every row of W."""
    left = backward_pass(fiber, start, W, 0.0, tol=tol)
    right = backward_pass(fiber, start, W, 1.0, tol=tol)
    short = (right - left) <= 64 * np.finfo(float).eps * np.maximum(np.abs(right), 1e-300)
    if np.any(short):
        warnings.warn(PrecisionLoss(f"{int(short.sum())} intervals at the resolution limit"))
    return left, right


def cylinder_interval(fiber, word: CylinderWord, tol=DEFAULT_TOL) -> IntervalNode:
    _require_admissible(fiber, word)
    left, right = interval_endpoints(fiber, word.start, word.as_array(), tol)
    return IntervalNode(word, float(left[0]), float(right[0]))


@dataclass(frozen=True)
class Cover:
    """Depth-n cylinder intervals sorted by left endpoint."""

    start: int
    depth: int
    words: np.ndarray
    left: np.ndarray
    right: np.ndarray
    order: np.ndarray  # position of each sorted interval in the lexicographic enumeration

    @property
    def lengths(self) -> np.ndarray:
        return self.right - self.left

    @property
    def touching(self) -> np.ndarray:
        """touching[i]: interval i shares its right endpoint with interval i+1."""
        return np.abs(self.left[1:] - self.right[:-1]) <= TOUCH_TOL

    def __len__(self):
        return len(self.left)

    def nodes(self) -> list:
        t = self.touching
        n = len(self)
        out = []
        for i in range(n):
            out.append(
                IntervalNode(
                    CylinderWord(self.start, tuple(self.words[i].tolist())),
                    float(self.left[i]),
                    float(self.right[i]),
                    i - 1 if i > 0 else None,
                    i + 1 if i < n - 1 else None,
                    bool(t[i - 1]) if i > 0 else False,
                    bool(t[i]) if i < n - 1 else False,
                )
            )
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["depth", "word", "left", "right", "length"])
            for i in range(len(self)):
                word = ".".join(str(s) for s in self.words[i].tolist())
                w.writerow([self.depth, word, repr(float(self.left[i])), repr(float(self.right[i])),
                            repr(float(self.right[i] - self.left[i]))])


def attractor_cover(fiber, n: int, start: int = 0, budget: int = DEFAULT_BUDGET) -> Cover:
    W = enumerate_words(fiber, start, n, budget)
    left, right = interval_endpoints(fiber, start, W)
    order = np.argsort(left, kind="stable")
    return Cover(start, n, W[order], left[order], right[order], order)


def coding_point(fiber, word: CylinderWord, tol: float | None = None):
    """Left endpoint of U^v as the approximation of pi(v...), with its error bound."""
    node = cylinder_interval(fiber, word)
    if tol is not None and node.length > tol:
        raise HorizonExhausted(f"|U^v| = {node.length:.3g} exceeds tolerance {tol:.3g} at depth {word.depth}")
    return node.left, node.length
