"""Partition functions, pressure, transfer operators and weak-Gibbs weights."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, RequiresCoarsening
from .symbolic import (
    DEFAULT_BUDGET,
    LEFTMOST,
    CoarsePotential,
    CylinderWord,
    Extension,
    SymbolPotential,
    _group_starts,
    _mixed_radix,
    birkhoff_sums,
    enumerate_words,
)

LOG_FLUSH = -745.0


def logsumexp(a) -> tuple:
    """(log sum exp(a), number of terms below exp(-745) relative to the max)."""
    a = np.asarray(a, dtype=float)
    m = float(np.max(a))
    rel = a - m
    flushed = int(np.count_nonzero(rel < LOG_FLUSH))
    return m + float(np.log(np.sum(np.exp(rel)))), flushed


@dataclass(frozen=True)
class PressureEstimate:
    value: float
    depths: tuple
    values: tuple  # (1/n) log Z_n, replica-averaged
    method: str
    diagnostic: float
    stderr: float | None = None
    replicas: int = 1

    def to_csv(self, path, header=()):
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["depth", "value", "diagnostic"])
            for n, v in zip(self.depths, self.values):
                w.writerow([n, repr(float(v)), ""])
            w.writerow(["extrapolated", repr(float(self.value)), repr(float(self.diagnostic))])


def log_partition_function(fiber, potential, n: int, extension: Extension = LEFTMOST, start: int = 0,
                           budget: int = DEFAULT_BUDGET) -> float:
    """log sum_{v in Sigma_n} exp(S_n Phi(u(v)))."""
    S = birkhoff_sums(fiber, start, n, potential, extension, budget)
    return logsumexp(S)[0]


def _is_deterministic(fiber):
    return fiber.config.kind == "deterministic"


def pressure(fibers, potential, depth_grid, extension: Extension = LEFTMOST, method: str = "auto",
             start: int = 0, budget: int = DEFAULT_BUDGET) -> PressureEstimate:
    """Estimate P(potential) from (1/n) log Z_n along one or several fibers.

    ``richardson`` fits c + a/n through the two deepest depths; ``deepest``
    reports the deepest ergodic average. ``auto`` uses richardson on
    deterministic fibers only: along a random orbit the 1/n model is swamped
    by O(n^-1/2) fluctuations that the extrapolation would amplify.
    """
    if not isinstance(fibers, (list, tuple)):
        fibers = [fibers]
    grid = [int(n) for n in depth_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise InvalidConfig("depth grid must be nonempty, positive and strictly increasing")
    seqs = np.array(
        [[log_partition_function(f, potential, n, extension, start, budget) / n for n in grid] for f in fibers]
    )
    mean = seqs.mean(axis=0)
    if method == "auto":
        method = "richardson" if all(_is_deterministic(f) for f in fibers) else "deepest"
    if method == "richardson" and len(grid) >= 2:
        n1, n2 = grid[-2], grid[-1]
        value = (n2 * mean[-1] - n1 * mean[-2]) / (n2 - n1)
        diag = abs(mean[-1] - value)
    elif method in ("richardson", "deepest"):
        value = mean[-1]
        diag = abs(mean[-1] - mean[-2]) if len(grid) >= 2 else 0.0
    else:
        raise InvalidConfig(f"unknown pressure method {method!r}")
    stderr = None
    if len(fibers) > 1:
        finals = seqs[:, -1] if method == "deepest" else (grid[-1] * seqs[:, -1] - grid[-2] * seqs[:, -2]) / (
            grid[-1] - grid[-2])
        stderr = float(np.std(finals, ddof=1) / np.sqrt(len(fibers)))
    return PressureEstimate(float(value), tuple(grid), tuple(float(v) for v in mean), method, float(diag), stderr,
                            len(fibers))


def normalize_potential(fiber, potential, depth: int, extension: Extension = LEFTMOST, start: int = 0,
                        budget: int = DEFAULT_BUDGET):
    """Shift ``potential`` by (1/depth) log Z_depth so the same estimator reads 0."""
    c = log_partition_function(fiber, potential, depth, extension, start, budget) / depth
    return potential.shifted(c), c


# --------------------------------------------------------------------------
# transfer operator on the coarse algebra


def _coarse_depth(potential):
    if isinstance(potential, (SymbolPotential, CoarsePotential)):
        return potential.depth
    raise RequiresCoarsening(f"{getattr(potential, 'name', potential)!r} is not piecewise constant")


def function_depth(potential) -> int:
    """Depth of the cylinder functions the coarse transfer operator acts on."""
    return max(_coarse_depth(potential) - 1, 1)


def _index(fiber, k, d, W):
    base = enumerate_words(fiber, k, d)
    codes = _mixed_radix(fiber, k, base)
    return np.searchsorted(codes, _mixed_radix(fiber, k, W))


def rpf_apply(fiber, potential, step: int, values) -> np.ndarray:
    """(L h)(v) = sum_{s v admissible} exp(Phi(step, s v)) h(s v).

    ``values`` is aligned with ``enumerate_words(fiber, step, d)`` and the
    result with ``enumerate_words(fiber, step + 1, d)``, d = function_depth.
    """
    i = _coarse_depth(potential)
    d = function_depth(potential)
    U = enumerate_words(fiber, step, d + 1)
    h = np.asarray(values, dtype=float)
    if h.shape != (len(enumerate_words(fiber, step, d)),):
        raise InvalidConfig("values are not aligned with the depth-d cylinders at this step")
    if isinstance(potential, SymbolPotential):
        phi = potential.step_values(fiber[step])[U[:, 0] - 1]
    else:
        phi = potential.values(fiber, step, U[:, :i])
    contrib = np.exp(phi) * h[_index(fiber, step, d, U[:, :d])]
    out = np.zeros(len(enumerate_words(fiber, step + 1, d)))
    np.add.at(out, _index(fiber, step + 1, d, U[:, 1 : d + 1]), contrib)
    return out


def lambda_sequence(fiber, potential, n: int, start: int = 0) -> np.ndarray:
    """log lambda(omega, k) for k = 1..n: log of the mean of L^k 1."""
    d = function_depth(potential)
    h = np.ones(len(enumerate_words(fiber, start, d)))
    out = np.empty(n)
    acc = 0.0
    for k in range(n):
        h = rpf_apply(fiber, potential, start + k, h)
        c = float(h.mean())
        acc += np.log(c)
        h = h / c
        out[k] = acc
    return out


# --------------------------------------------------------------------------
# weak-Gibbs cylinder weights


@dataclass(frozen=True)
class GibbsWeights:
    start: int
    depth: int
    words: np.ndarray
    log_weights: np.ndarray
    log_normalizer: float
    potential: str
    flushed: int = 0
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def weight(self, word) -> float:
        if not self._index:
            self._index.update({tuple(r): i for i, r in enumerate(self.words.tolist())})
        key = tuple(word.symbols) if isinstance(word, CylinderWord) else tuple(word)
        return float(np.exp(self.log_weights[self._index[key]]))

    def as_dict(self) -> dict:
        return {CylinderWord(self.start, tuple(r)): float(w) for r, w in zip(self.words.tolist(), self.weights)}


def gibbs_cylinder_weights(fiber, potential, n: int, start: int = 0, extension: Extension = LEFTMOST,
                           budget: int = DEFAULT_BUDGET) -> GibbsWeights:
    """weight(v) = exp(S_n Phi(u(v)) - log Z_n)."""
    S = birkhoff_sums(fiber, start, n, potential, extension, budget)
    logZ, flushed = logsumexp(S)
    W = enumerate_words(fiber, start, n, budget)
    return GibbsWeights(start, n, W, S - logZ, logZ, getattr(potential, "name", "potential"), flushed)


def weight_consistency_slack(fiber, potential, n: int, start: int = 0, extension: Extension = LEFTMOST,
                             budget: int = DEFAULT_BUDGET) -> float:
    """max_v |log w_n(v) - log sum_{children c} w_{n+1}(c)|."""
    parent = gibbs_cylinder_weights(fiber, potential, n, start, extension, budget)
    child = gibbs_cylinder_weights(fiber, potential, n + 1, start, extension, budget)
    starts = _group_starts(child.words, n)
    if len(starts) != len(parent.words):
        raise InvalidConfig("children do not partition the parent cylinders")
    lw = child.log_weights
    gmax = np.maximum.reduceat(lw, starts)
    sizes = np.diff(np.concatenate([starts, [len(lw)]]))
    lsum = gmax + np.log(np.add.reduceat(np.exp(lw - np.repeat(gmax, sizes)), starts))
    return float(np.max(np.abs(parent.log_weights - lsum)))


@dataclass(frozen=True)
class NegativityReport:
    depths: tuple
    max_average: tuple  # max_v S_n Phi / n
    threshold: float
    passed: bool


def negativity_check(fiber, potential, n_grid, start: int = 0, threshold: float = 1e-3,
                     extension: Extension = LEFTMOST, budget: int = DEFAULT_BUDGET) -> NegativityReport:
    """max over depth-n words of S_n Phi / n; passes when the deepest value is below -threshold."""
    vals = tuple(float(np.max(birkhoff_sums(fiber, start, n, potential, extension, budget)) / n) for n in n_grid)
    return NegativityReport(tuple(int(n) for n in n_grid), vals, threshold, vals[-1] < -threshold)
