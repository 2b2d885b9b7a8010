"""Realisations of the base driver and the per-step fiber data it induces.

A fiber step k carries the alphabet size ``l``, the 0/1 transition matrix
``A`` of shape ``l x l_next`` and one branch map per symbol. Step data depend
on the base symbols at k and k+1 only.

Randomness comes from a Philox generator keyed by the seed. Step k always
consumes the two uniforms at counter positions 2k and 2k+1, so sampling a
longer horizon never changes earlier steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .branches import BranchMap, Identity, Profile
from .errors import HorizonExhausted, InvalidConfig

KINDS = ("deterministic", "bernoulli", "markov", "gamma")


@dataclass(frozen=True)
class SymbolFiber:
    """Geometry attached to one base symbol: intervals and branch profiles."""

    intervals: tuple
    profiles: tuple
    a0: float | None = None  # declared lower bound on the profile derivatives

    def __post_init__(self):
        if len(self.intervals) != len(self.profiles) or not self.intervals:
            raise InvalidConfig("intervals and profiles must be nonempty and of equal length")
        prev = -np.inf
        for a, b in self.intervals:
            if not b > a:
                raise InvalidConfig(f"degenerate interval [{a}, {b}]")
            if a < prev - 1e-15:
                raise InvalidConfig("intervals must be ordered with disjoint interiors")
            prev = b
        if self.intervals[0][0] < 0 or self.intervals[-1][1] > 1:
            raise InvalidConfig("intervals must lie in [0, 1]")

    @property
    def l(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True, eq=False)
class FiberStep:
    l: int
    A: np.ndarray
    branches: tuple
    base_symbol: object
    next_symbol: object
    a0: float | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.int8)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        if A.shape[0] != self.l or len(self.branches) != self.l:
            raise InvalidConfig("matrix rows and branches must match l")
        if not (A.any(axis=1).all() and A.any(axis=0).all()):
            raise InvalidConfig("every row and column of A needs a nonzero entry")

    @property
    def intervals(self):
        return [(br.a, br.b) for br in self.branches]

    @property
    def length_sum(self) -> float:
        return float(sum(br.length for br in self.branches))


class FiberModel:
    """Maps consecutive base symbols to a FiberStep."""

    def l_of(self, symbol) -> int:
        raise NotImplementedError

    def matrix(self, symbol, next_symbol) -> np.ndarray:
        return np.ones((self.l_of(symbol), self.l_of(next_symbol)), dtype=np.int8)

    def branches(self, symbol) -> tuple:
        raise NotImplementedError

    def a0(self, symbol):
        return None

    def step(self, symbol, next_symbol) -> FiberStep:
        return FiberStep(
            l=self.l_of(symbol),
            A=self.matrix(symbol, next_symbol),
            branches=self.branches(symbol),
            base_symbol=symbol,
            next_symbol=next_symbol,
            a0=self.a0(symbol),
        )


class TableModel(FiberModel):
    """Random fullshift: every base symbol has its own SymbolFiber."""

    def __init__(self, table: dict):
        if not table:
            raise InvalidConfig("empty fiber table")
        self.table = dict(table)
        self._branches = {
            s: tuple(BranchMap(p, a, b) for (a, b), p in zip(f.intervals, f.profiles))
            for s, f in self.table.items()
        }

    def _get(self, symbol):
        try:
            return self.table[symbol]
        except KeyError:
            raise InvalidConfig(f"base symbol {symbol!r} has no fiber table") from None

    def l_of(self, symbol):
        return self._get(symbol).l

    def branches(self, symbol):
        self._get(symbol)
        return self._branches[symbol]

    def a0(self, symbol):
        return self._get(symbol).a0


class GammaModel(FiberModel):
    """Base symbols n >= 1; l = n, branches x -> n x mod 1 on [(i-1)/n, i/n].

    A(n1, n2) is all ones except when n2 = n1 - 1 and n1 >= 3: then row n1 has
    its single 1 in column n1 - 1.
    """

    def l_of(self, symbol):
        return int(symbol)

    def matrix(self, symbol, next_symbol):
        n1, n2 = int(symbol), int(next_symbol)
        A = np.ones((n1, n2), dtype=np.int8)
        if n2 == n1 - 1 and n1 >= 3:
            A[n1 - 1, :] = 0
            A[n1 - 1, n1 - 2] = 1
        return A

    def branches(self, symbol):
        n = int(symbol)
        return tuple(BranchMap(Identity(), (i - 1) / n, i / n) for i in range(1, n + 1))

    def a0(self, symbol):
        return 1.0


def gamma_probabilities(l_max: int) -> np.ndarray:
    """P(n) = 1/(n(n+1)) for n = 1..l_max (untruncated masses)."""
    n = np.arange(1, l_max + 1, dtype=float)
    return 1.0 / (n * (n + 1.0))


@dataclass(frozen=True, eq=False)
class BaseConfig:
    kind: str
    model: FiberModel
    symbols: tuple = ()
    probabilities: tuple = ()
    kernel: tuple = ()
    initial: tuple = ()
    pattern: tuple = ()
    horizon: int = 64
    seed: int = 0
    l_max: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfig(f"unknown base kind {self.kind!r}")
        if int(self.horizon) < 1:
            raise InvalidConfig("horizon must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if self.kind == "deterministic" and not self.pattern:
            raise InvalidConfig("deterministic base needs a nonempty pattern")
        if self.kind == "bernoulli":
            _check_distribution(self.probabilities, len(self.symbols), "probabilities")
        if self.kind == "markov":
            k = len(self.symbols)
            if len(self.kernel) != k:
                raise InvalidConfig("kernel must have one row per symbol")
            for i, row in enumerate(self.kernel):
                _check_distribution(row, k, f"kernel row {i}")
            if self.initial:
                _check_distribution(self.initial, k, "initial")
        if self.kind == "gamma" and self.l_max < 2:
            raise InvalidConfig("l_max must be >= 2")

    def with_horizon(self, horizon: int) -> "BaseConfig":
        return replace(self, horizon=int(horizon))

    def with_seed(self, seed: int) -> "BaseConfig":
        return replace(self, seed=int(seed))


def _check_distribution(p, size, what):
    p = np.asarray(p, dtype=float)
    if p.shape != (size,) or size == 0:
        raise InvalidConfig(f"{what}: expected {size} entries")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise InvalidConfig(f"{what} must be nonnegative and sum to 1 (got {p.sum()!r})")


@dataclass(frozen=True, eq=False)
class FiberSequence:
    config: BaseConfig
    steps: tuple
    trace: tuple
    truncations: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for k in range(len(self.steps) - 1):
            if self.steps[k].A.shape[1] != self.steps[k + 1].l:
                raise InvalidConfig(f"matrix shape mismatch between steps {k} and {k + 1}")

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def __getitem__(self, k) -> FiberStep:
        return self.steps[k]

    def __len__(self):
        return len(self.steps)

    def ls(self) -> np.ndarray:
        return np.array([s.l for s in self.steps])


def _sample_trace(config: BaseConfig):
    n = config.horizon + 1
    if config.kind == "deterministic":
        pat = list(config.pattern)
        return [pat[k % len(pat)] for k in range(n)], 0
    gen = np.random.Generator(np.random.Philox(key=int(config.seed)))
    u = gen.random((n, 2))
    if config.kind == "bernoulli":
        cdf = np.cumsum(config.probabilities)
        idx = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), len(cdf) - 1)
        return [config.symbols[i] for i in idx], 0
    if config.kind == "markov":
        k = len(config.symbols)
        init = np.asarray(config.initial or np.full(k, 1.0 / k))
        cdfs = np.cumsum(np.asarray(config.kernel, dtype=float), axis=1)
        idx = [min(int(np.searchsorted(np.cumsum(init), u[0, 0], side="right")), k - 1)]
        for j in range(1, n):
            row = cdfs[idx[-1]]
            idx.append(min(int(np.searchsorted(row, u[j, 0], side="right")), k - 1))
        return [config.symbols[i] for i in idx], 0
    # gamma: N = floor(1/U) has P(N = n) = 1/(n(n+1)); values above l_max are
    # redrawn from the conditional law given N <= l_max using the second uniform
    L = config.l_max
    raw = np.floor(1.0 / (1.0 - u[:, 0])).astype(np.int64)
    raw = np.maximum(raw, 1)
    over = raw > L
    pmf = gamma_probabilities(L)
    cdf = np.cumsum(pmf) / pmf.sum()
    redraw = np.minimum(np.searchsorted(cdf, u[:, 1], side="right"), L - 1) + 1
    trace = np.where(over, redraw, raw)
    return [int(t) for t in trace], int(over.sum())


def fiber_from_trace(config: BaseConfig, trace: Sequence, truncations: int = 0) -> FiberSequence:
    """Build fiber steps from an explicit base trace of length horizon + 1."""
    if len(trace) < 2:
        raise InvalidConfig("trace must contain at least two base symbols")
    cache = {}
    steps = []
    for k in range(len(trace) - 1):
        key = (trace[k], trace[k + 1])
        if key not in cache:
            cache[key] = config.model.step(*key)
        steps.append(cache[key])
    cfg = config.with_horizon(len(trace) - 1) if config.horizon != len(trace) - 1 else config
    return FiberSequence(cfg, tuple(steps), tuple(trace), truncations)


def sample_fiber_sequence(config: BaseConfig) -> FiberSequence:
    trace, trunc = _sample_trace(config)
    return fiber_from_trace(config, trace, trunc)


def mixing_time(fiber: FiberSequence, start: int = 0) -> int:
    """Smallest m >= 1 with A_start ... A_{start+m-1} entrywise positive."""
    if not 0 <= start < fiber.horizon:
        raise HorizonExhausted(f"start {start} outside horizon {fiber.horizon}")
    P = fiber[start].A.astype(bool)
    m = 1
    while not P.all():
        if start + m >= fiber.horizon:
            raise HorizonExhausted(f"no positive product within horizon from step {start}")
        P = (P.astype(np.int64) @ fiber[start + m].A.astype(np.int64)) > 0
        m += 1
    return m


def symbol_fiber(intervals, profiles=None, a0=None) -> SymbolFiber:
    profiles = profiles or [Identity()] * len(intervals)
    return SymbolFiber(tuple(tuple(map(float, iv)) for iv in intervals), tuple(profiles), a0)


__all__ = [
    "BaseConfig",
    "FiberModel",
    "FiberSequence",
    "FiberStep",
    "GammaModel",
    "Profile",
    "SymbolFiber",
    "TableModel",
    "fiber_from_trace",
    "gamma_probabilities",
    "mixing_time",
    "sample_fiber_sequence",
    "symbol_fiber",
]
