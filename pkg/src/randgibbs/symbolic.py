"""Admissible words of the random subshift and potentials defined on them.

Words are stored as (N, n) integer arrays of 1-based symbols in lexicographic
order; ``CylinderWord`` is the scalar handle used at API boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetExceeded,
    DomainError,
    HorizonExhausted,
    InconsistentFiber,
    InvalidConfig,
)
from .orbit import backward_pass

DEFAULT_BUDGET = 1 << 22
WORD_DTYPE = np.int16


@dataclass(frozen=True)
class CylinderWord:
    start: int
    symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    @property
    def depth(self) -> int:
        return len(self.symbols)

    def __len__(self):
        return len(self.symbols)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=WORD_DTYPE)[None, :]

    def extend(self, s: int) -> "CylinderWord":
        return CylinderWord(self.start, self.symbols + (int(s),))


def is_admissible(fiber, word: CylinderWord) -> bool:
    k = word.start
    if k < 0 or k + word.depth > fiber.horizon:
        return False
    for j, s in enumerate(word.symbols):
        if not 1 <= s <= fiber[k + j].l:
            return False
        if j + 1 < word.depth and not fiber[k + j].A[s - 1, word.symbols[j + 1] - 1]:
            return False
    return True


def _require_admissible(fiber, word):
    if not is_admissible(fiber, word):
        raise InconsistentFiber(f"word {word.symbols} at step {word.start} is not admissible")


def count_words(fiber, start: int, n: int) -> int:
    """Number of admissible words of length n from ``start`` (matrix path count)."""
    if n <= 0:
        return 1
    if start + n > fiber.horizon:
        raise HorizonExhausted(f"need steps up to {start + n}, horizon is {fiber.horizon}")
    c = np.ones(fiber[start].l, dtype=object)
    for j in range(1, n):
        c = c.dot(fiber[start + j - 1].A.astype(object))
    return int(c.sum())


def enumerate_words(fiber, start: int, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """All admissible length-n words from ``start`` as a lexicographic array."""
    if n < 1:
        raise InvalidConfig("depth must be >= 1")
    key = ("words", start, n)
    hit = fiber._cache.get(key)
    if hit is not None:
        return hit
    total = count_words(fiber, start, n)
    if total > budget:
        raise BudgetExceeded(f"{total} words at depth {n} exceed budget {budget}", count=total, budget=budget)
    W = np.arange(1, fiber[start].l + 1, dtype=WORD_DTYPE)[:, None]
    for j in range(1, n):
        rows = fiber[start + j - 1].A[W[:, -1] - 1]
        r, c = np.nonzero(rows)
        W = np.concatenate([W[r], (c + 1).astype(WORD_DTYPE)[:, None]], axis=1)
    W.setflags(write=False)
    fiber._cache[key] = W
    return W


def enumerate_cylinders(fiber, start: int, n: int, budget: int = DEFAULT_BUDGET) -> list:
    return [CylinderWord(start, tuple(row)) for row in enumerate_words(fiber, start, n, budget).tolist()]


def children(fiber, word: CylinderWord) -> list:
    _require_admissible(fiber, word)
    k = word.start + word.depth - 1
    if k + 1 >= fiber.horizon:
        raise HorizonExhausted(f"no step after {k} within horizon {fiber.horizon}")
    row = fiber[k].A[word.symbols[-1] - 1]
    return [word.extend(c + 1) for c in np.flatnonzero(row)]


def extend_leftmost(fiber, start: int, W: np.ndarray, extra: int) -> np.ndarray:
    """Append ``extra`` symbols, each the smallest admissible successor."""
    if extra <= 0:
        return W
    n = W.shape[1]
    if start + n + extra > fiber.horizon:
        raise HorizonExhausted(f"extension needs steps up to {start + n + extra}, horizon is {fiber.horizon}")
    cols = [W]
    last = W[:, -1]
    for j in range(extra):
        A = fiber[start + n - 1 + j].A
        nxt = (np.argmax(A[last - 1] > 0, axis=1) + 1).astype(WORD_DTYPE)
        cols.append(nxt[:, None])
        last = nxt
    return np.concatenate(cols, axis=1)


def connection_word(fiber, step: int, s: int, s_prime: int, n: int) -> CylinderWord:
    """s * s': the length-n word s v s' with the lexicographically smallest middle."""
    if n < 2:
        raise InvalidConfig("connection words have length >= 2")
    if step + n > fiber.horizon:
        raise HorizonExhausted(f"connection needs steps up to {step + n}")
    reach = [None] * n
    last = np.zeros(fiber[step + n - 1].l, dtype=bool)
    if not 1 <= s_prime <= last.size or not 1 <= s <= fiber[step].l:
        raise InconsistentFiber("endpoint symbol outside the alphabet")
    last[s_prime - 1] = True
    reach[n - 1] = last
    for j in range(n - 2, -1, -1):
        reach[j] = (fiber[step + j].A.astype(np.int64) @ reach[j + 1].astype(np.int64)) > 0
    if not reach[0][s - 1]:
        raise InconsistentFiber(f"no admissible path from {s} to {s_prime} in {n} steps at step {step}")
    word = [s]
    for j in range(1, n):
        cand = (fiber[step + j - 1].A[word[-1] - 1] > 0) & reach[j]
        word.append(int(np.argmax(cand)) + 1)
    return CylinderWord(step, tuple(word))


# --------------------------------------------------------------------------
# potentials


class Potential:
    """Fiber potential Gamma(k, v) = gamma(k, v_0, pi(v)).

    ``depth`` is the number of leading symbols the value depends on
    (None for point-dependent potentials).
    """

    depth: int | None = None
    name = "potential"
    variation = ("none",)

    def first_values(self, fiber, start, W, x0):
        """Values at position 0 for words W (N, >=depth) with pi-points x0."""
        raise NotImplementedError

    def shifted(self, c: float) -> "Potential":
        return Combination(((1.0, self),), -float(c)) if c else self

    def __mul__(self, a):
        return Combination(((float(a), self),), 0.0)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, Potential):
            return Combination(((1.0, self), (1.0, other)), 0.0)
        return Combination(((1.0, self),), float(other))

    def __sub__(self, other):
        if isinstance(other, Potential):
            return Combination(((1.0, self), (-1.0, other)), 0.0)
        return Combination(((1.0, self),), -float(other))


class SymbolPotential(Potential):
    """Depends on the step and the first symbol only."""

    depth = 1

    def __init__(self, values, name="symbol"):
        # values: FiberStep -> array of length l
        self._values = values
        self.name = name

    def step_values(self, step) -> np.ndarray:
        v = np.asarray(self._values(step), dtype=float)
        if v.shape != (step.l,):
            raise DomainError(f"{self.name}: expected {step.l} values, got shape {v.shape}")
        return v

    def first_values(self, fiber, start, W, x0):
        return self.step_values(fiber[start])[np.asarray(W)[:, 0] - 1]


def constant_potential(c: float) -> SymbolPotential:
    return SymbolPotential(lambda step: np.full(step.l, float(c)), name=f"const({c})")


def log_weights(table: dict, name="log_weights") -> SymbolPotential:
    """log p_s where ``table`` maps a base symbol to the weight vector p."""
    logs = {k: np.log(np.asarray(v, dtype=float)) for k, v in table.items()}

    def values(step):
        try:
            return logs[step.base_symbol]
        except KeyError:
            raise DomainError(f"no weights for base symbol {step.base_symbol!r}") from None

    return SymbolPotential(values, name=name)


def uniform_log_weights(name="uniform") -> SymbolPotential:
    return SymbolPotential(lambda step: np.full(step.l, -np.log(step.l)), name=name)


class PointPotential(Potential):
    """gamma(step, symbols, x) evaluated at the coding point."""

    depth = None

    def __init__(self, fn, name="point", variation=("none",)):
        self._fn = fn
        self.name = name
        self.variation = variation

    def evaluate(self, step, symbols, x):
        vals = np.asarray(self._fn(step, symbols, x), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"{self.name}: non-finite values")
        return vals

    def first_values(self, fiber, start, W, x0):
        return self.evaluate(fiber[start], np.asarray(W)[:, 0], x0)


class GeometricPotential(PointPotential):
    """psi(k, s, x) = -log T'_k^s(x)."""

    def __init__(self):
        def psi(step, symbols, x):
            out = np.empty(len(x))
            for s in np.unique(symbols):
                m = symbols == s
                br = step.branches[int(s) - 1]
                xm = x[m]
                if np.any(xm < br.a - 1e-12) or np.any(xm > br.b + 1e-12):
                    raise DomainError(f"point outside U^{int(s)}")
                out[m] = br.psi(np.clip(xm, br.a, br.b))
            return out

        super().__init__(psi, name="psi")


class Combination(Potential):
    """sum_i c_i Gamma_i + const."""

    def __init__(self, terms, const=0.0):
        flat = []
        for c, p in terms:
            if isinstance(p, Combination):
                flat.extend((c * c2, p2) for c2, p2 in p.terms)
                const += c * p.const
            else:
                flat.append((float(c), p))
        self.terms = tuple(flat)
        self.const = float(const)
        depths = [p.depth for _, p in self.terms]
        self.depth = None if any(d is None for d in depths) else max(depths + [1])
        self.name = " + ".join(f"{c:g}*{p.name}" for c, p in self.terms) + (f" + {self.const:g}" if self.const else "")

    def first_values(self, fiber, start, W, x0):
        out = np.full(np.asarray(W).shape[0], self.const)
        for c, p in self.terms:
            if c:
                out += c * p.first_values(fiber, start, W, x0)
        return out


def _leaves(p: Potential):
    if isinstance(p, Combination):
        for _, q in p.terms:
            yield from _leaves(q)
    else:
        yield p


def lookahead_needed(p: Potential) -> int:
    return max([(q.depth or 1) - 1 for q in _leaves(p)] + [0])


def _mixed_radix(fiber, k, W):
    code = np.zeros(W.shape[0], dtype=np.int64)
    for j in range(W.shape[1]):
        code = code * fiber[k + j].l + (W[:, j].astype(np.int64) - 1)
    return code


class CoarsePotential(Potential):
    """Potential constant on depth-``depth`` cylinders of a fixed fiber.

    The value on [w] is (max + min)/2 of the source potential over sampled
    points of the cylinder; tables are built per step on first use.
    """

    def __init__(self, source: Potential, fiber, depth: int, samples: int = 8, budget: int = DEFAULT_BUDGET):
        if depth < 1:
            raise InvalidConfig("coarsening depth must be >= 1")
        self.source = source
        self.fiber = fiber
        self.depth = int(depth)
        self.samples = int(samples)
        self.budget = budget
        self.name = f"coarse{depth}({source.name})"
        self.variation = ("geometric", 1.0, float(depth))
        self._tables = {}

    def table(self, k: int) -> np.ndarray:
        t = self._tables.get(k)
        if t is None:
            t = self._build(k)
            self._tables[k] = t
        return t

    def _build(self, k):
        i = self.depth
        D = max(i, _max_coarse_depth(self.source))
        W = enumerate_words(self.fiber, k, D, self.budget)
        lo, hi = _sampled_range(self.source, self.fiber, k, W, i, self.samples)
        size = int(np.prod([self.fiber[k + j].l for j in range(i)]))
        t = np.full(size, np.nan)
        prefix = _group_starts(W, i)
        t[_mixed_radix(self.fiber, k, W[prefix, :i])] = 0.5 * (lo + hi)
        return t

    def values(self, fiber, k, Wd):
        if fiber is not self.fiber:
            raise DomainError("coarse potential used on a different fiber")
        vals = self.table(k)[_mixed_radix(fiber, k, Wd)]
        if np.any(np.isnan(vals)):
            raise DomainError("coarse table lookup hit an inadmissible word")
        return vals

    def first_values(self, fiber, start, W, x0):
        return self.values(fiber, start, np.asarray(W)[:, : self.depth])


def _max_coarse_depth(p):
    return max([q.depth for q in _leaves(p) if isinstance(q, CoarsePotential)] + [1])


def _group_starts(W, n):
    """Row indices where the length-n prefix changes (W lexicographic)."""
    if W.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.any(W[1:, :n] != W[:-1, :n], axis=1)
    return np.concatenate([[0], np.flatnonzero(change) + 1])


def _sampled_range(potential, fiber, k, W, n, samples):
    """Per length-n prefix group of W: (min, max) of the first value over samples."""
    starts = _group_starts(W, n)
    if lookahead_needed(potential) == 0 and not _has_point(potential):
        vals = potential.first_values(fiber, k, W, np.zeros(W.shape[0]))
        return np.minimum.reduceat(vals, starts), np.maximum.reduceat(vals, starts)
    lo = hi = None
    ys = np.linspace(0.0, 1.0, max(samples, 2)) if _has_point(potential) else [0.0]
    for y in ys:
        x0 = backward_pass(fiber, k, W, y)
        vals = potential.first_values(fiber, k, W, x0)
        a, b = np.minimum.reduceat(vals, starts), np.maximum.reduceat(vals, starts)
        lo = a if lo is None else np.minimum(lo, a)
        hi = b if hi is None else np.maximum(hi, b)
    return lo, hi


def _has_point(p):
    return any(q.depth is None for q in _leaves(p))


def holder_coarsening(potential: Potential, fiber, i: int, samples: int = 8, budget: int = DEFAULT_BUDGET):
    """Potential constant on depth-i cylinders, equal to (max+min)/2 of the source."""
    if isinstance(potential, SymbolPotential):
        return potential
    return CoarsePotential(potential, fiber, i, samples, budget)


def variation_profile(potential: Potential, fiber, max_depth: int, start: int = 0, samples: int = 8,
                      budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Lower estimate of var_n for n = 1..max_depth (index 0 holds n = 1)."""
    out = np.zeros(max_depth)
    for n in range(1, max_depth + 1):
        d = potential.depth
        if d is not None and n >= d:
            continue
        D = max(n, _max_coarse_depth(potential))
        W = enumerate_words(fiber, start, D, budget)
        lo, hi = _sampled_range(potential, fiber, start, W, n, samples)
        out[n - 1] = float(np.max(hi - lo))
    return out


# --------------------------------------------------------------------------
# Birkhoff sums


@dataclass(frozen=True)
class Extension:
    """How a finite word is continued to a point of the attractor.

    ``leftmost``: append ``lookahead`` smallest admissible symbols and take the
    image of 0 (the left endpoint of the extended cylinder interval).
    ``midpoint``: same symbols, image of 1/2.
    """

    rule: str = "leftmost"
    lookahead: int = 0

    def __post_init__(self):
        if self.rule not in ("leftmost", "midpoint"):
            raise InvalidConfig(f"unknown extension rule {self.rule!r}")

    @property
    def seed_point(self) -> float:
        return 0.0 if self.rule == "leftmost" else 0.5


LEFTMOST = Extension()


def birkhoff_sums_for(fiber, start: int, W: np.ndarray, potentials, extension: Extension = LEFTMOST) -> list:
    """S_n Gamma along the extended point of every row of W, for each potential."""
    W = np.asarray(W, dtype=WORD_DTYPE)
    N, n = W.shape
    leaves = []
    for p in potentials:
        for q in _leaves(p):
            if all(q is not r for r in leaves):
                leaves.append(q)
    la = max([extension.lookahead] + [lookahead_needed(p) for p in potentials])
    Wext = extend_leftmost(fiber, start, W, la)
    sums = {id(q): np.zeros(N) for q in leaves}
    point_leaves = [q for q in leaves if q.depth is None]
    if point_leaves:
        Wpt = Wext[:, : n + extension.lookahead]

        def visit(i, x, psi):
            if i >= n:
                return
            step = fiber[start + i]
            for q in point_leaves:
                if isinstance(q, GeometricPotential):
                    sums[id(q)] += psi
                else:
                    sums[id(q)] += q.evaluate(step, Wpt[:, i], x)

        backward_pass(fiber, start, Wpt, extension.seed_point, visit)
    for q in leaves:
        if isinstance(q, SymbolPotential):
            acc = sums[id(q)]
            for i in range(n):
                acc += q.step_values(fiber[start + i])[W[:, i] - 1]
        elif isinstance(q, CoarsePotential):
            acc = sums[id(q)]
            for i in range(n):
                acc += q.values(fiber, start + i, Wext[:, i : i + q.depth])
    return [_combine(p, sums, N, n) for p in potentials]


def _combine(p, sums, N, n):
    if isinstance(p, Combination):
        out = np.full(N, n * p.const)
        for c, q in p.terms:
            if c:
                out = out + c * sums[id(q)]
        return out
    return sums[id(p)]


def birkhoff_sums(fiber, start: int, n: int, potential: Potential, extension: Extension = LEFTMOST,
                  budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """S_n of ``potential`` for every admissible depth-n word.

    Sums are cached per leaf potential on the fiber, so shifted or combined
    potentials reuse the backward passes of their ingredients.
    """
    W = enumerate_words(fiber, start, n, budget)
    sums, missing = {}, []
    for q in _leaves(potential):
        hit = fiber._cache.get(("S", start, n, extension, q))
        if hit is not None:
            sums[id(q)] = hit
        elif all(q is not r for r in missing):
            missing.append(q)
    if missing:
        for q, S in zip(missing, birkhoff_sums_for(fiber, start, W, missing, extension)):
            S.setflags(write=False)
            fiber._cache[("S", start, n, extension, q)] = S
            sums[id(q)] = S
    return _combine(potential, sums, W.shape[0], n)


def birkhoff_sum(potential: Potential, fiber, word: CylinderWord, extension: Extension = LEFTMOST) -> float:
    _require_admissible(fiber, word)
    (S,) = birkhoff_sums_for(fiber, word.start, word.as_array(), [potential], extension)
    return float(S[0])
