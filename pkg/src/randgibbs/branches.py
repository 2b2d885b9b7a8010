"""Branch maps T = profile o (affine rescaling of [a, b] onto [0, 1]).

A profile is an increasing C^1 diffeomorphism of [0, 1]. Three kinds are
supported: the identity, polynomials with ascending coefficients, and the
lacunary sine series ``h(u) = base + sum_j j**-2 sin(2**j pi u)`` normalised
by its integral.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonMonotoneBranch

DEFAULT_TOL = 1e-12
_GRID = np.linspace(0.0, 1.0, 4097)


def _safeguarded_newton(f, df, y, tol, maxiter=200):
    """Solve f(x) = y on [0, 1] for increasing f, elementwise.

    Bisection keeps a bracket; Newton steps are taken only while they stay
    inside it.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if np.any((y < -tol) | (y > 1 + tol)):
        raise NonMonotoneBranch("target outside [0, 1]", y=y)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    x = np.clip(y, 0.0, 1.0)
    for _ in range(maxiter):
        r = f(x) - y
        done = np.abs(r) <= tol
        if done.all():
            break
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        if np.any(lo > hi):
            raise NonMonotoneBranch("bracket inverted during inversion")
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - r / d
        outside = ~((xn > lo) & (xn < hi)) | ~np.isfinite(xn)
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        x = np.where(done, x, xn)
        if np.all(done | (hi - lo <= 4 * np.finfo(float).eps)):
            break
    r = np.abs(f(x) - y)
    # a collapsed bracket with large residual means the map is not monotone
    if np.any(r > max(tol, 1e-9)):
        raise NonMonotoneBranch("inversion did not converge", residual=float(r.max()))
    return x[0] if scalar else x


class Profile:
    kind = "abstract"

    def value(self, u):
        raise NotImplementedError

    def derivative(self, u):
        raise NotImplementedError

    def inverse(self, y, tol=DEFAULT_TOL):
        return _safeguarded_newton(self.value, self.derivative, y, tol)

    def describe(self) -> dict:
        return {"kind": self.kind}


class Identity(Profile):
    kind = "affine"

    def value(self, u):
        return np.asarray(u, dtype=float)

    def derivative(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def inverse(self, y, tol=DEFAULT_TOL):
        return np.asarray(y, dtype=float)


@dataclass(frozen=True)
class Polynomial(Profile):
    """p(u) = sum_k coeffs[k] u**k; must satisfy p(0)=0, p(1)=1."""

    coeffs: tuple
    kind = "polynomial"

    def value(self, u):
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def derivative(self, u):
        c = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(u, c)

    def describe(self):
        return {"kind": self.kind, "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class SineSeries(Profile):
    """Normalised antiderivative of h(u) = base + sum_{j<=J} j**-2 sin(2**j pi u).

    Each truncated term integrates in closed form and vanishes over [0, 1],
    so the normaliser is exactly ``base``.
    """

    base: float = 6.0
    terms: int = 24
    kind = "series"
    _freq: np.ndarray = field(init=False, repr=False, compare=False)
    _coef: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        j = np.arange(1, self.terms + 1, dtype=float)
        object.__setattr__(self, "_freq", np.pi * 2.0**j)
        object.__setattr__(self, "_coef", j**-2)

    def h(self, u):
        u = np.asarray(u, dtype=float)
        s = np.sin(np.multiply.outer(u, self._freq)) @ self._coef
        return self.base + s

    def value(self, u):
        u = np.asarray(u, dtype=float)
        anti = (1.0 - np.cos(np.multiply.outer(u, self._freq))) @ (self._coef / self._freq)
        return (self.base * u + anti) / self.base

    def derivative(self, u):
        return self.h(u) / self.base

    def tail_bound(self) -> float:
        # sum_{j>J} j^-2 <= 1/J
        return 1.0 / self.terms

    def describe(self):
        return {"kind": self.kind, "base": self.base, "terms": self.terms}


def profile_from_dict(spec: dict) -> Profile:
    kind = spec.get("kind", "affine")
    if kind == "affine":
        return Identity()
    if kind == "polynomial":
        return Polynomial(tuple(float(c) for c in spec["coeffs"]))
    if kind == "series":
        return SineSeries(float(spec.get("base", 6.0)), int(spec.get("terms", 24)))
    raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class BranchMap:
    """Increasing C^1 map T of [a, b] onto [0, 1]."""

    profile: Profile
    a: float
    b: float

    def __post_init__(self):
        validate_branch(self)

    @property
    def length(self) -> float:
        return self.b - self.a

    def forward(self, x):
        return self.profile.value((np.asarray(x, dtype=float) - self.a) / self.length)

    def derivative(self, x):
        return self.profile.derivative((np.asarray(x, dtype=float) - self.a) / self.length) / self.length

    def inverse(self, y, tol=DEFAULT_TOL):
        return self.a + self.length * self.profile.inverse(y, tol)

    def psi(self, x):
        """-log T'(x)."""
        return -np.log(self.derivative(x))

    def inverse_with_psi(self, y, tol=DEFAULT_TOL):
        """Return (g(y), psi(g(y))) without recomputing the rescaled point."""
        u = self.profile.inverse(y, tol)
        return self.a + self.length * u, np.log(self.length) - np.log(self.profile.derivative(u))


def validate_branch(branch: BranchMap) -> None:
    if not (branch.b > branch.a):
        raise NonMonotoneBranch(f"degenerate interval [{branch.a}, {branch.b}]")
    if branch.a < -1e-15 or branch.b > 1 + 1e-15:
        raise NonMonotoneBranch(f"interval [{branch.a}, {branch.b}] leaves [0, 1]")
    p = branch.profile
    ends = np.asarray(p.value(np.array([0.0, 1.0])), dtype=float)
    if abs(ends[0]) > 1e-10 or abs(ends[1] - 1.0) > 1e-10:
        raise NonMonotoneBranch(f"profile endpoints {ends.tolist()} differ from (0, 1)")
    d = np.asarray(p.derivative(_GRID))
    if not np.all(d > 0):
        raise NonMonotoneBranch("profile derivative is not positive on the sample grid")


def invert_branch(branch: BranchMap, y, tol=DEFAULT_TOL):
    """x in [a, b] with |T(x) - y| <= tol."""
    return branch.inverse(y, tol)
