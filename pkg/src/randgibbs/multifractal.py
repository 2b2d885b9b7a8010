"""L^q-spectrum T(q), Legendre spectra and empirical estimators.

T(q) is the root in t of P(q Phi - t Psi) = 0. The pressure is the fixed-depth
ergodic average (1/n) log Z_n built once from the Birkhoff-sum arrays of Phi
and Psi; as a log-sum-exp of affine functions of (q, t) it is jointly convex,
so the computed T is exactly concave and nondecreasing on any grid.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BracketFailure,
    DegenerateSupport,
    InvalidConfig,
    NoisyPressure,
    NotConcave,
    TooShallowWeights,
    UnsupportedMeasure,
)
from .geometry import attractor_cover
from .symbolic import (
    DEFAULT_BUDGET,
    LEFTMOST,
    Extension,
    SymbolPotential,
    _sampled_range,
    birkhoff_sums,
    count_words,
    enumerate_words,
    holder_coarsening,
    lookahead_needed,
)
from .thermo import logsumexp

BRACKET_LIMIT = 64.0
DEFAULT_T_TOL = 1e-8
MAX_DEPTH = 14


@dataclass(frozen=True, eq=False)
class SpectrumCurve:
    """Sampled curve: abscissae ``x``, values ``y`` (may be -inf)."""

    kind: str
    x: np.ndarray
    y: np.ndarray
    uncertainty: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1 or x.size == 0:
            raise InvalidConfig("curve needs matching nonempty 1-D grids")
        if np.any(np.diff(x) <= 0):
            raise InvalidConfig("curve abscissae must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.size

    @property
    def slopes(self) -> np.ndarray:
        """Central-difference slopes at interior nodes."""
        if self.x.size < 3:
            return np.zeros(0)
        return (self.y[2:] - self.y[:-2]) / (self.x[2:] - self.x[:-2])

    def first_differences(self) -> np.ndarray:
        return np.diff(self.y)

    def second_differences(self) -> np.ndarray:
        return np.diff(self.y, 2)

    def finite(self) -> "SpectrumCurve":
        m = np.isfinite(self.y)
        unc = None if self.uncertainty is None else self.uncertainty[m]
        return SpectrumCurve(self.kind, self.x[m], self.y[m], unc, dict(self.meta))

    def to_csv(self, path, header=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["x", "value", "uncertainty"])
            unc = self.uncertainty if self.uncertainty is not None else np.full(self.x.size, np.nan)
            for a, b, u in zip(self.x, self.y, unc):
                w.writerow([repr(float(a)), repr(float(b)), "" if np.isnan(u) else repr(float(u))])


def write_plot_data(path, curves, header=()) -> None:
    """gnuplot-style data file: one indexed block per curve, blank-line separated."""
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        for i, c in enumerate(curves):
            if i:
                fh.write("\n\n")
            fh.write(f"# series {i}: {c.kind}\n")
            for a, b in zip(c.x, c.y):
                if np.isfinite(b):
                    fh.write(f"{float(a)!r} {float(b)!r}\n")


# --------------------------------------------------------------------------
# pressure family and T(q)


def affordable_depth(fiber, start: int = 0, max_depth: int = MAX_DEPTH, lookahead: int = 0,
                     budget: int = DEFAULT_BUDGET) -> int:
    n = min(max_depth, fiber.horizon - start - lookahead)
    while n > 1 and count_words(fiber, start, n) > budget:
        n -= 1
    if n < 1:
        raise InvalidConfig("horizon too short for any depth")
    return n


class PressureFamily:
    """(q, t) -> (1/n) log sum_v exp(q S_n Phi(v) - t S_n Psi(v)) at a fixed depth."""

    def __init__(self, fiber, phi, psi, depth: int | None = None, start: int = 0,
                 extension: Extension = LEFTMOST, budget: int = DEFAULT_BUDGET):
        la = max(lookahead_needed(phi), lookahead_needed(psi), extension.lookahead)
        self.depth = depth or affordable_depth(fiber, start, MAX_DEPTH, la, budget)
        self.fiber, self.phi, self.psi, self.start = fiber, phi, psi, start
        self.A = birkhoff_sums(fiber, start, self.depth, phi, extension, budget)
        self.B = birkhoff_sums(fiber, start, self.depth, psi, extension, budget)

    def __call__(self, q: float, t: float) -> float:
        return logsumexp(q * self.A - t * self.B)[0] / self.depth

    def _with_slope(self, q, t):
        z = q * self.A - t * self.B
        m = z.max()
        e = np.exp(z - m)
        s = e.sum()
        return (m + np.log(s)) / self.depth, -float(e @ self.B) / s / self.depth

    def solve_t(self, q: float, tol: float = DEFAULT_T_TOL) -> float:
        """Root in t of P(q, t) = 0 on a bracket grown geometrically from [-1, 1]."""
        return _bracketed_newton(lambda t: self._with_slope(q, t), tol, f"q={q}")

    def solve_t0(self, tol: float = DEFAULT_T_TOL) -> float:
        """Root of P(t Psi) = 0, solved on its own bracket."""
        def f(t):
            v, dv = self._with_slope(0.0, -t)
            return v, -dv

        return _bracketed_newton(f, tol, "P(t psi)", sign=-1.0)


def _bracketed_newton(fdf, tol, what, sign=1.0):
    """Root of sign * f, f monotone in the direction ``sign``; Newton kept inside a bisection bracket."""
    g = lambda t: tuple(sign * v for v in fdf(t))  # noqa: E731
    lo, hi = -1.0, 1.0
    glo, ghi = g(lo), g(hi)
    while glo[0] > 0:
        lo, hi, ghi = 2 * lo, lo, glo
        if lo < -BRACKET_LIMIT:
            raise BracketFailure(f"no sign change for {what} down to t={-BRACKET_LIMIT}")
        glo = g(lo)
    while ghi[0] < 0:
        lo, hi, glo = hi, 2 * hi, ghi
        if hi > BRACKET_LIMIT:
            raise BracketFailure(f"no sign change for {what} up to t={BRACKET_LIMIT}")
        ghi = g(hi)
    if glo[0] == 0:
        return lo
    if ghi[0] == 0:
        return hi
    t = 0.5 * (lo + hi)
    for _ in range(200):
        v, dv = g(t)
        if v == 0:
            return t
        if v < 0:
            lo = t
        else:
            hi = t
        step = v / dv if dv > 0 else np.inf
        if abs(step) <= tol:
            return t - step
        nt = t - step
        if not lo < nt < hi:
            nt = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return nt
        t = nt
    return t


def contraction_in_mean(fiber, psi, start: int = 0, steps: int | None = None, samples: int = 33) -> float:
    """c_psi estimate: -(1/steps) sum_k max over symbols and sample points of psi(k, s, x)."""
    steps = steps or fiber.horizon - start
    total = 0.0
    seen = {}  # steps are shared objects; the depth-1 sup depends on the step only
    for k in range(start, start + steps):
        key = id(fiber[k])
        if key not in seen:
            W = enumerate_words(fiber, k, 1)
            seen[key] = float(np.max(_sampled_range(psi, fiber, k, W, 1, samples)[1]))
        total += seen[key]
    return -total / steps


def _family(fiber, phi, psi, depth, start, extension, budget):
    key = ("family", start, depth, extension, phi, psi)
    fam = fiber._cache.get(key)
    if fam is None:
        fam = PressureFamily(fiber, phi, psi, depth, start, extension, budget)
        fiber._cache[key] = fam
    return fam


def _check_contraction(fiber, psi, start):
    key = ("c_psi", start, psi)
    c = fiber._cache.get(key)
    if c is None:
        c = contraction_in_mean(fiber, psi, start, min(fiber.horizon - start, 256))
        fiber._cache[key] = c
    if not c > 0:
        raise InvalidConfig(f"psi fails contraction in the mean (c_psi = {c:.4g})")


def solve_T(fiber, phi, psi, q: float, tol: float = DEFAULT_T_TOL, depth: int | None = None, start: int = 0,
            extension: Extension = LEFTMOST, budget: int = DEFAULT_BUDGET) -> float:
    _check_contraction(fiber, psi, start)
    return _family(fiber, phi, psi, depth, start, extension, budget).solve_t(float(q), tol)


def bowen_ruelle_t0(fiber, psi, tol: float = DEFAULT_T_TOL, depth: int | None = None, start: int = 0,
                    extension: Extension = LEFTMOST, budget: int = DEFAULT_BUDGET) -> float:
    _check_contraction(fiber, psi, start)
    zero = SymbolPotential(lambda step: np.zeros(step.l), name="zero")
    return _family(fiber, zero, psi, depth, start, extension, budget).solve_t0(tol)


def T_curve(fiber, phi, psi, q_grid, tol: float = DEFAULT_T_TOL, depth: int | None = None, start: int = 0,
            extension: Extension = LEFTMOST, budget: int = DEFAULT_BUDGET, map_fn=map,
            noise_tol: float | None = None) -> SpectrumCurve:
    """T on ``q_grid``; uncertainty is the shift of T between depths n-1 and n."""
    _check_contraction(fiber, psi, start)
    fam = _family(fiber, phi, psi, depth, start, extension, budget)
    q = np.asarray(q_grid, dtype=float)
    y = np.array(list(map_fn(fam.solve_t, q)))
    unc = None
    if fam.depth > 1:
        coarse = _family(fiber, phi, psi, fam.depth - 1, start, extension, budget)
        unc = np.abs(y - np.array(list(map_fn(coarse.solve_t, q))))
        if noise_tol is not None and float(unc.max()) > noise_tol:
            warnings.warn(NoisyPressure(f"T(q) moves by up to {unc.max():.3g} between the two deepest depths"))
    return SpectrumCurve("T", q, y, unc, {"depth": fam.depth})


# --------------------------------------------------------------------------
# Legendre transform


def _secants(curve):
    return np.diff(curve.y) / np.diff(curve.x)


def check_concave(curve: SpectrumCurve, tol: float = 1e-6) -> None:
    c = curve.finite()
    if len(c) < 3:
        return
    bumps = np.diff(_secants(c)) * np.diff(c.x)[1:]
    if np.any(bumps > tol):
        raise NotConcave(f"{curve.kind}: second difference up to {float(bumps.max()):.3g} exceeds {tol:g}")


def legendre_value(curve: SpectrumCurve, d) -> np.ndarray:
    """inf over the grid of d*x - f(x), -inf outside the secant slope range."""
    c = curve.finite()
    d = np.atleast_1d(np.asarray(d, dtype=float))
    vals = np.min(d[:, None] * c.x[None, :] - c.y[None, :], axis=1)
    if len(c) >= 2:
        s = _secants(c)
        lo, hi = float(s.min()), float(s.max())
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        vals = np.where((d < lo - slack) | (d > hi + slack), -np.inf, vals)
    return vals


def legendre(curve: SpectrumCurve, d_grid=None, n_points: int = 201, tol: float = 1e-6) -> SpectrumCurve:
    """f*(d) = inf_x {d x - f(x)} for a concave sampled f.

    The default grid spans [last secant, first secant]; those endpoints stand
    in for the slopes at +-infinity and are flagged as extrapolated.
    """
    check_concave(curve, tol)
    c = curve.finite()
    if len(c) < 2:
        raise InvalidConfig("legendre transform needs at least two finite nodes")
    s = _secants(c)
    lo, hi = float(s.min()), float(s.max())
    if d_grid is None:
        d_grid = np.array([lo]) if hi - lo <= 1e-12 * max(1.0, abs(lo)) else np.linspace(lo, hi, n_points)
    d = np.asarray(d_grid, dtype=float)
    kind = "T*" if curve.kind == "T" else f"legendre({curve.kind})"
    return SpectrumCurve(kind, d, legendre_value(c, d), None, {"extrapolated_endpoints": (lo, hi), "source": curve.kind})


def legendre_window_sup(curve: SpectrumCurve, d_grid, eps: float, samples: int = 257) -> np.ndarray:
    """sup of f* over [d - eps, d + eps] for each d; -inf where the window misses the domain.

    This is the resolution at which a large-deviation count with window eps
    can be compared with f*.
    """
    c = curve.finite()
    s = _secants(c)
    lo, hi = float(s.min()), float(s.max())
    fine = np.linspace(lo, hi, samples) if hi > lo else np.array([lo])
    peak = float(fine[np.argmax(legendre_value(c, fine))])
    out = []
    for d in np.atleast_1d(np.asarray(d_grid, dtype=float)):
        a, b = max(d - eps, lo), min(d + eps, hi)
        if a > b:
            out.append(-np.inf)
            continue
        pts = np.append(np.linspace(a, b, samples), min(max(peak, a), b))
        out.append(float(np.max(legendre_value(c, pts))))
    return np.array(out)


# --------------------------------------------------------------------------
# ball packings


@dataclass(frozen=True, eq=False)
class Packing:
    radius: float
    centers: np.ndarray
    masses: np.ndarray


def _cover_and_masses(fiber, weights, resolution, radii):
    cover = attractor_cover(fiber, weights.depth, weights.start)
    masses = weights.weights[cover.order]
    longest = float(cover.lengths.max())
    if longest > resolution * float(np.min(radii)) * (1 + 1e-9):
        raise TooShallowWeights(
            f"longest depth-{weights.depth} interval {longest:.3g} exceeds {resolution:g} x min radius"
        )
    return cover, masses


def pack_balls(cover, masses, r: float) -> Packing:
    """Greedy left-to-right packing of disjoint closed r-balls at interval midpoints."""
    keep = masses > 0
    mid = 0.5 * (cover.left + cover.right)[keep]
    if mid.size == 0:
        raise DegenerateSupport("no interval of positive mass")
    chosen = [0]
    i = 0
    while True:
        i = int(np.searchsorted(mid, mid[i] + 2 * r * (1 + 1e-9), side="right"))
        if i >= mid.size:
            break
        chosen.append(i)
    centers = mid[chosen]
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    lo = np.searchsorted(cover.right, centers - r, side="left")
    hi = np.searchsorted(cover.left, centers + r, side="right")
    return Packing(r, centers, cum[hi] - cum[lo])


def _packings(fiber, weights, radii, resolution):
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(radii <= 0):
        raise InvalidConfig("need at least two positive radii")
    cover, masses = _cover_and_masses(fiber, weights, resolution, radii)
    return radii, [pack_balls(cover, masses, r) for r in radii]


def _slope(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = x.size
    if n > 2:
        resid = y - A @ coef
        se = np.sqrt(resid @ resid / (n - 2) / np.sum((x - x.mean()) ** 2))
    else:
        se = 0.0
    return float(coef[0]), float(se)


def empirical_lq(fiber, weights, radii, q_grid, resolution: float = 0.1) -> SpectrumCurve:
    """tau_hat(q): least-squares slope of log sum_i mu(B_i)^q against log r."""
    radii, packs = _packings(fiber, weights, radii, resolution)
    q = np.asarray(q_grid, dtype=float)
    logr = np.log(radii)
    tau = np.empty(q.size)
    se = np.empty(q.size)
    excluded = []
    for j, qq in enumerate(q):
        sums = []
        ex = 0
        for p in packs:
            m = p.masses
            if qq < 0:
                ex += int(np.count_nonzero(m <= 0))
                m = m[m > 0]
            sums.append(logsumexp(qq * np.log(m))[0] if qq != 0 else np.log(m.size))
        excluded.append(ex)
        tau[j], se[j] = _slope(logr, np.array(sums))
    meta = {"radii": radii.tolist(), "balls": [p.centers.size for p in packs], "excluded": excluded}
    return SpectrumCurve("tau_hat", q, tau, se, meta)


def ld_spectrum(fiber, weights, radii, d_grid, eps: float = 0.05, resolution: float = 0.1, tail: int | None = None):
    """Lower and upper large-deviation spectra from packed-ball masses.

    At each radius f_r(d) = log #{i : r^(d+eps) <= mu(B_i) <= r^(d-eps)} / -log r.
    The lower (upper) curve is the min (max) of f_r over the ``tail`` finest
    radii, default half of the grid.
    """
    radii, packs = _packings(fiber, weights, radii, resolution)
    d = np.asarray(d_grid, dtype=float)
    order = np.argsort(radii)
    tail = tail or max(1, (radii.size + 1) // 2)
    rows = []
    for idx in order[:tail]:
        r, m = radii[idx], packs[idx].masses
        alpha = np.sort(np.log(m[m > 0]) / np.log(r))
        lo = np.searchsorted(alpha, d - eps, side="left")
        hi = np.searchsorted(alpha, d + eps, side="right")
        count = hi - lo
        with np.errstate(divide="ignore"):
            rows.append(np.where(count > 0, np.log(np.maximum(count, 1)) / -np.log(r), -np.inf))
    rows = np.array(rows)
    meta = {"eps": eps, "radii": radii[order[:tail]].tolist()}
    return (SpectrumCurve("LD_lower", d, rows.min(axis=0), None, dict(meta)),
            SpectrumCurve("LD_upper", d, rows.max(axis=0), None, dict(meta)))


# --------------------------------------------------------------------------
# variational formula and predictions


def _depth1_values(fiber, potential, k):
    if isinstance(potential, SymbolPotential):
        return potential.step_values(fiber[k])
    coarse = holder_coarsening(potential, fiber, 1)
    W = enumerate_words(fiber, k, 1)
    return coarse.values(fiber, k, W)


def _step_distribution(rho, fiber, k):
    if callable(rho):
        p = rho(fiber[k])
    elif isinstance(rho, dict):
        p = rho[fiber[k].base_symbol]
    else:
        rho = np.asarray(rho, dtype=float)
        p = rho[k] if rho.ndim == 2 else rho
    p = np.asarray(p, dtype=float)
    if p.shape != (fiber[k].l,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise UnsupportedMeasure(f"step {k}: not a probability vector on {fiber[k].l} symbols")
    return p


def variational_ratio(fiber, rho, phi, psi, q: float, start: int = 0, steps: int | None = None) -> float:
    """(h_rho + q int Phi drho) / int Psi drho for a per-step product measure.

    ``rho`` is one probability vector, a (steps, l) array, a dict keyed by
    base symbol, or a callable on FiberStep.
    """
    steps = steps or fiber.horizon - start
    h = iphi = ipsi = 0.0
    for k in range(start, start + steps):
        if not np.all(fiber[k].A == 1):
            raise UnsupportedMeasure(f"step {k} is not a full shift")
        p = _step_distribution(rho, fiber, k)
        nz = p > 0
        h -= float(np.sum(p[nz] * np.log(p[nz])))
        iphi += float(p @ _depth1_values(fiber, phi, k))
        ipsi += float(p @ _depth1_values(fiber, psi, k))
    return (h + q * iphi) / ipsi


@dataclass(frozen=True)
class LevelSetPrediction:
    d: float
    d_prime: float
    dim_H: float  # E(mu, d, d')
    dim_P: float
    lower_dim_H: float  # lower local dimension = d
    lower_dim_P: float
    upper_dim_H: float  # upper local dimension = d
    upper_dim_P: float
    gauge_threshold: float  # T*(d), where the gauge 0-infinity laws switch
    below_peak: bool  # T*(d) < max T*


def level_set_predictions(T: SpectrumCurve, Tstar: SpectrumCurve, d: float, d_prime: float) -> LevelSetPrediction:
    if d > d_prime:
        raise InvalidConfig("need d <= d'")
    td, tdp = legendre_value(T, [d, d_prime])
    grid_x, grid_y = Tstar.x, Tstar.y

    def sup_over(mask, *extra):
        vals = np.concatenate([grid_y[mask], np.asarray(extra, dtype=float)])
        return float(np.max(vals)) if vals.size else -np.inf

    inside = (grid_x >= d) & (grid_x <= d_prime)
    peak = float(np.max(grid_y))
    return LevelSetPrediction(
        d=float(d),
        d_prime=float(d_prime),
        dim_H=float(min(td, tdp)),
        dim_P=sup_over(inside, td, tdp),
        lower_dim_H=float(td),
        lower_dim_P=sup_over(grid_x >= d, td) if np.isfinite(td) else -np.inf,
        upper_dim_H=float(td),
        upper_dim_P=sup_over(grid_x <= d, td) if np.isfinite(td) else -np.inf,
        gauge_threshold=float(td),
        below_peak=bool(td < peak - 1e-12),
    )
