"""Command-line driver.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 resource budget exceeded. Every output file starts with ``#`` header lines
naming the command, scenario, seed, grids and package version.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import __version__
from .errors import BudgetExceeded, RandGibbsError
from .multifractal import (
    T_curve,
    bowen_ruelle_t0,
    contraction_in_mean,
    empirical_lq,
    ld_spectrum,
    legendre,
    legendre_window_sup,
    level_set_predictions,
    write_plot_data,
)
from .scenarios import load_scenario, scenario_diagnostics
from .symbolic import SymbolPotential
from .thermo import gibbs_cylinder_weights, pressure

OUT_ENV = "RANDGIBBS_OUT"
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    scenario: str | None = None  # default cookie_cutter; verify: full suite
    seed: int | None = None
    horizon: int | None = None
    depths: tuple = (4, 6, 8, 10, 12)
    q_grid: tuple = tuple(np.round(np.linspace(-5, 5, 41), 12))
    d_grid: tuple | None = None  # default: 25 points over the T* domain
    radii: tuple | None = None  # default: geometric with ratio exp(-c_psi)
    replicas: int = 1
    out_dir: str | None = None
    threads: int = 1
    eps: float = 0.05
    resolution: float = 0.1
    potential: str = "phi"
    weights_depth: int | None = None
    tolerance_scale: float = 1.0
    criteria: tuple | None = None

    def __post_init__(self):
        for name in ("depths", "q_grid", "d_grid", "radii"):
            g = getattr(self, name)
            if g is None:
                continue
            g = tuple(float(x) if name != "depths" else int(x) for x in g)
            object.__setattr__(self, name, g)
            if not g or any(b <= a for a, b in zip(g, g[1:])):
                raise ConfigError(f"{name} must be nonempty and strictly increasing")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not 0 < self.resolution <= 1:
            raise ConfigError("resolution must lie in (0, 1]")
        if self.potential not in ("phi", "zero", "psi"):
            raise ConfigError("potential must be phi, zero or psi")

    @property
    def output(self) -> str:
        return self.out_dir or os.environ.get(OUT_ENV) or "randgibbs-out"


class ConfigError(RandGibbsError):
    code = "invalid-config"


# --------------------------------------------------------------------------
# grid parsing


def parse_grid(text: str, integer: bool = False) -> tuple:
    """``a,b,c`` or ``lo:hi:count`` (count points, endpoints included)."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            vals = np.linspace(float(lo), float(hi), int(n))
        else:
            vals = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if integer:
        return tuple(int(round(v)) for v in vals)
    return tuple(float(np.round(v, 12)) for v in vals)


def parse_radii(text: str) -> tuple:
    """``b^lo..hi`` for b**-lo ... b**-hi, or an explicit list."""
    if "^" in text:
        base, span = text.split("^")
        lo, hi = span.split("..")
        ex = np.arange(int(lo), int(hi) + 1)
        return tuple(sorted(float(base) ** -e for e in ex))
    return parse_grid(text)


# --------------------------------------------------------------------------
# shared plumbing


def _header(run: RunConfig, command: str, scenario, extra=()) -> list:
    lines = [
        f"randgibbs {__version__}",
        f"command: {command}",
        f"scenario: {scenario.name}",
        f"seed: {run.seed if run.seed is not None else scenario.base.seed}",
        f"horizon: {run.horizon if run.horizon is not None else scenario.base.horizon}",
        f"depths: {','.join(map(str, run.depths))}",
        f"q_grid: {','.join(repr(x) for x in run.q_grid)}",
    ]
    if run.d_grid is not None:
        lines.append(f"d_grid: {','.join(repr(x) for x in run.d_grid)}")
    if run.radii is not None:
        lines.append(f"radii: {','.join(repr(x) for x in run.radii)}")
    return lines + list(extra)


DEFAULT_SCENARIO = "cookie_cutter"


def _prepare(run: RunConfig):
    scenario = load_scenario(run.scenario or DEFAULT_SCENARIO)
    fiber = scenario.sample(run.seed, run.horizon)
    return scenario, fiber


def _potential(run, scenario, fiber):
    if run.potential == "zero":
        return SymbolPotential(lambda step: np.zeros(step.l), "zero")
    if run.potential == "psi":
        return scenario.psi
    return scenario.phi


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(repr(o))


def _finite(x):
    x = float(x)
    return x if np.isfinite(x) else None


# --------------------------------------------------------------------------
# commands


def cmd_pressure(run: RunConfig) -> list:
    scenario = load_scenario(run.scenario or DEFAULT_SCENARIO)
    base_seed = run.seed if run.seed is not None else scenario.base.seed
    os.makedirs(run.output, exist_ok=True)
    fibers, pots, files = [], None, []
    for r in range(run.replicas):
        fiber = scenario.sample(base_seed + r, run.horizon)
        pot = _potential(run, scenario, fiber)
        est = pressure(fiber, pot, run.depths)
        path = os.path.join(run.output, f"pressure_rep{r}.csv")
        est.to_csv(path, _header(run, "pressure", scenario, [f"replica: {r}", f"method: {est.method}"]))
        files.append(path)
        fibers.append(fiber)
        pots = pot
    agg = pressure(fibers, pots, run.depths)
    path = os.path.join(run.output, "pressure.csv")
    extra = [f"replicas: {run.replicas}", f"method: {agg.method}"]
    if agg.stderr is not None:
        extra.append(f"stderr: {agg.stderr!r}")
    agg.to_csv(path, _header(run, "pressure", scenario, extra))
    files.append(path)
    print(f"pressure {agg.value:.10g} (diagnostic {agg.diagnostic:.3g}, method {agg.method})")
    return files


def _t_curve(run, scenario, fiber, pool):
    phi = scenario.normalized_phi(fiber)
    T = T_curve(fiber, phi, scenario.psi, run.q_grid, map_fn=pool.map)
    return phi, T


def cmd_tq(run: RunConfig) -> list:
    scenario, fiber = _prepare(run)
    os.makedirs(run.output, exist_ok=True)
    with ThreadPoolExecutor(run.threads) as pool:
        _, T = _t_curve(run, scenario, fiber, pool)
    path = os.path.join(run.output, "tq.csv")
    T.to_csv(path, _header(run, "tq", scenario, [f"depth: {T.meta['depth']}"]))
    return [path]


def _d_grid(run, Tstar):
    if run.d_grid is not None:
        return np.asarray(run.d_grid)
    lo, hi = Tstar.meta["extrapolated_endpoints"]
    return np.linspace(lo, hi, 25) if hi > lo else np.array([lo])


def cmd_legendre(run: RunConfig) -> list:
    scenario, fiber = _prepare(run)
    os.makedirs(run.output, exist_ok=True)
    with ThreadPoolExecutor(run.threads) as pool:
        _, T = _t_curve(run, scenario, fiber, pool)
    Tstar = legendre(T, run.d_grid)
    path = os.path.join(run.output, "tstar.csv")
    lo, hi = Tstar.meta["extrapolated_endpoints"]
    Tstar.to_csv(path, _header(run, "legendre", scenario, [f"extrapolated_endpoints: {lo!r},{hi!r}"]))
    return [path]


def default_radii(fiber, weights, psi, resolution: float = 0.1, r_max: float = 0.1) -> np.ndarray:
    """Geometric radii with ratio exp(-c_psi) from 10x the longest cylinder up to r_max."""
    from .geometry import attractor_cover

    longest = float(attractor_cover(fiber, weights.depth, weights.start).lengths.max())
    c = contraction_in_mean(fiber, psi, 0, weights.depth)
    r_min = longest / resolution
    count = max(2, int(np.floor(np.log(r_max / r_min) / c)) + 1)
    return r_min * np.exp(c * np.arange(count))


def _weights_and_radii(run, scenario, fiber, phi):
    depth = run.weights_depth or scenario.depth(fiber)
    w = gibbs_cylinder_weights(fiber, phi, depth)
    radii = np.asarray(run.radii) if run.radii is not None else default_radii(fiber, w, scenario.psi, run.resolution)
    return w, radii


def cmd_lq_empirical(run: RunConfig) -> list:
    scenario, fiber = _prepare(run)
    os.makedirs(run.output, exist_ok=True)
    phi = scenario.normalized_phi(fiber)
    w, radii = _weights_and_radii(run, scenario, fiber, phi)
    tau = empirical_lq(fiber, w, radii, run.q_grid, run.resolution)
    path = os.path.join(run.output, "tau_hat.csv")
    tau.to_csv(path, _header(replace(run, radii=tuple(radii)), "lq-empirical", scenario,
                                 [f"weights_depth: {w.depth}", f"resolution: {run.resolution!r}"]))
    return [path]


def cmd_ld(run: RunConfig) -> list:
    scenario, fiber = _prepare(run)
    os.makedirs(run.output, exist_ok=True)
    with ThreadPoolExecutor(run.threads) as pool:
        phi, T = _t_curve(run, scenario, fiber, pool)
    d = _d_grid(run, legendre(T))
    w, radii = _weights_and_radii(run, scenario, fiber, phi)
    lo, up = ld_spectrum(fiber, w, radii, d, run.eps, run.resolution)
    r2 = replace(run, radii=tuple(radii), d_grid=tuple(d))
    files = []
    for c, name in ((lo, "ld_lower.csv"), (up, "ld_upper.csv")):
        path = os.path.join(run.output, name)
        c.to_csv(path, _header(r2, "ld", scenario, [f"eps: {run.eps!r}", f"weights_depth: {w.depth}",
                                                 f"resolution: {run.resolution!r}"]))
        files.append(path)
    return files


def spectrum_summary(scenario, fiber, phi, T, Tstar, tau, lo, up, t0, eps, scale=1.0) -> dict:
    """Pass/fail per invariant with the measured slack."""
    checks = {}
    # along one random fiber T_n itself moves by O(0.1) between depths,
    # so the empirical comparisons are reported but not graded there
    random_fiber = fiber.config.kind != "deterministic"

    def check(name, measured, tol, ok=None, graded=True):
        ok = (measured <= tol) if ok is None else ok
        checks[name] = {"measured": _finite(measured), "tolerance": tol, "passed": bool(ok), "graded": graded}

    q = T.x
    if np.any(np.isclose(q, 1.0)):
        check("T(1)=0", abs(T.y[np.isclose(q, 1.0)][0]), 1e-6 * scale)
    if np.any(np.isclose(q, 0.0)):
        check("T(0)=-t0", abs(T.y[np.isclose(q, 0.0)][0] + t0), 2e-6 * scale)
    if len(T) >= 2:
        check("T nondecreasing", max(0.0, -float(T.first_differences().min())), 1e-6 * scale)
    if len(T) >= 3:
        check("T concave", max(0.0, float(T.second_differences().max())), 1e-6 * scale)
        check("max T* = t0", abs(float(np.nanmax(Tstar.y)) - t0), 1e-2 * scale)
    sel = (tau.x >= -3) & (tau.x <= 3)
    if sel.any():
        check("max |tau_hat - T| on [-3, 3]", float(np.max(np.abs(tau.y[sel] - T.y[sel]))), 0.06 * scale,
              graded=not random_fiber)
    if np.any(np.isclose(tau.x, 1.0)):
        check("tau_hat(1) = 0", abs(float(tau.y[np.isclose(tau.x, 1.0)][0])), 0.05 * scale, graded=not random_fiber)
    if len(T) >= 2:
        bound = legendre_window_sup(T, lo.x, eps) + 0.05 * scale
        for c in (lo, up):
            m = c.y >= 0
            excess = float(np.max(c.y[m] - bound[m])) if m.any() else -np.inf
            check(f"{c.kind} <= T* + 0.05", max(excess, 0.0), 0.0, ok=excess <= 0)
    oracle = scenario.oracle.get("T")
    if callable(oracle):
        check("oracle T", float(np.max(np.abs(T.y - np.array([oracle(x) for x in q])))), 0.02 * scale)
    passed = all(c["passed"] for c in checks.values() if c["graded"])
    return {"scenario": scenario.name, "checks": checks, "passed": passed}


def cmd_spectrum(run: RunConfig) -> list:
    scenario, fiber = _prepare(run)
    os.makedirs(run.output, exist_ok=True)
    with ThreadPoolExecutor(run.threads) as pool:
        phi, T = _t_curve(run, scenario, fiber, pool)
    t0 = bowen_ruelle_t0(fiber, scenario.psi)
    Tstar = legendre(T) if len(T) >= 2 else None
    d = _d_grid(run, Tstar) if Tstar is not None else np.array([0.0])
    w, radii = _weights_and_radii(run, scenario, fiber, phi)
    tau = empirical_lq(fiber, w, radii, run.q_grid, run.resolution)
    lo, up = ld_spectrum(fiber, w, radii, d, run.eps, run.resolution)
    r2 = replace(run, radii=tuple(float(r) for r in radii), d_grid=tuple(float(x) for x in d))
    hdr = _header(r2, "spectrum", scenario, [f"eps: {run.eps!r}", f"weights_depth: {w.depth}",
                                              f"resolution: {run.resolution!r}",
                                              f"solver_depth: {T.meta['depth']}"])
    files = []
    curves = [("tq.csv", T), ("tstar.csv", Tstar), ("tau_hat.csv", tau), ("ld_lower.csv", lo),
              ("ld_upper.csv", up)]
    for name, c in curves:
        if c is None:
            continue
        path = os.path.join(run.output, name)
        c.to_csv(path, hdr)
        files.append(path)
    path = os.path.join(run.output, "spectrum.dat")
    write_plot_data(path, [c for _, c in curves if c is not None], hdr)
    files.append(path)
    preds = {}
    if Tstar is not None:
        dd = Tstar.x
        peak = float(dd[np.argmax(Tstar.y)])
        pairs = {"peak": (peak, peak), "quartiles": (float(np.quantile(dd, 0.25)), float(np.quantile(dd, 0.75)))}
        preds = {k: asdict(level_set_predictions(T, Tstar, a, b)) for k, (a, b) in pairs.items()}
    path = os.path.join(run.output, "predictions.json")
    _write_json(path, {"header": hdr, "t0": t0, "predictions": preds})
    files.append(path)
    summary = spectrum_summary(scenario, fiber, phi, T, Tstar, tau, lo, up, t0, run.eps, run.tolerance_scale) \
        if Tstar is not None else {"scenario": scenario.name, "checks": {}, "passed": True}
    path = os.path.join(run.output, "summary.json")
    _write_json(path, {"header": hdr, **summary})
    files.append(path)
    return files


def cmd_diagnostics(run: RunConfig) -> list:
    scenario, fiber = _prepare(run)
    os.makedirs(run.output, exist_ok=True)
    diag = scenario_diagnostics(scenario, fiber).as_dict()
    diag["mixing_histogram"] = {str(k): v for k, v in diag["mixing_histogram"].items()}
    diag["a0"] = {str(k): v for k, v in diag["a0"].items()}
    path = os.path.join(run.output, "diagnostics.json")
    _write_json(path, {"header": _header(run, "diagnostics", scenario), **diag})
    for k in ("c_psi", "margin_exact", "margin_empirical", "margin_stderr", "truncation_rate", "mean_log_l"):
        print(f"{k}: {diag[k]}")
    return [path]


def cmd_verify(run: RunConfig) -> int:
    from .acceptance import run_criteria, scenario_checks

    results = []
    if run.scenario is not None:
        results.extend(scenario_checks(run.scenario, run.tolerance_scale))
    if run.scenario is None or run.criteria is not None:
        results.extend(run_criteria(run.criteria, run.tolerance_scale))
    report = {"version": __version__, "results": [asdict(r) for r in results],
              "passed": all(r.passed for r in results)}
    os.makedirs(run.output, exist_ok=True)
    _write_json(os.path.join(run.output, "verify.json"), report)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"FAILED: {failed[0].name}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "pressure": cmd_pressure,
    "tq": cmd_tq,
    "legendre": cmd_legendre,
    "lq-empirical": cmd_lq_empirical,
    "ld": cmd_ld,
    "spectrum": cmd_spectrum,
    "diagnostics": cmd_diagnostics,
    "verify": cmd_verify,
}


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randgibbs", description="Multifractal analysis of random weak Gibbs measures.")
    p.add_argument("--version", action="version", version=f"randgibbs {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
        s.add_argument("--scenario", help="builtin name (name:key=value) or scenario JSON path [cookie_cutter]")
        s.add_argument("--seed", type=int, help="base seed [scenario default]")
        s.add_argument("--horizon", type=int, help="fiber steps to realise [scenario default]")
        s.add_argument("--depths", help="depth grid, e.g. 4,8,12 or 4:12:5 [4,6,8,10,12]")
        s.add_argument("--q-grid", help="q grid, e.g. -5:5:41 [-5:5:41]")
        s.add_argument("--d-grid", help="d grid [25 points over the T* domain]")
        s.add_argument("--radii", help="radii, e.g. 3^5..12 for 3^-5..3^-12 [geometric, ratio exp(-c_psi)]")
        s.add_argument("--replicas", type=int, help="independent fibers for pressure [1]")
        s.add_argument("--out", dest="out_dir", help=f"output directory [${OUT_ENV} or ./randgibbs-out]")
        s.add_argument("--threads", type=int, help="worker threads [1]")
        s.add_argument("--eps", type=float, help="large-deviation window [0.05]")
        s.add_argument("--resolution", type=float,
                       help="largest cylinder / smallest radius ratio for ball packings [0.1]")
        s.add_argument("--potential", choices=("phi", "zero", "psi"), help="potential for pressure [phi]")
        s.add_argument("--weights-depth", type=int, help="depth of the Gibbs weights [solver depth]")
        s.add_argument("--tolerance-scale", type=float, help="multiply every verification tolerance [1]")
        s.add_argument("--criteria", help="comma list of acceptance criteria for verify [all]")
    return p


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _coerce(key, value):
    if value is None:
        return None
    if key == "depths":
        return parse_grid(value, integer=True) if isinstance(value, str) else tuple(int(v) for v in value)
    if key in ("q_grid", "d_grid"):
        return parse_grid(value) if isinstance(value, str) else tuple(float(v) for v in value)
    if key == "radii":
        return parse_radii(value) if isinstance(value, str) else tuple(float(v) for v in value)
    if key == "criteria":
        if isinstance(value, str):
            return tuple(int(v) for v in value.split(",") if v.strip())
        return tuple(int(v) for v in value)
    return value


def run_config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(raw) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        data.update(raw)
    for key in _FIELD_NAMES:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = run_config_from_args(args)
        out = COMMANDS[args.command](run)
    except BudgetExceeded as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except RandGibbsError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if isinstance(out, int):
        return out
    for path in out:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
