"""Builtin scenarios, scenario files and scenario-level diagnostics.

Scenario files are JSON::

    {
      "name": "my_scenario",
      "base": {"kind": "bernoulli", "symbols": [0, 1], "probabilities": [0.5, 0.5],
               "horizon": 64, "seed": 0},
      "model": "table",
      "fibers": {
        "0": {"intervals": [[0, 0.25], [0.5, 1]], "a0": 1.0},
        "1": {"intervals": [[0, 1]], "profiles": [{"kind": "polynomial", "coeffs": [0, 0.5, 0.5]}]}
      },
      "phi": {"kind": "log_weights", "weights": {"0": [0.3, 0.7], "1": [1.0]}}
    }

``base.kind`` is one of deterministic (needs ``pattern``), bernoulli
(``symbols``, ``probabilities``), markov (``symbols``, ``kernel``, optional
``initial``) or gamma (``l_max``; the base symbols are the alphabet sizes).
``model`` is "table" (fibers keyed by the base symbol written as a string)
or "gamma". Profiles default to affine; other kinds are ``polynomial``
(ascending ``coeffs``) and ``series`` (``base``, ``terms``). ``phi.kind`` is
log_weights, uniform, zero or geometric (psi shifted by its pressure).
"""
from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .base import (
    BaseConfig,
    GammaModel,
    TableModel,
    gamma_probabilities,
    mixing_time,
    sample_fiber_sequence,
    symbol_fiber,
)
from .branches import Identity, Polynomial, SineSeries, profile_from_dict
from .errors import HorizonExhausted, InvalidConfig, SchemaError, UnknownScenario
from .multifractal import affordable_depth, contraction_in_mean
from .symbolic import (
    GeometricPotential,
    SymbolPotential,
    log_weights,
    lookahead_needed,
    uniform_log_weights,
)
from .thermo import normalize_potential


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    base: BaseConfig
    phi: object
    psi: object
    oracle: dict = field(default_factory=dict)
    a0: dict = field(default_factory=dict)
    description: str = ""

    def sample(self, seed: int | None = None, horizon: int | None = None):
        cfg = self.base
        if seed is not None:
            cfg = cfg.with_seed(seed)
        if horizon is not None:
            cfg = cfg.with_horizon(horizon)
        fiber = sample_fiber_sequence(cfg)
        _check_psi(self, fiber)
        return fiber

    def depth(self, fiber, max_depth: int = 14, start: int = 0) -> int:
        la = max(lookahead_needed(self.phi), lookahead_needed(self.psi))
        return affordable_depth(fiber, start, max_depth, la)

    def normalized_phi(self, fiber, depth: int | None = None, start: int = 0):
        """Phi shifted so that (1/n) log Z_n(Phi) = 0 at the solver depth."""
        depth = depth or self.depth(fiber, start=start)
        return normalize_potential(fiber, self.phi, depth, start=start)[0]


def _check_psi(scenario, fiber, samples: int = 17):
    """Psi must agree with -log T' of the realised branches."""
    if not isinstance(scenario.psi, GeometricPotential):
        return
    step = fiber[0]
    for s, br in enumerate(step.branches, start=1):
        x = np.linspace(br.a, br.b, samples)
        got = scenario.psi.evaluate(step, np.full(samples, s), x)
        if np.max(np.abs(got + np.log(br.derivative(x)))) > 1e-10:
            raise InvalidConfig(f"{scenario.name}: psi disagrees with the branch derivative of symbol {s}")


def _geometric_phi(psi):
    # shifted later by normalize_potential; 1 * psi keeps it a separate object
    return 1.0 * psi


# --------------------------------------------------------------------------
# builtins


def cookie_cutter(p=(0.5, 0.5), r=(1 / 3, 1 / 3), horizon: int = 64) -> Scenario:
    """Two affine branches onto [0, r1] and [1 - r2, 1] with Bernoulli weights p."""
    p = tuple(float(x) for x in p)
    r = tuple(float(x) for x in r)
    if len(p) != 2 or len(r) != 2 or abs(sum(p) - 1) > 1e-12 or min(p) <= 0:
        raise InvalidConfig("cookie cutter needs two positive weights summing to 1")
    if min(r) <= 0 or r[0] + r[1] > 1:
        raise InvalidConfig("cookie cutter ratios must be positive with r1 + r2 <= 1")
    model = TableModel({0: symbol_fiber([(0.0, r[0]), (1.0 - r[1], 1.0)], a0=1.0)})
    base = BaseConfig("deterministic", model, symbols=(0,), pattern=(0,), horizon=horizon)
    oracle = {"c_psi": -math.log(max(r))}
    if abs(r[0] - r[1]) < 1e-15:
        lr = -math.log(r[0])
        oracle["T"] = lambda q: -math.log(p[0] ** q + p[1] ** q) / lr
        oracle["t0"] = math.log(2) / lr
        oracle["d_hat"] = -(p[0] * math.log(p[0]) + p[1] * math.log(p[1])) / lr
    return Scenario(f"cookie_cutter(p={p[0]:g},{p[1]:g};r={r[0]:.6g},{r[1]:.6g})", base,
                    log_weights({0: p}), GeometricPotential(), oracle, {0: 1.0},
                    "deterministic two-branch Cantor set with Bernoulli weights")


def full_interval(horizon: int = 64) -> Scenario:
    """x -> 2x mod 1 with uniform weights: the attractor is [0, 1]."""
    model = TableModel({0: symbol_fiber([(0.0, 0.5), (0.5, 1.0)], a0=1.0)})
    base = BaseConfig("deterministic", model, symbols=(0,), pattern=(0,), horizon=horizon)
    oracle = {"c_psi": math.log(2), "t0": 1.0, "T": lambda q: q - 1.0, "margin": 0.0}
    return Scenario("full_interval", base, uniform_log_weights(), GeometricPotential(), oracle, {0: 1.0},
                    "Lebesgue sanity case")


THREE_STATE_WEIGHTS = {0: (0.1, 0.2, 0.3, 0.4), 1: (1.0,), 2: (0.2, 0.5, 0.3)}
THREE_STATE_A0 = {0: 1.0, 1: 0.5, 2: 7 / 8}


def three_state_model() -> TableModel:
    return TableModel({
        0: symbol_fiber([(0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1)], a0=THREE_STATE_A0[0]),
        1: symbol_fiber([(0, 1)], [SineSeries(6.0, 24)], a0=THREE_STATE_A0[1]),
        2: symbol_fiber([(0, 1 / 9), (1 / 9, 2 / 9), (2 / 3, 7 / 9)],
                        [Identity(), Polynomial((0.0, 7 / 8, 1 / 8)), Identity()], a0=THREE_STATE_A0[2]),
    })


def example_three_state(phi: str = "log_weights", horizon: int = 64, seed: int = 0) -> Scenario:
    """Uniform Bernoulli base on {0, 1, 2} with l = 4, 1, 3; fullshift fibers.

    ``phi`` is "log_weights" (depth-1 weights in THREE_STATE_WEIGHTS) or
    "geometric" (phi = psi, normalised per fiber).
    """
    base = BaseConfig("bernoulli", three_state_model(), symbols=(0, 1, 2), probabilities=(1 / 3, 1 / 3, 1 / 3),
                      horizon=horizon, seed=seed)
    psi = GeometricPotential()
    if phi == "log_weights":
        pot = log_weights(THREE_STATE_WEIGHTS)
    elif phi == "geometric":
        pot = _geometric_phi(psi)
    else:
        raise InvalidConfig(f"unknown phi choice {phi!r}")
    oracle = {"margin": (math.log(21) - math.log(16)) / 3, "a0": (1.0, 0.5, 7 / 8), "l": (4, 1, 3)}
    return Scenario(f"example_three_state(phi={phi})", base, pot, psi, oracle, dict(THREE_STATE_A0),
                    "three-state random fullshift with a C^1 non-expanding branch")


def example_gamma(l_max: int = 8, horizon: int = 64, seed: int = 0) -> Scenario:
    """Base symbols n with P(n) = 1/(n(n+1)) truncated at l_max; branches n x mod 1."""
    base = BaseConfig("gamma", GammaModel(), horizon=horizon, seed=seed, l_max=l_max)

    def harmonic(step):
        w = 1.0 / np.arange(1, step.l + 1)
        return np.log(w / w.sum())

    pmf = gamma_probabilities(l_max)
    pmf = pmf / pmf.sum()
    oracle = {"mean_log_l": float(pmf @ np.log(np.arange(1, l_max + 1))), "margin": 0.0}
    return Scenario(f"example_gamma(l_max={l_max})", base, SymbolPotential(harmonic, "harmonic"),
                    GeometricPotential(), oracle, {n: 1.0 for n in range(1, l_max + 1)},
                    "random subshift with unbounded alphabet, truncated")


BUILTINS = {
    "cookie_cutter": lambda **kw: cookie_cutter(**kw),
    "cookie_cutter_unequal": lambda **kw: cookie_cutter(**{"p": (0.25, 0.75), **kw}),
    "example_three_state": lambda **kw: example_three_state(**kw),
    "example_gamma": lambda **kw: example_gamma(**kw),
    "full_interval": lambda **kw: full_interval(**kw),
}

_PARAM_TYPES = {"p": "floats", "r": "floats", "l_max": int, "horizon": int, "seed": int, "phi": str}


def _parse_reference(ref: str):
    """``name`` or ``name:key=v1,v2:key=v``."""
    name, *parts = ref.split(":")
    params = {}
    for part in parts:
        if "=" not in part:
            raise InvalidConfig(f"bad scenario parameter {part!r}")
        key, val = part.split("=", 1)
        kind = _PARAM_TYPES.get(key)
        if kind is None:
            raise InvalidConfig(f"unknown scenario parameter {key!r}")
        try:
            params[key] = tuple(_number(v) for v in val.split(",")) if kind == "floats" else kind(val)
        except ValueError:
            raise InvalidConfig(f"bad value for {key}: {val!r}") from None
    return name, params


def _number(text):
    m = re.fullmatch(r"\s*(-?[\d.eE+-]+)\s*/\s*([\d.eE+-]+)\s*", text)
    return float(m.group(1)) / float(m.group(2)) if m else float(text)


def load_scenario(ref, **params) -> Scenario:
    """A builtin by name (optionally ``name:key=value``) or a JSON scenario file."""
    if isinstance(ref, Scenario):
        return ref
    ref = str(ref)
    if os.path.exists(ref) or ref.endswith(".json"):
        try:
            with open(ref) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise UnknownScenario(f"scenario file {ref!r} not found") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{ref}: not valid JSON ({exc})") from None
        return scenario_from_dict(data)
    name, parsed = _parse_reference(ref)
    if name not in BUILTINS:
        raise UnknownScenario(f"unknown scenario {name!r}; builtins are {', '.join(sorted(BUILTINS))}")
    try:
        return BUILTINS[name](**{**parsed, **params})
    except TypeError as exc:
        raise InvalidConfig(f"{name}: {exc}") from None


_NUM = {"type": "number"}
_PROB_LIST = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}
SCHEMA = {
    "type": "object",
    "required": ["base", "model"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "base": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["deterministic", "bernoulli", "markov", "gamma"]},
                "symbols": {"type": "array", "items": {"type": ["integer", "string"]}},
                "probabilities": _PROB_LIST,
                "kernel": {"type": "array", "items": _PROB_LIST},
                "initial": _PROB_LIST,
                "pattern": {"type": "array", "items": {"type": ["integer", "string"]}, "minItems": 1},
                "horizon": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "l_max": {"type": "integer", "minimum": 2},
            },
        },
        "model": {"enum": ["table", "gamma"]},
        "fibers": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["intervals"],
                "additionalProperties": False,
                "properties": {
                    "intervals": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                    },
                    "profiles": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["kind"],
                            "properties": {
                                "kind": {"enum": ["affine", "polynomial", "series"]},
                                "coeffs": {"type": "array", "items": _NUM},
                                "base": _NUM,
                                "terms": {"type": "integer", "minimum": 1},
                            },
                        },
                    },
                    "a0": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "phi": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["log_weights", "uniform", "zero", "geometric"]},
                "weights": {"type": "object", "additionalProperties": _PROB_LIST},
            },
        },
        "oracle": {"type": "object"},
    },
}


def _path(error) -> str:
    out = ""
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def scenario_from_dict(data: dict) -> Scenario:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SchemaError(f"{_path(e)}: {e.message}", path=_path(e))
    b = data["base"]
    kind = b["kind"]
    symbols = tuple(b.get("symbols", ()))
    if kind == "deterministic" and not symbols:
        symbols = tuple(dict.fromkeys(b.get("pattern", ())))
    if data["model"] == "gamma":
        model = GammaModel()
        a0 = {n: 1.0 for n in range(1, b.get("l_max", 8) + 1)}
    else:
        fibers = data.get("fibers") or {}
        table, a0 = {}, {}
        for s in symbols:
            spec = fibers.get(str(s))
            if spec is None:
                raise SchemaError(f"fibers.{s}: missing fiber table for base symbol {s!r}", path=f"fibers.{s}")
            ivs = spec["intervals"]
            profs = spec.get("profiles") or [{"kind": "affine"}] * len(ivs)
            if len(profs) != len(ivs):
                raise SchemaError(f"fibers.{s}.profiles: expected {len(ivs)} entries", path=f"fibers.{s}.profiles")
            table[s] = symbol_fiber(ivs, [profile_from_dict(p) for p in profs], spec.get("a0"))
            a0[s] = spec.get("a0")
        model = TableModel(table)
    base = BaseConfig(
        kind,
        model,
        symbols=symbols,
        probabilities=tuple(b.get("probabilities", ())),
        kernel=tuple(tuple(r) for r in b.get("kernel", ())),
        initial=tuple(b.get("initial", ())),
        pattern=tuple(b.get("pattern", ())),
        horizon=b.get("horizon", 64),
        seed=b.get("seed", 0),
        l_max=b.get("l_max", 8),
    )
    # validate every branch eagerly so broken geometry fails at load time
    steps_symbols = range(1, base.l_max + 1) if data["model"] == "gamma" else symbols
    for s in steps_symbols:
        model.branches(s)
    psi = GeometricPotential()
    ph = data.get("phi", {"kind": "uniform"})
    if ph["kind"] == "log_weights":
        w = ph.get("weights") or {}
        try:
            phi = log_weights({s: tuple(w[str(s)]) for s in symbols})
        except KeyError as exc:
            raise SchemaError(f"phi.weights: missing entry {exc}", path="phi.weights") from None
    elif ph["kind"] == "uniform":
        phi = uniform_log_weights()
    elif ph["kind"] == "zero":
        phi = SymbolPotential(lambda step: np.zeros(step.l), "zero")
    else:
        phi = _geometric_phi(psi)
    return Scenario(data.get("name", "custom"), base, phi, psi, dict(data.get("oracle", {})), a0,
                    data.get("description", ""))


# --------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class ScenarioDiagnostics:
    name: str
    steps: int
    c_psi: float
    margin_exact: float | None
    margin_empirical: float | None
    margin_stderr: float | None
    margin_boundary: bool
    mixing_histogram: dict
    truncation_rate: float
    mean_log_l: float
    a0: dict

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _step_margin(step, a0):
    if a0 is None:
        return None
    return math.log(a0) - math.log(step.length_sum)


def _exact_margin(scenario: Scenario):
    base = scenario.base
    if base.kind == "gamma" and isinstance(base.model, GammaModel):
        return 0.0  # identity branches covering [0, 1]
    if base.kind == "bernoulli":
        dist = dict(zip(base.symbols, base.probabilities))
    elif base.kind == "deterministic":
        dist = {s: base.pattern.count(s) / len(base.pattern) for s in set(base.pattern)}
    else:
        return None
    total = 0.0
    for s, w in dist.items():
        a0 = base.model.a0(s)
        if a0 is None:
            return None
        length = sum(br.length for br in base.model.branches(s))
        total += w * (math.log(a0) - math.log(length))
    return total


def scenario_diagnostics(scenario: Scenario, fiber, mixing_starts: int = 256) -> ScenarioDiagnostics:
    """c_psi, the a0 / length-sum margin, mixing times and truncation statistics."""
    n = fiber.horizon
    margins = [_step_margin(fiber[k], fiber[k].a0) for k in range(n)]
    if all(m is not None for m in margins):
        arr = np.array(margins)
        emp = float(arr.mean())
        se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    else:
        emp = se = None
    exact = _exact_margin(scenario)
    hist = {}
    for k in range(min(mixing_starts, n)):
        try:
            m = mixing_time(fiber, k)
        except HorizonExhausted:
            m = "exhausted"
        hist[m] = hist.get(m, 0) + 1
    ref = exact if exact is not None else emp
    return ScenarioDiagnostics(
        name=scenario.name,
        steps=n,
        c_psi=contraction_in_mean(fiber, scenario.psi, 0, n),
        margin_exact=exact,
        margin_empirical=emp,
        margin_stderr=se,
        margin_boundary=ref is not None and abs(ref) < 1e-12,
        mixing_histogram=dict(sorted(hist.items(), key=lambda kv: (isinstance(kv[0], str), kv[0]))),
        truncation_rate=fiber.truncations / len(fiber.trace),
        mean_log_l=float(np.mean(np.log(fiber.ls()))),
        a0=dict(scenario.a0),
    )
