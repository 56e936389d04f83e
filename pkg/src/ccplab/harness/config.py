"""Strict scenario configuration.

A configuration document is a flat JSON object. Keys shared by every
scenario are ``scenario``, ``D``, ``L``, ``hbar``, ``mass``, ``seed``,
``out`` and ``format``; everything else must be a parameter declared by the
chosen scenario. Unknown keys are errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from ..errors import ConfigError
from ..hilbert import HilbertSpec

FORMATS = ("csv", "json")


# Validators return the normalized value or raise ConfigError(msg).
def _int(lo=None, hi=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError("must be an integer")
        if lo is not None and v < lo:
            raise ConfigError(f"must be >= {lo}")
        if hi is not None and v > hi:
            raise ConfigError(f"must be <= {hi}")
        return v

    return check


def _float(positive=False, nonnegative=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError("must be a finite number")
        if positive and v <= 0:
            raise ConfigError("must be positive")
        if nonnegative and v < 0:
            raise ConfigError("must be >= 0")
        return float(v)

    return check


def _coupling(v):
    v = _float()(v)
    if v <= 0:
        raise ConfigError("coupling must be positive; use bias-scan to study the g -> 0 limit")
    return v


def _choice(*options):
    def check(v):
        if v not in options:
            raise ConfigError(f"must be one of {list(options)}")
        return v

    return check


def _bool(v):
    if not isinstance(v, bool):
        raise ConfigError("must be true or false")
    return v


def _float_list(positive=False, descending=False, min_len=1):
    def check(v):
        if not isinstance(v, list) or len(v) < min_len:
            raise ConfigError(f"must be a list of at least {min_len} numbers")
        out = [_float(positive=positive)(x) for x in v]
        if descending and any(b > a for a, b in zip(out, out[1:])):
            raise ConfigError("must be sorted in descending order")
        return out

    return check


def _complex_entry(x):
    if isinstance(x, bool):
        raise ConfigError("amplitudes must be numbers or [re, im] pairs")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(y, (int, float)) and not isinstance(y, bool) for y in x):
        return complex(x[0], x[1])
    raise ConfigError("amplitudes must be numbers or [re, im] pairs")


def _state_spec(*keywords):
    """``"random"``, one of ``keywords``, or an explicit amplitude list."""

    def check(v):
        if isinstance(v, str):
            if v == "random" or v in keywords:
                return v
            raise ConfigError(f"must be 'random', one of {list(keywords)}, or an amplitude list")
        if not isinstance(v, list) or len(v) < 2:
            raise ConfigError("amplitude list needs at least two entries")
        amps = [_complex_entry(x) for x in v]
        if all(a == 0 for a in amps):
            raise ConfigError("amplitude list must not be the zero vector")
        return [[a.real, a.imag] for a in amps]

    return check


@dataclass(frozen=True)
class Param:
    default: Any
    check: Callable[[Any], Any]
    help: str = ""


@dataclass(frozen=True)
class ScenarioDef:
    name: str
    D: int
    L: float | None
    params: dict = field(default_factory=dict)
    summary: str = ""


_HARMONIC = {
    "omega": Param(1.0, _float(positive=True), "oscillator frequency"),
}
_STATE = {
    "state": Param("random", _state_spec("harmonic"), "generating state: random, harmonic or amplitudes"),
    "n": Param(0, _int(lo=0), "oscillator level when state = harmonic"),
    **_HARMONIC,
}
_POTENTIAL = {
    "potential": Param("harmonic", _choice("harmonic", "quartic"), "confining potential"),
    "strength": Param(1.0, _float(positive=True), "quartic strength (V = strength x^4 / 4)"),
    **_HARMONIC,
}
_QUBIT_EXAMPLE = {
    "pre": Param([[1, 0], [0, 0]], _state_spec(), "pre-selected state"),
    "post": Param([[1, 0], [1, 0]], _state_spec(), "post-selected state"),
    "m": Param([[1, 0], [0, 1]], _state_spec(), "projector target |m>"),
    "observable": Param("projector", _choice("projector", "identity"), "measured observable"),
    "sigma": Param(1.0, _float(positive=True), "pointer position spread"),
    "trials": Param(100_000, _int(lo=1), "number of trials"),
    "workers": Param(1, _int(lo=1, hi=64), "parallel workers (does not change results)"),
}

SCENARIOS: dict[str, ScenarioDef] = {
    s.name: s
    for s in [
        ScenarioDef("kd-dist", 8, None, dict(_STATE), "Kirkwood-Dirac distribution rho(x,p|E)"),
        ScenarioDef(
            "ccp",
            2,
            None,
            {
                "m": Param([[1, 0], [0, 1]], _state_spec(), "intermediate state"),
                "a": Param([[1, 0], [0, 0]], _state_spec(), "initial condition"),
                "b": Param([[1, 0], [1, 0]], _state_spec(), "final condition"),
            },
            "complex conditional probability P(m|a,b)",
        ),
        ScenarioDef("ergodicity", 16, None, dict(_STATE), "ergodicity-law residuals"),
        ScenarioDef(
            "reconstruct",
            64,
            None,
            {**_STATE, "ref_index": Param(0, _int(lo=0), "reference momentum basis index")},
            "wavefunction from one reference momentum",
        ),
        ScenarioDef(
            "chain-rule",
            64,
            None,
            {
                "m": Param("random", _state_spec(), "target state"),
                "E": Param("random", _state_spec(), "generating state"),
                "p0_index": Param(0, _int(lo=0), "reference momentum basis index"),
            },
            "chain-rule composition vs direct value",
        ),
        ScenarioDef(
            "action-phase",
            64,
            None,
            {
                "E": Param("random", _state_spec(), "generating state"),
                "p_index": Param(0, _int(lo=0), "momentum basis index"),
            },
            "action phase and magnitude of P(x|E,p) along x",
        ),
        ScenarioDef(
            "free-propagator",
            2048,
            80.0,
            {
                "x0": Param(0.0, _float(), "initial position"),
                "k0": Param(64, _int(), "signed momentum index of p0"),
                "t": Param(1.0, _float(positive=True), "propagation time"),
                "offsets": Param(
                    [-4.75 + 0.5 * i for i in range(20)], _float_list(), "probe offsets from x0 + p0 t/m"
                ),
                "band_limit": Param(True, _bool, "band-limit the lattice position conditions"),
            },
            "free-propagation weak values, analytic vs lattice",
        ),
        ScenarioDef(
            "midpoint",
            2048,
            80.0,
            {
                "x_i": Param(-5.0, _float(), "initial position"),
                "x_f": Param(5.0, _float(), "final position"),
                "T": Param(1.0, _float(positive=True), "half of the total time"),
                "offsets": Param(
                    [-4.75 + 0.5 * i for i in range(20)], _float_list(), "probe offsets from the midpoint"
                ),
                "band_limit": Param(True, _bool, "band-limit the lattice position conditions"),
            },
            "midpoint weak values, analytic vs lattice",
        ),
        ScenarioDef(
            "classical-density",
            256,
            20.0,
            {**_POTENTIAL, "E": Param(1.0, _float(), "orbit energy")},
            "classical ergodic position density",
        ),
        ScenarioDef(
            "gradient-check",
            1024,
            40.0,
            {
                **_POTENTIAL,
                "n": Param(30, _int(lo=0), "energy level"),
                "k": Param(0, _int(), "signed momentum index of p"),
                "branch": Param("positive", _choice("positive", "negative", "full"), "state branch"),
                "mask_fraction": Param(0.7, _float(positive=True), "admissible fraction of the orbit"),
            },
            "action-phase gradient vs classical momentum",
        ),
        ScenarioDef(
            "coarse-grain",
            1024,
            40.0,
            {
                **_POTENTIAL,
                "n": Param(30, _int(lo=0), "energy level"),
                "k": Param(0, _int(), "signed momentum index of p"),
                "threshold": Param(10.0, _float(positive=True), "required |f_p - p| dx / hbar"),
                "mask_fraction": Param(0.7, _float(positive=True), "admissible fraction of the orbit"),
            },
            "block-averaged P(x|E,p) mass reduction",
        ),
        ScenarioDef(
            "weak-sim",
            2,
            None,
            {**_QUBIT_EXAMPLE, "g": Param(0.02, _coupling, "coupling strength")},
            "post-selected weak measurement Monte Carlo",
        ),
        ScenarioDef(
            "bias-scan",
            2,
            None,
            {
                **_QUBIT_EXAMPLE,
                "couplings": Param([0.5, 0.1, 0.02], _float_list(positive=True, descending=True), "couplings"),
            },
            "estimator bias versus coupling",
        ),
    ]
}

COMMON_KEYS = ("scenario", "D", "L", "hbar", "mass", "seed", "out", "format")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    space: HilbertSpec
    params: dict
    seed: int = 0
    out: str | None = None
    format: str = "csv"

    def echo(self) -> dict:
        return {
            "scenario": self.scenario,
            "D": self.space.D,
            "L": self.space.L,
            "hbar": self.space.hbar,
            "mass": self.space.mass,
            "seed": self.seed,
            "format": self.format,
            **self.params,
        }


def _fail(key, message):
    raise ConfigError(f"{key}: {message}")


def parse_config(text: str | None, scenario: str | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Validate a JSON document plus overrides into a ScenarioConfig.

    ``overrides`` (e.g. command-line flags) win over the document. The
    scenario may come from the document or the ``scenario`` argument; if
    both are present they must agree.
    """
    doc: dict = {}
    if text is not None and text.strip():
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    doc = {**doc, **{k: v for k, v in (overrides or {}).items() if v is not None}}

    name = doc.get("scenario", scenario)
    if scenario is not None and name != scenario:
        _fail("scenario", f"config names {name!r} but {scenario!r} was requested")
    if name not in SCENARIOS:
        _fail("scenario", f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    sdef = SCENARIOS[name]

    unknown = sorted(set(doc) - set(COMMON_KEYS) - set(sdef.params))
    if unknown:
        _fail(unknown[0], f"unknown key for scenario {name!r}")

    D = doc.get("D", sdef.D)
    if isinstance(D, bool) or not isinstance(D, int):
        _fail("D", "must be an integer")
    if D < 2:
        _fail("D", f"D ≥ 2 required, got {D}")
    space_args = {"D": D}
    for key, default in (("L", sdef.L), ("hbar", 1.0), ("mass", 1.0)):
        value = doc.get(key, default)
        if value is None:
            continue
        try:
            space_args[key] = _float(positive=True)(value)
        except ConfigError as exc:
            _fail(key, str(exc))
    space = HilbertSpec(**space_args)

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        _fail("seed", "must be an integer in [0, 2**64)")
    fmt = doc.get("format", "csv")
    if fmt not in FORMATS:
        _fail("format", f"must be one of {list(FORMATS)}")
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        _fail("out", "must be a path string")

    params = {}
    for key, spec in sdef.params.items():
        raw = doc.get(key, spec.default)
        try:
            params[key] = spec.check(raw)
        except ConfigError as exc:
            _fail(key, str(exc))
    _check_preconditions(name, space, params)
    return ScenarioConfig(name, space, params, seed, out, fmt)


def _check_preconditions(name: str, space: HilbertSpec, params: dict) -> None:
    """Scenario-level constraints that need more than one key."""
    D = space.D
    for key in ("ref_index", "p0_index", "p_index"):
        if key in params and params[key] >= D:
            _fail(key, f"must be < D = {D}")
    for key in ("k", "k0"):
        if key in params and not -D / 2 < params[key] <= D / 2:
            _fail(key, f"signed momentum index must lie in (-D/2, D/2] for D = {D}")
    for key in ("state", "E", "m", "a", "b", "pre", "post"):
        value = params.get(key)
        if isinstance(value, list) and len(value) != D:
            _fail(key, f"needs {D} amplitudes, got {len(value)}")
    if "mask_fraction" in params and params["mask_fraction"] > 1:
        _fail("mask_fraction", "must be <= 1")
