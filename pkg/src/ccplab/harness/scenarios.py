"""Scenario runners.

Each runner maps a validated ScenarioConfig onto one library operation and
returns a summary dict plus a column table. Complex columns are split into
``<name>_re`` / ``<name>_im`` by ``Table.from_columns``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..ccp import (
    action_phase_decompose,
    ccp,
    chain_rule_compose,
    ergodicity_check,
    kd_distribution,
    optimal_phase_deviation,
    reconstruct_wavefunction,
)
from ..dynamics import (
    classical_density,
    coarse_grain_decay,
    free_ccp_analytic,
    free_ccp_numeric,
    gradient_check,
    midpoint_ccp_analytic,
    midpoint_ccp_numeric,
    midpoint_completeness,
)
from ..errors import CCPLabError, ConfigError
from ..hilbert import (
    OperatorMatrix,
    StateVector,
    discretize_hamiltonian,
    make_momentum_basis,
    make_position_basis,
    projector,
    random_state,
)
from ..potentials import Harmonic, Quartic
from ..weak import WeakSimConfig, bias_scan, estimate_weak_value, simulate
from .config import ScenarioConfig


@dataclass(frozen=True)
class Table:
    columns: tuple
    rows: list

    @classmethod
    def from_columns(cls, **cols) -> "Table":
        names, data = [], []
        for name, values in cols.items():
            arr = np.atleast_1d(np.asarray(values))
            if np.iscomplexobj(arr):
                names += [f"{name}_re", f"{name}_im"]
                data += [arr.real, arr.imag]
            else:
                names.append(name)
                data.append(arr)
        n = {len(d) for d in data}
        if len(n) > 1:
            raise ValueError(f"column lengths differ: {sorted(n)}")
        rows = [tuple(_scalar(d[i]) for d in data) for i in range(n.pop() if n else 0)]
        return cls(tuple(names), rows)


def _scalar(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def _flat_summary(summary: dict) -> dict:
    out = {}
    for key, value in summary.items():
        value = _scalar(value)
        if isinstance(value, complex):
            out[f"{key}_re"] = value.real
            out[f"{key}_im"] = value.imag
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class ResultEnvelope:
    scenario: str
    config: dict
    version: str
    duration: float
    summary: dict
    table: Table = field(repr=False)


# --- state and potential helpers -------------------------------------------------------


def _potential(params, space):
    if params.get("potential", "harmonic") == "quartic":
        return Quartic(params["strength"])
    return Harmonic(params["omega"], space.mass)


def _energy_state(space, potential, n):
    evals, basis = discretize_hamiltonian(space, potential).spectrum
    if n >= space.D:
        raise ConfigError(f"n: level {n} does not exist for D = {space.D}")
    return float(evals[n]), basis[n]


def _state(value, space, rng, params, label):
    if value == "random":
        return random_state(space, rng, label)
    if value == "harmonic":
        return _energy_state(space, Harmonic(params["omega"], space.mass), params["n"])[1]
    return StateVector(np.array([complex(re, im) for re, im in value]), space, label)


# --- runners ---------------------------------------------------------------------------


def _kd_dist(cfg, rng):
    space = cfg.space
    E = _state(cfg.params["state"], space, rng, cfg.params, "E")
    kd = kd_distribution(E, make_position_basis(space), make_momentum_basis(space))
    X, P = np.meshgrid(space.positions, space.momenta, indexing="ij")
    summary = {"total": kd.total, "max_abs": float(np.abs(kd.matrix).max())}
    return summary, Table.from_columns(x=X.ravel(), p=P.ravel(), rho=kd.matrix.ravel())


def _ccp(cfg, rng):
    space = cfg.space
    m, a, b = (_state(cfg.params[k], space, rng, cfg.params, k) for k in ("m", "a", "b"))
    v = ccp(m, a, b)
    summary = {"value": v.value, "magnitude": v.magnitude, "action_phase": v.action_phase}
    return summary, Table.from_columns(
        value=np.array([v.value]),
        magnitude=[v.magnitude],
        action_phase=[v.action_phase],
        denominator_overlap=np.array([v.denominator_overlap]),
    )


def _ergodicity(cfg, rng):
    space = cfg.space
    E = _state(cfg.params["state"], space, rng, cfg.params, "E")
    rep = ergodicity_check(E, make_position_basis(space), make_momentum_basis(space))
    X, P = np.meshgrid(space.positions, space.momenta, indexing="ij")
    summary = {"max_residual": rep.max_residual, "excluded_columns": len(rep.excluded)}
    return summary, Table.from_columns(x=X.ravel(), p=P.ravel(), residual=rep.residual.ravel())


def _reconstruct(cfg, rng):
    space = cfg.space
    E = _state(cfg.params["state"], space, rng, cfg.params, "E")
    xb, pb = make_position_basis(space), make_momentum_basis(space)
    rec = reconstruct_wavefunction(E, xb, pb, cfg.params["ref_index"])
    born = np.abs(E.amplitudes) ** 2
    phi, deviation = optimal_phase_deviation(rec.raw, E.amplitudes)
    summary = {
        "reference_momentum": rec.reference_momentum,
        "global_phase": phi,
        "max_phase_fit_deviation": deviation,
        "max_born_deviation": float(np.max(np.abs(rec.probabilities - born))),
    }
    return summary, Table.from_columns(x=space.positions, psi=rec.raw, psi_exact=E.amplitudes, born=born)


def _chain_rule(cfg, rng):
    space = cfg.space
    E = _state(cfg.params["E"], space, rng, cfg.params, "E")
    m = _state(cfg.params["m"], space, rng, cfg.params, "m")
    xb, pb = make_position_basis(space), make_momentum_basis(space)
    p0 = pb[cfg.params["p0_index"]]
    composed = chain_rule_compose(m, E, xb, p0)
    direct = ccp(m, E, p0).value
    summary = {"composed": composed, "direct": direct, "abs_difference": abs(composed - direct)}
    return summary, Table.from_columns(composed=np.array([composed]), direct=np.array([direct]))


def _action_phase(cfg, rng):
    space = cfg.space
    E = _state(cfg.params["E"], space, rng, cfg.params, "E")
    xb, pb = make_position_basis(space), make_momentum_basis(space)
    p = pb[cfg.params["p_index"]]
    vals = [action_phase_decompose(E, x, p) for x in xb]
    summary = {
        "momentum": space.momenta[cfg.params["p_index"]],
        "max_magnitude_identity_residual": max(v.magnitude_identity_residual for v in vals),
    }
    return summary, Table.from_columns(
        x=space.positions,
        value=np.array([v.value for v in vals]),
        magnitude=[v.magnitude for v in vals],
        action=[v.action_phase for v in vals],
    )


def _free_propagator(cfg, rng):
    space, prm = cfg.space, cfg.params
    j0 = space.position_index(prm["x0"])
    k0 = space.momentum_index(prm["k0"])
    x0, p0, t = space.positions[j0], space.momenta[k0], prm["t"]
    jt = np.array([space.position_index(x0 + p0 * t / space.mass + off) for off in prm["offsets"]])
    numeric = free_ccp_numeric(jt, j0, k0, t, space, band_limit=prm["band_limit"])
    analytic = free_ccp_analytic(space.positions[jt], x0, p0, t, space)
    rel = np.abs(numeric - analytic) / np.abs(analytic)
    summary = {"x0": x0, "p0": p0, "max_rel_error": float(rel.max())}
    return summary, Table.from_columns(x_t=space.positions[jt], analytic=analytic, numeric=numeric, rel_error=rel)


def _midpoint(cfg, rng):
    space, prm = cfg.space, cfg.params
    ji, jf = space.position_index(prm["x_i"]), space.position_index(prm["x_f"])
    xi, xf, T = space.positions[ji], space.positions[jf], prm["T"]
    jm = np.array([space.position_index(0.5 * (xi + xf) + off) for off in prm["offsets"]])
    numeric = midpoint_ccp_numeric(jm, ji, jf, T, space, band_limit=prm["band_limit"])
    analytic = midpoint_ccp_analytic(space.positions[jm], xi, xf, T, space)
    rel = np.abs(numeric - analytic) / np.abs(analytic)
    summary = {
        "x_i": xi,
        "x_f": xf,
        "max_rel_error": float(rel.max()),
        "completeness": midpoint_completeness(ji, jf, T, space, band_limit=prm["band_limit"]),
    }
    return summary, Table.from_columns(x_m=space.positions[jm], analytic=analytic, numeric=numeric, rel_error=rel)


def _classical_density(cfg, rng):
    space = cfg.space
    dens = classical_density(_potential(cfg.params, space), cfg.params["E"], space)
    summary = {
        "period": dens.period,
        "turning_point_lo": dens.turning_points[0],
        "turning_point_hi": dens.turning_points[1],
        "normalization": float(np.sum(dens.cell_mass)),
    }
    return summary, Table.from_columns(x=space.positions, density=dens.position_marginal)


def _gradient_check(cfg, rng):
    space, prm = cfg.space, cfg.params
    potential = _potential(prm, space)
    E_value, E_state = _energy_state(space, potential, prm["n"])
    rep = gradient_check(
        E_state, E_value, space.momentum_index(prm["k"]), potential, space, prm["branch"], prm["mask_fraction"]
    )
    summary = {"energy": E_value, "median_relative_error": rep.median_relative_error, "points": int(rep.positions.size)}
    return summary, Table.from_columns(
        x=rep.positions,
        action=rep.action,
        fd_gradient=rep.fd_gradient,
        prediction=rep.prediction,
        relative_error=rep.relative_error,
    )


def _coarse_grain(cfg, rng):
    space, prm = cfg.space, cfg.params
    potential = _potential(prm, space)
    E_value, E_state = _energy_state(space, potential, prm["n"])
    rep = coarse_grain_decay(
        E_state, E_value, space.momentum_index(prm["k"]), potential, space, prm["threshold"], prm["mask_fraction"]
    )
    summary = {
        "energy": E_value,
        "window": rep.window,
        "delta_x": rep.delta_x,
        "min_action": rep.min_action,
        "fine_mass": rep.fine_mass,
        "coarse_mass": rep.coarse_mass,
        "reduction": rep.reduction,
    }
    return summary, Table.from_columns(x=rep.positions, block=rep.block_values)


def _weak_config(cfg, rng, g):
    space, prm = cfg.space, cfg.params
    pre = _state(prm["pre"], space, rng, prm, "pre")
    post = _state(prm["post"], space, rng, prm, "post")
    m = _state(prm["m"], space, rng, prm, "m")
    if prm["observable"] == "projector":
        A = projector(m)
    else:
        A = OperatorMatrix(np.eye(space.D, dtype=complex), space)
    return WeakSimConfig(pre, post, A, g, prm["sigma"], prm["trials"], cfg.seed)


def _weak_sim(cfg, rng):
    wcfg = _weak_config(cfg, rng, cfg.params["g"])
    record = simulate(wcfg, workers=cfg.params["workers"])
    est = estimate_weak_value(record)
    W = wcfg.analytic_weak_value()
    summary = {
        "analytic": W,
        "estimate": est.value,
        "stderr_re": est.stderr_re,
        "stderr_im": est.stderr_im,
        "accepted_trials": record.accepted_trials,
        "acceptance_fraction": record.acceptance_fraction,
        "expected_acceptance": record.expected_acceptance,
    }
    return summary, Table.from_columns(
        estimate=np.array([est.value]),
        stderr_re=[est.stderr_re],
        stderr_im=[est.stderr_im],
        analytic=np.array([W]),
    )


def _bias_scan(cfg, rng):
    couplings = cfg.params["couplings"]
    wcfg = _weak_config(cfg, rng, couplings[0])
    scan = bias_scan(wcfg, couplings, workers=cfg.params["workers"])
    rows = scan.rows
    summary = {"analytic": wcfg.analytic_weak_value(), "monotone": scan.is_monotone()}
    return summary, Table.from_columns(
        coupling=[r.coupling for r in rows],
        estimate=np.array([r.estimate.value for r in rows]),
        error=[r.error for r in rows],
        error_stderr=[r.error_stderr for r in rows],
        indistinguishable=np.array([r.indistinguishable_from_previous for r in rows], dtype=bool),
    )


RUNNERS = {
    "kd-dist": _kd_dist,
    "ccp": _ccp,
    "ergodicity": _ergodicity,
    "reconstruct": _reconstruct,
    "chain-rule": _chain_rule,
    "action-phase": _action_phase,
    "free-propagator": _free_propagator,
    "midpoint": _midpoint,
    "classical-density": _classical_density,
    "gradient-check": _gradient_check,
    "coarse-grain": _coarse_grain,
    "weak-sim": _weak_sim,
    "bias-scan": _bias_scan,
}


def run_scenario(config: ScenarioConfig) -> ResultEnvelope:
    """Run one scenario.

    Module errors propagate with their type and code unchanged; the scenario
    name is prefixed to the message and stored as ``exc.scenario``.
    """
    rng = np.random.default_rng(config.seed)
    start = time.perf_counter()
    try:
        summary, table = RUNNERS[config.scenario](config, rng)
    except CCPLabError as exc:
        if getattr(exc, "scenario", None) is None:
            exc.scenario = config.scenario
            exc.args = (f"{config.scenario}: {exc}",) + exc.args[1:]
        raise
    return ResultEnvelope(
        scenario=config.scenario,
        config=config.echo(),
        version=__version__,
        duration=time.perf_counter() - start,
        summary=_flat_summary(summary),
        table=table,
    )
