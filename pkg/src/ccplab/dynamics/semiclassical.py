"""Action-phase gradients and coarse graining of complex conditional probabilities.

Along a fixed momentum ``p`` the phase of ``P(x|E,p)`` should grow at the
rate ``f_p(x,E) - p``, where ``f_p`` is the classical momentum at ``(x,E)``.
A bound state of a real potential is a standing wave, a superposition of
the ``+f_p`` and ``-f_p`` branches, and its raw phase only jumps by pi at
the nodes. ``gradient_check`` therefore reads the phase off one
momentum-direction branch of the energy state by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ccp import action_phase_decompose, coarse_grain_ccp
from ..errors import ConfigError, ForbiddenRegion
from ..hilbert import HilbertSpec, StateVector, _check_space, dft_matrix, make_momentum_basis, make_position_basis
from .classical import find_turning_points
from .propagators import free_ccp_analytic

BRANCHES = ("positive", "negative", "full")


@dataclass(frozen=True, eq=False)
class GradientReport:
    """Rows restricted to the admissible region.

    ``branch_sign[i]`` is the sign of ``f_p`` that best matches row ``i``.
    """

    positions: np.ndarray
    action: np.ndarray
    fd_gradient: np.ndarray
    prediction: np.ndarray
    relative_error: np.ndarray
    branch_sign: np.ndarray
    mask: np.ndarray
    branch: str

    @property
    def median_relative_error(self) -> float:
        return float(np.median(self.relative_error))

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.fd_gradient - self.prediction)))


def unwrap_action(S: np.ndarray, hbar: float) -> np.ndarray:
    """Sequential unwrapping: add ``2 pi hbar`` wherever a step exceeds ``pi hbar``."""
    return hbar * np.unwrap(np.asarray(S) / hbar)


def branch_projection(state: StateVector, branch: str = "positive") -> np.ndarray:
    """Position amplitudes of the ``p > 0`` (or ``p < 0``) part of ``state``.

    The ``p = 0`` component is shared equally between both branches, so
    the two branches sum back to the state.
    """
    if branch not in BRANCHES:
        raise ConfigError(f"branch must be one of {BRANCHES}, got {branch!r}")
    if branch == "full":
        return state.amplitudes.copy()
    F = dft_matrix(state.space)
    p = state.space.momenta
    s = 1.0 if branch == "positive" else -1.0
    weights = np.where(s * p > 0, 1.0, np.where(p == 0, 0.5, 0.0))
    return F @ (weights * (F.conj().T @ state.amplitudes))


def _admissible_mask(potential, E_value, space, mask_fraction):
    lo, hi = find_turning_points(potential, E_value, space)
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    mask = np.abs(space.positions - center) <= mask_fraction * half
    return mask, (lo, hi)


def _classical_speed(potential, E_value, x, mass):
    kinetic = E_value - np.asarray(potential(x), dtype=float)
    return np.sqrt(2 * mass * np.maximum(kinetic, 0.0))


def gradient_check(
    E_state: StateVector,
    E_value: float,
    p_index: int,
    potential,
    space: HilbertSpec,
    branch: str = "positive",
    mask_fraction: float = 0.7,
) -> GradientReport:
    """Compare ``dS/dx`` of ``S(x) = hbar arg rho(x,p|E)`` with ``f_p(x,E) - p``.

    ``rho`` is evaluated with the chosen ``branch`` of ``|E>`` in the
    ``<x|E>`` slot. Central differences of the unwrapped action are
    compared against both signs of ``f_p`` and the closer one is kept.
    Rows are limited to ``|x - centre| <= mask_fraction * x_turn``.
    """
    _check_space(E_state.space, space)
    if not 0 <= p_index < space.D:
        raise ConfigError(f"p_index must lie in [0, {space.D})")
    mask, _ = _admissible_mask(potential, E_value, space, mask_fraction)
    mask[0] = mask[-1] = False  # central differences need both neighbours
    if not mask.any():
        raise ForbiddenRegion("no admissible grid points after masking")

    F = dft_matrix(space)
    p_col = F[:, p_index]  # <x|p>
    psi_b = branch_projection(E_state, branch)
    E_p = np.vdot(E_state.amplitudes, p_col)  # <E|p>
    rho = p_col.conj() * psi_b * E_p
    S = unwrap_action(space.hbar * np.angle(rho), space.hbar)
    fd = np.zeros_like(S)
    fd[1:-1] = (S[2:] - S[:-2]) / (2 * space.dx)

    x = space.positions[mask]
    p = space.momenta[p_index]
    f = _classical_speed(potential, E_value, x, space.mass)
    fd_m = fd[mask]
    err_plus = np.abs(fd_m - (f - p))
    err_minus = np.abs(fd_m - (-f - p))
    sign = np.where(err_plus <= err_minus, 1, -1)
    prediction = sign * f - p
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(fd_m - prediction) / np.abs(prediction)
    return GradientReport(
        positions=x,
        action=S[mask],
        fd_gradient=fd_m,
        prediction=prediction,
        relative_error=rel,
        branch_sign=sign,
        mask=mask,
        branch=branch,
    )


def free_gradient_check(x_t, x_0: float, p_0: float, t: float, space: HilbertSpec, h: float = 1e-3) -> GradientReport:
    """Finite-difference ``dS/dx_t`` of the free-propagation weak value.

    The classical prediction is ``m (x_t - x_0)/t - p_0``: the momentum that
    carries ``x_0`` to ``x_t`` in time ``t``, minus the reference momentum.
    Phase differences are taken as ``arg(v(x+h)/v(x-h))``, so no unwrapping
    is needed as long as the phase step stays below pi.
    """
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    ahead = free_ccp_analytic(x_t + h, x_0, p_0, t, space)
    behind = free_ccp_analytic(x_t - h, x_0, p_0, t, space)
    fd = space.hbar * np.angle(ahead / behind) / (2 * h)
    prediction = space.mass * (x_t - x_0) / t - p_0
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(fd - prediction) / np.abs(prediction)
    return GradientReport(
        positions=x_t,
        action=space.hbar * np.angle(free_ccp_analytic(x_t, x_0, p_0, t, space)),
        fd_gradient=fd,
        prediction=prediction,
        relative_error=rel,
        branch_sign=np.ones(x_t.size, dtype=int),
        mask=np.ones(x_t.size, dtype=bool),
        branch="free",
    )


@dataclass(frozen=True, eq=False)
class CoarseGrainReport:
    window: int
    delta_x: float
    min_action: float
    fine_mass: float
    coarse_mass: float
    block_values: np.ndarray
    positions: np.ndarray

    @property
    def reduction(self) -> float:
        return self.fine_mass / self.coarse_mass


def coarse_grain_decay(
    E_state: StateVector,
    E_value: float,
    p_index: int,
    potential,
    space: HilbertSpec,
    threshold: float = 10.0,
    mask_fraction: float = 0.7,
    window: int | None = None,
) -> CoarseGrainReport:
    """Block-average ``P(x|E,p)`` over intervals with ``|f_p - p| dx_block >= threshold * hbar``.

    Only the admissible region is used. Unless given, the window is the
    smallest one meeting the threshold at the slowest point of the region.
    Absolute mass is ``sum |block sum|`` against ``sum |value|`` over the
    same points; ``reduction`` is their ratio.
    """
    _check_space(E_state.space, space)
    mask, _ = _admissible_mask(potential, E_value, space, mask_fraction)
    if not mask.any():
        raise ForbiddenRegion("no admissible grid points for coarse graining")
    xb, pb = make_position_basis(space), make_momentum_basis(space)
    p = pb[p_index]
    idx = np.flatnonzero(mask)
    values = [action_phase_decompose(E_state, xb[j], p) for j in idx]

    x = space.positions[idx]
    gap = np.abs(_classical_speed(potential, E_value, x, space.mass) - space.momenta[p_index])
    if window is None:
        if gap.min() <= 0:
            raise ForbiddenRegion("f_p - p vanishes inside the region; no finite window averages it out")
        window = int(np.ceil(threshold * space.hbar / (gap.min() * space.dx)))
    blocks = coarse_grain_ccp(values, window)
    covered = np.array([v.value for v in values])[: blocks.size * window]
    return CoarseGrainReport(
        window=window,
        delta_x=window * space.dx,
        min_action=float(gap.min() * window * space.dx),
        fine_mass=float(np.sum(np.abs(covered))),
        coarse_mass=float(np.sum(np.abs(blocks)) * window),
        block_values=blocks,
        positions=x[: blocks.size * window].reshape(blocks.size, window).mean(axis=1),
    )
