"""Complex conditional probabilities (projector weak values) and identities built on them.

The central object is

    P(m|a,b) = <b|m><m|a> / <b|a>

for an initial condition ``a``, final condition ``b`` and an intermediate
projector ``|m><m|``. Specializing to the position, momentum and energy
bases gives the Kirkwood-Dirac distribution, the ergodicity law, the action
phase decomposition and the reference-momentum wavefunction
reconstruction implemented below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ConfigError, DimensionMismatch, OrthogonalConditions, ZeroReferenceOverlap
from .hilbert import BasisSet, OperatorMatrix, StateVector, _check_space, inner

EPS_OVERLAP = 1e-12


def principal_angle(z: complex) -> float:
    """``arg z`` on (-pi, pi]; ``arg 0 = 0``."""
    angle = float(np.angle(z))
    return np.pi if angle == -np.pi else angle


@dataclass(frozen=True)
class CCPValue:
    """One complex conditional probability in polar form.

    ``action_phase`` is the action ``S = hbar * arg(value)`` on the
    principal branch (-pi*hbar, pi*hbar]. A zero value carries ``S = 0``.
    """

    value: complex
    magnitude: float
    action_phase: float
    context: tuple
    denominator_overlap: complex
    hbar: float = 1.0
    magnitude_identity_residual: float | None = None

    @classmethod
    def from_value(cls, value, context, denominator_overlap, hbar=1.0, **extra) -> "CCPValue":
        value = complex(value)
        return cls(
            value=value,
            magnitude=abs(value),
            action_phase=hbar * principal_angle(value),
            context=tuple(context),
            denominator_overlap=complex(denominator_overlap),
            hbar=hbar,
            **extra,
        )

    @property
    def phase(self) -> float:
        """``S / hbar`` in radians."""
        return self.action_phase / self.hbar

    def __complex__(self):
        return self.value


def _guard(overlap: complex, eps: float, what: str, exc=OrthogonalConditions) -> None:
    if abs(overlap) < eps:
        raise exc(f"|{what}| = {abs(overlap):.3e} is below eps_overlap = {eps:.1e}")


def ccp(m: StateVector, a: StateVector, b: StateVector, eps_overlap: float = EPS_OVERLAP) -> CCPValue:
    """``P(m|a,b) = <b|m><m|a>/<b|a>``."""
    ba = inner(b, a)
    _guard(ba, eps_overlap, "<b|a>")
    value = inner(b, m) * inner(m, a) / ba
    return CCPValue.from_value(value, (m.label, a.label, b.label), ba, a.space.hbar)


def weak_value(A: OperatorMatrix, pre: StateVector, post: StateVector, eps_overlap: float = EPS_OVERLAP) -> complex:
    """``<post|A|pre>/<post|pre>``; equals ``ccp`` for a projector ``A``."""
    _check_space(A.space, pre.space)
    overlap = inner(post, pre)
    _guard(overlap, eps_overlap, "<post|pre>")
    return complex(np.vdot(post.amplitudes, A.entries @ pre.amplitudes) / overlap)


@dataclass(frozen=True, eq=False)
class KDDistribution:
    """``rho(x,p|E) = <p|x><x|E><E|p>``; rows follow positions, columns momenta."""

    matrix: np.ndarray
    generating_state: str
    x_labels: np.ndarray
    p_labels: np.ndarray

    @property
    def position_marginal(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def momentum_marginal(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def total(self) -> complex:
        return complex(self.matrix.sum())


def _overlaps(E: StateVector, xb: BasisSet, pb: BasisSet):
    for basis in (xb, pb):
        _check_space(basis.space, E.space)
    x_E = xb.amplitudes_of(E)  # <x|E>
    p_E = pb.amplitudes_of(E)  # <p|E>
    x_p = xb.matrix.conj().T @ pb.matrix  # <x|p>, indexed [x, p]
    return x_E, p_E, x_p


def kd_distribution(E: StateVector, xb: BasisSet, pb: BasisSet) -> KDDistribution:
    x_E, p_E, x_p = _overlaps(E, xb, pb)
    rho = x_p.conj() * x_E[:, None] * p_E.conj()[None, :]
    return KDDistribution(rho, E.label, xb.labels, pb.labels)


@dataclass(frozen=True, eq=False)
class ErgodicityReport:
    """Residuals of ``|P(x|E,p)|^2 P(p|E) = P(p|x) P(x|E)`` on the (x, p) grid.

    Columns whose ``|<p|E>|`` falls below the overlap guard are excluded:
    their residuals are NaN and their indices are listed in ``excluded``.
    """

    residual: np.ndarray
    max_residual: float
    prob_p_given_E: np.ndarray
    prob_p_given_x: np.ndarray
    prob_x_given_E: np.ndarray
    excluded: tuple


def ergodicity_residuals(
    ccp_abs2: np.ndarray,
    prob_p_given_E: np.ndarray,
    prob_p_given_x: np.ndarray,
    prob_x_given_E: np.ndarray,
    excluded: np.ndarray | None = None,
) -> ErgodicityReport:
    """Evaluate both sides of the ergodicity law from externally supplied maps.

    ``ccp_abs2[x, p]`` plays the role of ``|P(x|E,p)|^2`` and
    ``prob_p_given_x[x, p]`` the role of ``P(p|x)``. Any candidate
    (quantum or classical) can be tested this way.
    """
    ccp_abs2 = np.asarray(ccp_abs2, dtype=float)
    P_pE = np.asarray(prob_p_given_E, dtype=float)
    P_px = np.asarray(prob_p_given_x, dtype=float)
    P_xE = np.asarray(prob_x_given_E, dtype=float)
    if ccp_abs2.shape != P_px.shape or ccp_abs2.shape != (P_xE.size, P_pE.size):
        raise DimensionMismatch("inconsistent shapes for the ergodicity maps")
    excluded = np.zeros(P_pE.size, bool) if excluded is None else np.asarray(excluded, bool)
    residual = np.abs(ccp_abs2 * P_pE[None, :] - P_px * P_xE[:, None])
    residual[:, excluded] = np.nan
    kept = residual[:, ~excluded]
    max_residual = float(kept.max()) if kept.size else 0.0
    return ErgodicityReport(
        residual=residual,
        max_residual=max_residual,
        prob_p_given_E=P_pE,
        prob_p_given_x=P_px,
        prob_x_given_E=P_xE,
        excluded=tuple(int(k) for k in np.flatnonzero(excluded)),
    )


def ergodicity_check(E: StateVector, xb: BasisSet, pb: BasisSet, eps_overlap: float = EPS_OVERLAP) -> ErgodicityReport:
    x_E, p_E, x_p = _overlaps(E, xb, pb)
    excluded = np.abs(p_E) < eps_overlap
    safe = np.where(excluded, 1.0, p_E)
    # P(x|E,p) = <p|x><x|E>/<p|E>
    cond = x_p.conj() * x_E[:, None] / safe[None, :]
    return ergodicity_residuals(
        np.abs(cond) ** 2,
        np.abs(p_E) ** 2,
        np.abs(x_p) ** 2,
        np.abs(x_E) ** 2,
        excluded,
    )


def action_phase_decompose(
    E: StateVector, x: StateVector, p: StateVector, eps_overlap: float = EPS_OVERLAP
) -> CCPValue:
    """``P(x|E,p)`` split into ``exp(iS/hbar)`` times a probability-ratio magnitude.

    The magnitude is cross-checked against ``sqrt(P(p|x) P(x|E) / P(p|E))``;
    the discrepancy is stored as ``magnitude_identity_residual``.
    """
    pE = inner(p, E)
    _guard(pE, eps_overlap, "<p|E>")
    px, xE = inner(p, x), inner(x, E)
    value = px * xE / pE
    predicted = np.sqrt(abs(px) ** 2 * abs(xE) ** 2 / abs(pE) ** 2)
    return CCPValue.from_value(
        value,
        (x.label, E.label, p.label),
        pE,
        E.space.hbar,
        magnitude_identity_residual=float(abs(abs(value) - predicted)),
    )


@dataclass(frozen=True, eq=False)
class Reconstruction:
    raw: np.ndarray
    state: StateVector
    ref_index: int
    reference_momentum: float

    @property
    def probabilities(self) -> np.ndarray:
        """``|psi_rec(x)|^2``, the ergodic probabilities recovered from one reference momentum."""
        return np.abs(self.raw) ** 2


def reconstruct_wavefunction(
    E: StateVector, xb: BasisSet, pb: BasisSet, ref_index: int = 0, eps_overlap: float = EPS_OVERLAP
) -> Reconstruction:
    """``psi(x) = sqrt(P(p0|E)/P(p0|x)) * P(x|E,p0)`` with ``p0 = pb[ref_index]``.

    For the zero-momentum reference this reproduces ``<x|E>`` up to one
    global phase; any other reference multiplies each component by the
    unimodular factor ``<p0|x>/|<p0|x>|``.
    """
    x_E, p_E, x_p = _overlaps(E, xb, pb)
    if not 0 <= ref_index < len(pb):
        raise ConfigError(f"ref_index {ref_index} outside 0..{len(pb) - 1}")
    p0_E = p_E[ref_index]
    p0_x = x_p[:, ref_index].conj()
    _guard(p0_E, eps_overlap, "<p0|E>", ZeroReferenceOverlap)
    if np.min(np.abs(p0_x)) < eps_overlap:
        raise ZeroReferenceOverlap("reference momentum is orthogonal to some position state")
    cond = p0_x * x_E / p0_E  # P(x|E,p0)
    raw = np.sqrt(abs(p0_E) ** 2 / np.abs(p0_x) ** 2) * cond
    state = StateVector(raw, E.space, f"psi_rec[{E.label}]")
    return Reconstruction(raw=raw, state=state, ref_index=int(ref_index), reference_momentum=float(pb.labels[ref_index]))


def optimal_phase_deviation(candidate: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    """Best global phase ``phi`` and ``max|candidate - e^{i phi} target|``."""
    candidate = np.asarray(candidate)
    target = np.asarray(target)
    phi = principal_angle(np.vdot(target, candidate))
    return phi, float(np.max(np.abs(candidate - np.exp(1j * phi) * target)))


def chain_rule_compose(
    m: StateVector, E: StateVector, xb: BasisSet, p0: StateVector, eps_overlap: float = EPS_OVERLAP
) -> complex:
    """``sum_x P(m|x,p0) P(x|E,p0)``, which must equal ``P(m|E,p0)``."""
    for s in (E, p0):
        _check_space(xb.space, s.space)
    p0_E = inner(p0, E)
    _guard(p0_E, eps_overlap, "<p0|E>")
    p0_x = xb.matrix.conj().T @ p0.amplitudes  # <x|p0>
    p0_x = p0_x.conj()  # <p0|x>
    if np.min(np.abs(p0_x)) < eps_overlap:
        raise OrthogonalConditions("reference p0 is orthogonal to some member of the x basis")
    m_x = xb.matrix.conj().T @ m.amplitudes  # <x|m>
    x_E = xb.amplitudes_of(E)
    p0_m = inner(p0, m)
    ccp_m_given_x = p0_m * m_x.conj() / p0_x  # <p0|m><m|x>/<p0|x>
    ccp_x_given_E = p0_x * x_E / p0_E  # <p0|x><x|E>/<p0|E>
    return complex(np.sum(ccp_m_given_x * ccp_x_given_E))


CCPLike = Union[CCPValue, complex]


def coarse_grain_ccp(values: Sequence[CCPLike] | Iterable[CCPLike], window: int) -> np.ndarray:
    """Non-overlapping block averages of complex values along x.

    A trailing partial block is dropped, so the output has
    ``len(values) // window`` entries.
    """
    z = np.array([complex(v) for v in values], dtype=complex)
    if z.size == 0:
        raise ConfigError("coarse graining needs at least one value")
    if isinstance(window, bool) or int(window) != window or not 1 <= window <= z.size:
        raise ConfigError(f"window must be an integer in [1, {z.size}], got {window}")
    window = int(window)
    blocks = z.size // window
    return z[: blocks * window].reshape(blocks, window).mean(axis=1)
