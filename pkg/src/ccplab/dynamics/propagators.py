"""Free-particle weak values: closed forms and lattice evaluations.

The lattice values are complex conditional probabilities of grid projectors
divided by ``dx`` so they can be compared with the continuum densities.

A bare grid delta contains momenta up to ``pi/dx``; for the times of
interest these wrap around the ring and add an aliased stationary point of
the same size as the physical one. The lattice routines therefore
band-limit the position conditions with a smooth momentum window
(``band_limit_window``) that removes every velocity able to reach a
periodic image. The window commutes with the free evolution, so the
weak values stay exactly normalized.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfc

from ..errors import ConfigError, WrapAroundGuard
from ..hilbert import HilbertSpec


def _require_positive_time(t, name="t"):
    if not np.isfinite(t) or t <= 0:
        raise ConfigError(f"{name} must be > 0, got {t}")


def free_ccp_analytic(x_t, x_0, p_0, t, space: HilbertSpec):
    """``sqrt(-i m/(2 pi hbar t)) exp(i m/(2 hbar t) (x_t - x_0 - p_0 t/m)^2)``; broadcasts."""
    _require_positive_time(t)
    m, hbar = space.mass, space.hbar
    offset = np.asarray(x_t, dtype=float) - x_0 - p_0 * t / m
    value = np.sqrt(-1j * m / (2 * np.pi * hbar * t)) * np.exp(1j * m / (2 * hbar * t) * offset**2)
    return complex(value) if np.ndim(value) == 0 else value


def midpoint_ccp_analytic(x_m, x_i, x_f, T, space: HilbertSpec):
    """``sqrt(-i m/(pi hbar T)) exp(i m/(hbar T) (x_m - (x_i + x_f)/2)^2)``; broadcasts."""
    _require_positive_time(T, "T")
    m, hbar = space.mass, space.hbar
    offset = np.asarray(x_m, dtype=float) - 0.5 * (x_i + x_f)
    value = np.sqrt(-1j * m / (np.pi * hbar * T)) * np.exp(1j * m / (hbar * T) * offset**2)
    return complex(value) if np.ndim(value) == 0 else value


def band_limit_window(space: HilbertSpec, t_max: float) -> np.ndarray:
    """Smooth momentum window for lattice propagation up to ``t_max``.

    Cutoff at the momentum whose displacement in ``t_max`` is half the ring,
    ``m L / (2 t_max)``, with an erfc edge of width ``sqrt(m hbar / t_max)``
    (the width that best localizes the edge after free spreading).
    """
    _require_positive_time(t_max, "t_max")
    cutoff = space.mass * space.L / (2 * t_max)
    width = np.sqrt(space.mass * space.hbar / t_max)
    return 0.5 * erfc((np.abs(space.momenta) - cutoff) / (np.sqrt(2) * width))


def free_kernel(space: HilbertSpec, t: float, window: np.ndarray | None = None) -> np.ndarray:
    """``K[n] = <x_{j+n}| U(t) W |x_j>`` for the free Hamiltonian on the ring.

    ``window`` is the diagonal of ``W`` in the momentum basis (``None`` means
    identity). Translation invariance makes the kernel depend on ``n`` only.
    """
    p = space.momenta
    spectrum = np.exp(-1j * p**2 * t / (2 * space.mass * space.hbar))
    if window is not None:
        spectrum = spectrum * window
    return np.fft.ifft(spectrum)


def _plane_wave(space: HilbertSpec, j, k) -> np.ndarray:
    """``<x_j|p_k>``."""
    return np.exp(2j * np.pi * np.asarray(j) * space.signed_indices[k] / space.D) / np.sqrt(space.D)


def _check_index(space, j, name):
    j = np.asarray(j)
    if np.any((j < 0) | (j >= space.D)) or not np.issubdtype(j.dtype, np.integer):
        raise ConfigError(f"{name} must be integer grid indices in [0, {space.D})")
    return j


def free_ccp_numeric(j_t, j_0: int, k_0: int, t: float, space: HilbertSpec, band_limit: bool = True):
    """Lattice ``P(x_t|x_0,p_0)/dx`` from ``<p0|U^dag|x_t><x_t|U|x_0>/<p0|x_0>``.

    ``j_t`` may be an array of grid indices. With ``band_limit`` the initial
    position condition is ``W|x_0>`` (see module notes).
    """
    _require_positive_time(t)
    j_t = _check_index(space, j_t, "j_t")
    j_0 = int(_check_index(space, j_0, "j_0"))
    if not 0 <= k_0 < space.D:
        raise ConfigError(f"k_0 must be a momentum index in [0, {space.D})")
    p_0 = space.momenta[k_0]
    if abs(p_0 * t / space.mass) >= space.L / 4:
        raise WrapAroundGuard(
            f"classical displacement |p0 t/m| = {abs(p_0 * t / space.mass):g} must stay below L/4 = {space.L / 4:g}"
        )
    if np.any(np.abs(j_t - j_0) >= space.D // 2):
        raise WrapAroundGuard("probe and initial position straddle the ring seam (|x_t - x_0| >= L/2)")

    window = band_limit_window(space, t) if band_limit else None
    K = free_kernel(space, t, window)
    w0 = 1.0 if window is None else window[k_0]
    hbar, m = space.hbar, space.mass
    bra_p0_xt = np.exp(1j * p_0**2 * t / (2 * m * hbar)) * _plane_wave(space, j_t, k_0).conj()
    bra_p0_x0 = w0 * _plane_wave(space, j_0, k_0).conj()
    value = bra_p0_xt * K[(j_t - j_0) % space.D] / bra_p0_x0 / space.dx
    return complex(value) if np.ndim(value) == 0 else value


def midpoint_ccp_numeric(j_m, j_i: int, j_f: int, T: float, space: HilbertSpec, band_limit: bool = True):
    """Lattice ``P(x_m|x_i,x_f)/dx`` from ``<x_f|U(T)|x_m><x_m|U(T)|x_i>/<x_f|U(2T)|x_i>``.

    With ``band_limit`` both end conditions are replaced by ``W|x_i>`` and
    ``W|x_f>``, the window sized for the full time ``2T``.
    """
    _require_positive_time(T, "T")
    j_m = _check_index(space, j_m, "j_m")
    j_i = int(_check_index(space, j_i, "j_i"))
    j_f = int(_check_index(space, j_f, "j_f"))
    if abs(j_f - j_i) * space.dx >= space.L / 4:
        raise WrapAroundGuard(
            f"classical displacement |x_f - x_i| = {abs(j_f - j_i) * space.dx:g} must stay below L/4"
        )
    if np.any(np.abs(j_m - j_i) >= space.D // 2) or np.any(np.abs(j_f - j_m) >= space.D // 2):
        raise WrapAroundGuard("intermediate position straddles the ring seam")

    window = band_limit_window(space, 2 * T) if band_limit else None
    K1 = free_kernel(space, T, window)
    K2 = free_kernel(space, 2 * T, None if window is None else window**2)
    D = space.D
    value = K1[(j_f - j_m) % D] * K1[(j_m - j_i) % D] / K2[(j_f - j_i) % D] / space.dx
    return complex(value) if np.ndim(value) == 0 else value


def midpoint_completeness(j_i: int, j_f: int, T: float, space: HilbertSpec, band_limit: bool = True) -> complex:
    """``sum_m P(x_m|x_i,x_f)`` over every grid point of the ring.

    The seam guard of ``midpoint_ccp_numeric`` does not apply here: the sum
    runs over a complete set of intermediate positions, so it equals one
    for any pair of end points with a non-vanishing overlap.
    """
    _require_positive_time(T, "T")
    j_i = int(_check_index(space, j_i, "j_i"))
    j_f = int(_check_index(space, j_f, "j_f"))
    window = band_limit_window(space, 2 * T) if band_limit else None
    K1 = free_kernel(space, T, window)
    K2 = free_kernel(space, 2 * T, None if window is None else window**2)
    D = space.D
    j_m = np.arange(D)
    return complex(np.sum(K1[(j_f - j_m) % D] * K1[(j_m - j_i) % D]) / K2[(j_f - j_i) % D])
