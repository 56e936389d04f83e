"""Classical microcanonical (ergodic) density of a closed 1-D orbit.

For energy ``E`` the time-averaged phase-space density is
``delta(E - H(x,p)) / T``. Its position marginal is ``2 / (T |v(x)|)``
between the turning points, with ``v = sqrt(2 (E - V)/m)`` and
``T = 2 * integral dx / v``. Integrals are done in the angle variable
``x = c + h sin(theta)``, which removes the inverse square-root
singularities at the turning points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from ..ccp import ErgodicityReport, ergodicity_residuals
from ..errors import ForbiddenRegion, OpenOrbit
from ..hilbert import HilbertSpec, make_momentum_basis, make_position_basis


def _V(potential, x) -> float:
    return float(np.asarray(potential(np.asarray(x, dtype=float))))


def find_turning_points(potential, E: float, space: HilbertSpec) -> tuple[float, float]:
    """Turning points of the well holding the grid minimum of ``potential``.

    The grid is scanned outward from its lowest point until ``V > E``; each
    crossing is then refined by bisection.
    """
    xs = np.append(space.positions, space.L / 2)
    Vs = np.asarray(potential(xs), dtype=float)
    j0 = int(np.argmin(Vs))
    if not Vs[j0] < E:
        raise ForbiddenRegion(f"E = {E} does not exceed min V = {Vs[j0]} on the grid")

    def crossing(step):
        j = j0
        while 0 <= j + step < len(xs):
            if Vs[j + step] > E:
                a, b = sorted((xs[j], xs[j + step]))
                return bisect(lambda x: _V(potential, x) - E, a, b, xtol=1e-15 * max(1.0, abs(a)), maxiter=400)
            j += step
        raise OpenOrbit(f"orbit at E = {E} is not closed inside the box of length {space.L}")

    return crossing(-1), crossing(+1)


def _speed(potential, E, x, mass):
    kinetic = E - potential(x)
    return np.sqrt(2 * np.maximum(kinetic, 0.0) / mass)


def _angle_integrand(potential, E, mass, center, half_width):
    # Measuring kinetic energy from V at the bisected turning point on each
    # side keeps the integrand's endpoint behaviour exact even though the
    # turning points only satisfy V = E to a few ulps.
    E_lo, E_hi = _V(potential, center - half_width), _V(potential, center + half_width)

    def g(theta):
        x = center + half_width * np.sin(theta)
        v = _speed(potential, np.where(theta < 0, E_lo, E_hi), x, mass)
        safe = np.where(v > 0, v, 1.0)
        return np.where(v > 0, half_width * np.cos(theta) / safe, 0.0)

    return g


def _theta(x, center, half_width):
    return np.arcsin(np.clip((x - center) / half_width, -1.0, 1.0))


_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(96)


def _time_between(g, theta_a, theta_b, panels: int = 1) -> float:
    """Composite Gauss-Legendre over ``[theta_a, theta_b]``.

    The angle-space integrand is smooth up to the turning points, where
    adaptive schemes only see floating-point noise in ``E - V``.
    """
    if theta_b <= theta_a:
        return 0.0
    edges = np.linspace(theta_a, theta_b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    theta = mid[:, None] + half[:, None] * _NODES[None, :]
    return float(np.sum(half[:, None] * _WEIGHTS[None, :] * g(theta)))


@dataclass(frozen=True, eq=False)
class ClassicalDensity:
    """Classical ergodic density at energy ``E`` on a spatial grid.

    ``position_marginal[j]`` is the time fraction spent in grid cell ``j``
    divided by ``dx`` (an exact cell average), so the turning-point
    singularities stay finite and ``sum(position_marginal) * dx == 1``.
    """

    energy: float
    positions: np.ndarray
    position_marginal: np.ndarray
    period: float
    turning_points: tuple[float, float]
    mass: float
    potential: object

    @property
    def cell_mass(self) -> np.ndarray:
        dx = self.positions[1] - self.positions[0]
        return self.position_marginal * dx

    def pointwise(self, x):
        """``2 / (T |v(x)|)``; zero outside the orbit, infinite at the turning points."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.turning_points
        inside = (x > lo) & (x < hi)
        kinetic = self.energy - np.asarray(self.potential(x), dtype=float)
        v = np.sqrt(2 * np.where(inside, np.maximum(kinetic, 0.0), 1.0) / self.mass)
        out = np.where(inside, 2 / (self.period * v), 0.0)
        out = np.where((x == lo) | (x == hi), np.inf, out)
        return float(out) if out.ndim == 0 else out


def orbit_period(potential, E: float, turning_points, mass: float = 1.0) -> float:
    lo, hi = turning_points
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    g = _angle_integrand(potential, E, mass, center, half)
    return 2 * _time_between(g, -np.pi / 2, np.pi / 2, panels=16)


def classical_density(potential, E: float, space: HilbertSpec) -> ClassicalDensity:
    lo, hi = find_turning_points(potential, E, space)
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    g = _angle_integrand(potential, E, space.mass, center, half)
    period = 2 * _time_between(g, -np.pi / 2, np.pi / 2, panels=16)

    xs, dx = space.positions, space.dx
    mass = np.zeros(space.D)
    for j in np.flatnonzero((xs + dx / 2 > lo) & (xs - dx / 2 < hi)):
        a, b = max(xs[j] - dx / 2, lo), min(xs[j] + dx / 2, hi)
        # Each crossing of the cell is traversed twice per period.
        mass[j] = 2 * _time_between(g, _theta(a, center, half), _theta(b, center, half)) / period
    return ClassicalDensity(
        energy=float(E),
        positions=xs,
        position_marginal=mass / dx,
        period=period,
        turning_points=(lo, hi),
        mass=space.mass,
        potential=potential,
    )


def classical_momentum_branch(potential, E: float, x: float, sign: int, mass: float = 1.0, tol: float = 1e-12) -> float:
    """``f_p(x, E) = sign * sqrt(2 m (E - V(x)))``, the momentum with ``H(x, f_p) = E``.

    Kinetic energies down to ``-tol * max(1, |E|)`` count as a turning point.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    kinetic = E - _V(potential, x)
    if kinetic < -tol * max(1.0, abs(E)):
        raise ForbiddenRegion(f"x = {x} lies outside the classically allowed region at E = {E}")
    return sign * float(np.sqrt(2 * mass * max(kinetic, 0.0)))


def classical_phase_space_density(potential, E: float, space: HilbertSpec) -> tuple[np.ndarray, ClassicalDensity]:
    """``delta(E - H)/T`` binned on the (x, p) lattice.

    Each position cell's time fraction is split evenly between the momentum
    bins nearest to ``+f_p`` and ``-f_p`` evaluated at the cell centre
    (clipped into the orbit).
    """
    density = classical_density(potential, E, space)
    lo, hi = density.turning_points
    joint = np.zeros((space.D, space.D))
    momenta = space.momenta
    for j in np.flatnonzero(density.cell_mass > 0):
        x = min(max(space.positions[j], lo), hi)
        f = classical_momentum_branch(potential, E, x, +1, space.mass, tol=1e-9)
        for target in (f, -f):
            joint[j, int(np.argmin(np.abs(momenta - target)))] += 0.5 * density.cell_mass[j]
    return joint, density


def classical_ergodicity_check(potential, E: float, space: HilbertSpec) -> ErgodicityReport:
    """Ergodicity law evaluated with classical conditionals in place of ``|P(x|E,p)|^2``.

    The classical conditional ``rho_cl(x,p)/P_cl(p|E)`` is real, so its
    square is injected as the would-be ``|P(x|E,p)|^2``. ``P(p|x)`` comes
    from the lattice bases. Momentum bins the orbit never visits are
    excluded.
    """
    joint, _ = classical_phase_space_density(potential, E, space)
    P_pE = joint.sum(axis=0)
    P_xE = joint.sum(axis=1)
    excluded = P_pE <= 0
    cond = np.divide(joint, P_pE[None, :], out=np.zeros_like(joint), where=~excluded[None, :])
    x_p = make_position_basis(space).matrix.conj().T @ make_momentum_basis(space).matrix
    return ergodicity_residuals(cond**2, P_pE, np.abs(x_p) ** 2, P_xE, excluded)
