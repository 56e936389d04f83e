"""Finite-dimensional Hilbert space primitives on a periodic 1-D grid.

Positions are ``x_j = -L/2 + j*dx`` with ``dx = L/D``. Momentum states are
the columns of the unitary DFT, ``<x_j|p_k> = exp(2j*pi*j*k~/D)/sqrt(D)``,
where ``k~`` is the signed frequency index in ``(-D/2, D/2]`` and the
momentum label is ``k~ * dp`` with ``dp = 2*pi*hbar/L``. Basis vectors are
stored as matrix columns in the position representation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionMismatch, NonFiniteValue, NotHermitian, ZeroVector

ORTHONORMALITY_TOL = 1e-10
HERMITICITY_TOL = 1e-10

Potential = Union[Callable[[np.ndarray], np.ndarray], Sequence[float], np.ndarray]


@dataclass(frozen=True)
class HilbertSpec:
    """Dimension and physical scales of a grid-backed Hilbert space.

    ``L`` defaults to ``D`` (unit grid spacing), which is convenient for
    abstract qubit/qutrit work where the grid carries no meaning.
    """

    D: int
    L: float | None = None
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if isinstance(self.D, bool) or not isinstance(self.D, (int, np.integer)):
            raise ConfigError(f"D must be an integer, got {self.D!r}")
        if self.D < 2:
            raise ConfigError(f"D >= 2 required, got D={self.D}")
        object.__setattr__(self, "D", int(self.D))
        L = float(self.D) if self.L is None else float(self.L)
        object.__setattr__(self, "L", L)
        for name in ("L", "hbar", "mass"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be finite and > 0, got {value}")
            object.__setattr__(self, name, value)

    @property
    def dx(self) -> float:
        return self.L / self.D

    @property
    def dp(self) -> float:
        return 2 * np.pi * self.hbar / self.L

    @property
    def positions(self) -> np.ndarray:
        return -self.L / 2 + np.arange(self.D) * self.dx

    @property
    def signed_indices(self) -> np.ndarray:
        k = np.arange(self.D)
        return np.where(k <= self.D // 2, k, k - self.D)

    @property
    def momenta(self) -> np.ndarray:
        return self.signed_indices * self.dp

    def momentum_index(self, signed_index: int) -> int:
        """Basis index of the momentum state with signed frequency ``signed_index``."""
        if not -self.D / 2 < signed_index <= self.D / 2:
            raise ConfigError(f"signed momentum index {signed_index} outside (-D/2, D/2]")
        return int(signed_index) % self.D

    def position_index(self, x: float) -> int:
        """Index of the grid point nearest to ``x`` (periodic)."""
        return int(np.rint((x + self.L / 2) / self.dx)) % self.D


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit ket. Amplitudes are normalized on construction."""

    amplitudes: np.ndarray
    space: HilbertSpec
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.shape[0] != self.space.D:
            raise DimensionMismatch(
                f"state of shape {a.shape} does not fit a space of dimension {self.space.D}"
            )
        if not np.all(np.isfinite(a)):
            raise NonFiniteValue("state amplitudes must be finite")
        norm = np.linalg.norm(a)
        if norm == 0.0:
            raise ZeroVector("cannot normalize the zero vector")
        object.__setattr__(self, "amplitudes", _frozen(a / norm))

    @property
    def D(self) -> int:
        return self.space.D

    def __len__(self):
        return self.space.D


class BasisKind(str, enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"
    ENERGY = "energy"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Orthonormal basis; column ``k`` of ``matrix`` is the k-th vector."""

    matrix: np.ndarray
    labels: np.ndarray
    kind: BasisKind
    space: HilbertSpec
    names: tuple = field(default=())

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        D = self.space.D
        if M.shape != (D, D):
            raise DimensionMismatch(f"basis matrix must be {D}x{D}, got {M.shape}")
        labels = np.asarray(self.labels, dtype=float)
        if labels.shape != (D,):
            raise DimensionMismatch(f"expected {D} labels, got shape {labels.shape}")
        residual = orthonormality_residual(M)
        if residual >= ORTHONORMALITY_TOL:
            raise ConfigError(f"basis is not orthonormal (residual {residual:.3e})")
        object.__setattr__(self, "matrix", _frozen(M))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "kind", BasisKind(self.kind))

    def __len__(self):
        return self.space.D

    def __getitem__(self, k: int) -> StateVector:
        name = self.names[k] if self.names else f"{self.kind.value}[{k}]"
        return StateVector(self.matrix[:, k], self.space, name)

    def __iter__(self) -> Iterator[StateVector]:
        return (self[k] for k in range(len(self)))

    @property
    def vectors(self) -> tuple[StateVector, ...]:
        return tuple(self)

    def amplitudes_of(self, state: StateVector) -> np.ndarray:
        """Coefficients ``<k|state>`` for every basis member."""
        _check_space(self.space, state.space)
        return self.matrix.conj().T @ state.amplitudes


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    space: HilbertSpec
    hermitian: bool = False

    def __post_init__(self):
        H = np.asarray(self.entries, dtype=complex)
        D = self.space.D
        if H.shape != (D, D):
            raise DimensionMismatch(f"operator must be {D}x{D}, got {H.shape}")
        if not np.all(np.isfinite(H)):
            raise NonFiniteValue("operator entries must be finite")
        if self.hermitian:
            residual = hermiticity_residual(H)
            if residual >= HERMITICITY_TOL:
                raise NotHermitian(f"hermitian flag set but max|H - H^dag| = {residual:.3e}")
        object.__setattr__(self, "entries", _frozen(H))

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, BasisSet]:
        # Read-only once computed; shared by every evolution with this operator.
        return eigensystem(self)


def _check_space(a: HilbertSpec, b: HilbertSpec) -> None:
    if a != b:
        raise DimensionMismatch(f"operands live in different spaces: {a} vs {b}")


def orthonormality_residual(matrix: np.ndarray) -> float:
    M = np.asarray(matrix)
    return float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[1]))))


def hermiticity_residual(matrix: np.ndarray) -> float:
    M = np.asarray(matrix)
    return float(np.max(np.abs(M - M.conj().T)))


def inner(u: StateVector, v: StateVector) -> complex:
    """``<u|v>``, conjugate-linear in the first argument."""
    _check_space(u.space, v.space)
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def make_position_basis(space: HilbertSpec) -> BasisSet:
    return BasisSet(np.eye(space.D, dtype=complex), space.positions, BasisKind.POSITION, space)


def dft_matrix(space: HilbertSpec) -> np.ndarray:
    """``U[j, k] = <x_j|p_k>``."""
    j = np.arange(space.D)
    return np.exp(2j * np.pi * np.outer(j, space.signed_indices) / space.D) / np.sqrt(space.D)


def make_momentum_basis(space: HilbertSpec) -> BasisSet:
    return BasisSet(dft_matrix(space), space.momenta, BasisKind.MOMENTUM, space)


def _potential_values(space: HilbertSpec, potential: Potential) -> np.ndarray:
    x = space.positions
    if callable(potential):
        values = np.broadcast_to(np.asarray(potential(x), dtype=float), x.shape)
    else:
        values = np.asarray(potential, dtype=float)
        if values.shape != x.shape:
            raise DimensionMismatch(f"potential needs {space.D} grid values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        bad = space.positions[~np.isfinite(values)][0]
        raise NonFiniteValue(f"potential is not finite at x = {bad}")
    return np.array(values)


def kinetic_matrix(space: HilbertSpec) -> np.ndarray:
    """Spectral p^2/2m in the position representation.

    Equal to ``F diag(p_k^2/2m) F^dag``; the product is circulant, so only
    its first column is computed.
    """
    column = np.fft.ifft(space.momenta**2 / (2 * space.mass))
    return scipy.linalg.circulant(column)


def discretize_hamiltonian(space: HilbertSpec, potential: Potential) -> OperatorMatrix:
    """``H = p^2/2m + V(x)`` on the grid, kinetic part exact in the momentum basis.

    ``potential`` is a vectorized callable of position or an array of grid values.
    """
    V = _potential_values(space, potential)
    H = kinetic_matrix(space) + np.diag(V)
    H = 0.5 * (H + H.conj().T)
    return OperatorMatrix(H, space, hermitian=True)


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    mags = np.abs(vec)
    pivot = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
    return vec * (abs(vec[pivot]) / vec[pivot])


def _lexicographic_key(vec: np.ndarray) -> tuple:
    rounded = np.round(np.column_stack([vec.real, vec.imag]), 10).ravel()
    # Descending: the state with the larger leading component comes first.
    return tuple(-rounded)


def eigensystem(H: OperatorMatrix, degeneracy_tol: float = 1e-10) -> tuple[np.ndarray, BasisSet]:
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors.

    Each eigenvector is rotated so that its largest-magnitude component
    (lowest index on ties) is real and positive. Inside a degenerate
    cluster the vectors are ordered lexicographically by amplitude.
    """
    if not H.hermitian:
        residual = hermiticity_residual(H.entries)
        if residual >= HERMITICITY_TOL:
            raise NotHermitian(f"eigensystem needs a Hermitian matrix (residual {residual:.3e})")
    energies, vecs = np.linalg.eigh(H.entries)
    vecs = np.column_stack([_fix_phase(vecs[:, n]) for n in range(vecs.shape[1])])

    scale = max(1.0, float(np.max(np.abs(energies))))
    start = 0
    for stop in range(1, len(energies) + 1):
        if stop == len(energies) or energies[stop] - energies[stop - 1] > degeneracy_tol * scale:
            if stop - start > 1:
                block = vecs[:, start:stop]
                order = sorted(range(stop - start), key=lambda i: _lexicographic_key(block[:, i]))
                vecs[:, start:stop] = block[:, order]
            start = stop

    basis = BasisSet(
        vecs,
        energies,
        BasisKind.ENERGY,
        H.space,
        names=tuple(f"E[{n}]" for n in range(len(energies))),
    )
    return _frozen(energies), basis


def random_state(space: HilbertSpec, rng: np.random.Generator, label: str = "random") -> StateVector:
    """Haar-random unit vector."""
    z = rng.standard_normal(space.D) + 1j * rng.standard_normal(space.D)
    return StateVector(z, space, label)


def random_hermitian(space: HilbertSpec, rng: np.random.Generator) -> OperatorMatrix:
    """GUE-style random Hermitian matrix."""
    A = rng.standard_normal((space.D, space.D)) + 1j * rng.standard_normal((space.D, space.D))
    return OperatorMatrix(0.5 * (A + A.conj().T), space, hermitian=True)


def projector(state: StateVector) -> OperatorMatrix:
    a = state.amplitudes
    return OperatorMatrix(np.outer(a, a.conj()), state.space, hermitian=True)
