"""Exact spectral time evolution ``U(t) = exp(-iHt/hbar)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NotHermitian
from ..hilbert import OperatorMatrix, StateVector, _check_space


@dataclass(frozen=True, eq=False)
class EvolutionSpec:
    hamiltonian: OperatorMatrix
    t: float
    method: str = "exact_spectral"

    def __post_init__(self):
        if not self.hamiltonian.hermitian:
            raise NotHermitian("evolution needs a Hamiltonian flagged hermitian")
        if not np.isfinite(self.t):
            raise ConfigError(f"time must be finite, got {self.t}")
        if self.method != "exact_spectral":
            raise ConfigError(f"unknown evolution method {self.method!r}")
        object.__setattr__(self, "t", float(self.t))


def _phases(spec: EvolutionSpec) -> tuple[np.ndarray, np.ndarray]:
    energies, basis = spec.hamiltonian.spectrum
    hbar = spec.hamiltonian.space.hbar
    return basis.matrix, np.exp(-1j * energies * spec.t / hbar)


def evolution_operator(spec: EvolutionSpec) -> np.ndarray:
    V, phases = _phases(spec)
    return (V * phases) @ V.conj().T


def evolve(psi: StateVector, spec: EvolutionSpec) -> StateVector:
    _check_space(psi.space, spec.hamiltonian.space)
    V, phases = _phases(spec)
    out = V @ (phases * (V.conj().T @ psi.amplitudes))
    return StateVector(out, psi.space, f"{psi.label}(t={spec.t:g})")
