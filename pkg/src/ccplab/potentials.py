"""Named 1-D potentials usable as vectorized callables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Harmonic:
    omega: float = 1.0
    mass: float = 1.0

    def __call__(self, x):
        return 0.5 * self.mass * self.omega**2 * np.asarray(x, dtype=float) ** 2


@dataclass(frozen=True)
class Quartic:
    """``V = strength * x**4 / 4``."""

    strength: float = 1.0

    def __call__(self, x):
        return 0.25 * self.strength * np.asarray(x, dtype=float) ** 4


@dataclass(frozen=True)
class Free:
    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


def by_name(name: str, **params):
    table = {"harmonic": Harmonic, "quartic": Quartic, "free": Free}
    try:
        cls = table[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(table)}") from None
    return cls(**params)
