"""Bundled desk-scale instances: the singlet, optimal CHSH settings and the Peres-Mermin square."""

from __future__ import annotations

import numpy as np

from .quantum import (
    DensityState,
    SpectralObservable,
    correlation,
    plane_direction,
    singlet_state,
    spin_observable,
)

CHSH_SETTINGS = ("A1", "A2", "B1", "B2")

# x-z plane angles; with S = E11 + E12 + E21 - E22 these reach |S| = 2*sqrt(2) on the singlet
CHSH_OPTIMAL_ANGLES = {
    "A1": 0.0,
    "A2": np.pi / 2,
    "B1": np.pi / 4,
    "B2": -np.pi / 4,
}

PRESETS = ("singlet", "chsh-optimal", "peres-mermin")


def chsh_optimal_observables() -> dict[str, SpectralObservable]:
    return {label: spin_observable(plane_direction(angle), label) for label, angle in CHSH_OPTIMAL_ANGLES.items()}


def quantum_chsh_correlations(rho: DensityState | None = None) -> np.ndarray:
    """2x2 table E[x, y] of quantum correlations for the optimal settings."""
    rho = singlet_state() if rho is None else rho
    obs = chsh_optimal_observables()
    table = np.empty((2, 2))
    for x, a in enumerate(("A1", "A2")):
        for y, b in enumerate(("B1", "B2")):
            table[x, y] = correlation(rho, obs[a], obs[b])
    return table


def chsh_value(table) -> float:
    e = np.asarray(table, dtype=float)
    return float(abs(e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1]))
