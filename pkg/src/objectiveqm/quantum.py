"""Dense finite-dimensional Hilbert-space calculator.

Supplies the quantum probabilities that a micro-model must reproduce
conditionally on detection. Observables are given by spectral data
(eigenvalue, projector) so no eigensolver is needed.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, InvalidInput

ATOL = 1e-12

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _as_matrix(m, name="matrix") -> np.ndarray:
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise InvalidInput(f"{name} must be a nonempty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DensityState:
    """Trace-one Hermitian positive matrix.

    Positivity is a constructive guarantee of :func:`make_pure` and
    :func:`mix`; a directly supplied matrix is additionally checked with an
    eigenvalue bound.
    """

    rho: np.ndarray

    def __post_init__(self):
        rho = _as_matrix(self.rho, "rho")
        object.__setattr__(self, "rho", rho)
        if np.max(np.abs(rho - rho.conj().T)) > ATOL:
            raise InvalidInput("rho is not Hermitian")
        if abs(np.trace(rho) - 1.0) > ATOL:
            raise InvalidInput(f"trace of rho is {np.trace(rho).real!r}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise InvalidInput("rho is not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DensityState):
            return NotImplemented
        return self.rho.shape == other.rho.shape and np.array_equal(self.rho, other.rho)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SpectralObservable:
    """Observable with finite spectrum, stored as ``(eigenvalue, projector)`` branches."""

    label: str
    eigenvalues: tuple
    projectors: tuple = field(repr=False)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.eigenvalues)
        projs = tuple(_as_matrix(p, "projector") for p in self.projectors)
        if not vals or len(vals) != len(projs):
            raise InvalidInput("need one projector per eigenvalue and at least one branch")
        if len(set(vals)) != len(vals):
            raise InvalidInput(f"eigenvalues of {self.label!r} are not pairwise distinct")
        if not all(np.isfinite(vals)):
            raise InvalidInput("eigenvalues must be finite")
        dim = projs[0].shape[0]
        if any(p.shape != (dim, dim) for p in projs):
            raise InvalidInput("projectors have mismatched dimensions")
        for k, p in enumerate(projs):
            if np.max(np.abs(p - p.conj().T)) > ATOL:
                raise InvalidInput(f"projector {k} of {self.label!r} is not Hermitian")
            if np.max(np.abs(p @ p - p)) > ATOL:
                raise InvalidInput(f"projector {k} of {self.label!r} is not idempotent")
            for j in range(k):
                if np.max(np.abs(p @ projs[j])) > ATOL:
                    raise InvalidInput(f"projectors {j} and {k} of {self.label!r} are not orthogonal")
        if np.max(np.abs(sum(projs) - np.eye(dim))) > ATOL:
            raise InvalidInput(f"projectors of {self.label!r} do not sum to the identity")
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "projectors", projs)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def spectrum(self) -> frozenset:
        return frozenset(self.eigenvalues)

    def projector(self, value) -> np.ndarray:
        return self.projectors[self.eigenvalues.index(float(value))]

    def is_dichotomic(self) -> bool:
        return self.spectrum == frozenset({1.0, -1.0})

    def __eq__(self, other):
        if not isinstance(other, SpectralObservable):
            return NotImplemented
        return (
            self.label == other.label
            and self.eigenvalues == other.eigenvalues
            and all(np.array_equal(a, b) for a, b in zip(self.projectors, other.projectors))
        )

    __hash__ = None


@dataclass(frozen=True)
class OutcomeSet:
    """Finite outcome set Δ, plus a flag saying whether it also holds a₀.

    A Borel set is physically equivalent to the subset of the extended
    spectrum it contains, so only that finite subset is stored.
    """

    members: frozenset = frozenset()
    contains_a0: bool = False

    def __post_init__(self):
        members = frozenset(float(m) for m in self.members)
        if not all(np.isfinite(list(members))):
            raise InvalidInput("outcome values must be finite")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "contains_a0", bool(self.contains_a0))

    def __contains__(self, value) -> bool:
        return float(value) in self.members


def make_pure(amplitudes: Sequence[complex]) -> DensityState:
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if psi.size == 0 or not np.all(np.isfinite(psi)):
        raise InvalidInput("amplitudes must be a nonempty finite vector")
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidInput("zero vector is not a state")
    psi = psi / norm
    rho = np.outer(psi, psi.conj())
    # exact Hermiticity; the outer product is only Hermitian to rounding
    rho = (rho + rho.conj().T) / 2
    return DensityState(rho / np.trace(rho).real)


def mix(components: Iterable[tuple[float, DensityState]]) -> DensityState:
    components = list(components)
    if not components:
        raise InvalidInput("empty mixture")
    weights = np.array([float(w) for w, _ in components])
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InvalidInput("mixture weights must be finite and nonnegative")
    if abs(weights.sum() - 1.0) > ATOL:
        raise InvalidInput(f"mixture weights sum to {weights.sum()!r}, expected 1")
    dims = {state.dim for _, state in components}
    if len(dims) != 1:
        raise InvalidInput(f"mixture components have different dimensions {sorted(dims)}")
    rho = sum(w * state.rho for w, (_, state) in zip(weights, components))
    return DensityState(rho)


def singlet_state() -> DensityState:
    return make_pure(np.array([0, 1, -1, 0]) / np.sqrt(2))


def spin_observable(direction: Sequence[float], label: str = "spin") -> SpectralObservable:
    """Qubit observable n·σ with projectors (I ± n·σ)/2."""
    n = np.asarray(direction, dtype=float).reshape(-1)
    if n.shape != (3,) or not np.all(np.isfinite(n)):
        raise InvalidInput("direction must be a finite 3-vector")
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise InvalidInput(f"direction {n.tolist()} is not a unit vector")
    n = n / np.linalg.norm(n)
    n_sigma = sum(c * s for c, s in zip(n, PAULI))
    eye = np.eye(2, dtype=complex)
    return SpectralObservable(label, (1.0, -1.0), ((eye + n_sigma) / 2, (eye - n_sigma) / 2))


def plane_direction(angle: float) -> np.ndarray:
    """Unit vector at ``angle`` from z in the x-z plane."""
    return np.array([np.sin(angle), 0.0, np.cos(angle)])


def tensor_product_observable(
    a: SpectralObservable,
    b: SpectralObservable,
    value_combiner: Callable[[float, float], float] = operator.mul,
    label: str | None = None,
) -> SpectralObservable:
    """Observable on the tensor product whose value is ``value_combiner(a, b)``.

    Branches with equal combined value are merged by summing their projectors.
    """
    merged: dict[float, np.ndarray] = {}
    for va, pa in zip(a.eigenvalues, a.projectors):
        for vb, pb in zip(b.eigenvalues, b.projectors):
            value = float(value_combiner(va, vb))
            proj = np.kron(pa, pb)
            merged[value] = merged[value] + proj if value in merged else proj
    if label is None:
        label = f"{a.label}*{b.label}"
    return SpectralObservable(label, tuple(merged), tuple(merged.values()))


def born_probability(rho: DensityState, obs: SpectralObservable, delta: OutcomeSet) -> float:
    """Tr(ρ Π_Δ), the quantum probability of the macroscopic property (obs, Δ)."""
    if delta.contains_a0:
        raise DomainError("a property containing the no-registration outcome has no quantum counterpart")
    if rho.dim != obs.dim:
        raise InvalidInput(f"state has dimension {rho.dim}, observable {obs.label!r} has {obs.dim}")
    unknown = delta.members - obs.spectrum
    if unknown:
        raise InvalidInput(f"outcomes {sorted(unknown)} are not in the spectrum of {obs.label!r}")
    total = 0.0
    for value, proj in zip(obs.eigenvalues, obs.projectors):
        if value in delta.members:
            total += np.trace(rho.rho @ proj).real
    return float(min(max(total, 0.0), 1.0))


def correlation(rho: DensityState, a: SpectralObservable, b: SpectralObservable) -> float:
    """Expectation of the product of two dichotomic observables on the two factors."""
    if not (a.is_dichotomic() and b.is_dichotomic()):
        raise DomainError("correlation needs ±1-valued observables")
    joint = tensor_product_observable(a, b, operator.mul)
    plus = born_probability(rho, joint, OutcomeSet({1.0}))
    minus = born_probability(rho, joint, OutcomeSet({-1.0}))
    return plus - minus


def random_density_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityState:
    """Mixture of ``rank`` Haar-ish random pure states with Dirichlet weights."""
    rank = dim if rank is None else rank
    weights = rng.dirichlet(np.ones(rank))
    weights /= weights.sum()
    pures = [make_pure(rng.normal(size=dim) + 1j * rng.normal(size=dim)) for _ in range(rank)]
    rho = sum(w * p.rho for w, p in zip(weights, pures))
    rho = (rho + rho.conj().T) / 2
    return DensityState(rho / np.trace(rho).real)


def random_observable(
    dim: int, rng: np.random.Generator, n_values: int | None = None, label: str = "obs"
) -> SpectralObservable:
    """Random orthonormal eigenbasis grouped into ``n_values`` distinct eigenvalues."""
    n_values = dim if n_values is None else n_values
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    groups = np.sort(rng.permutation(np.arange(dim) % n_values))
    values = np.sort(rng.choice(np.arange(-9, 10), size=n_values, replace=False)).astype(float)
    projectors = []
    for g in range(n_values):
        vecs = q[:, groups == g]
        p = vecs @ vecs.conj().T
        projectors.append((p + p.conj().T) / 2)
    return SpectralObservable(label, tuple(values), tuple(projectors))
