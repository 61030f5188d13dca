"""Objective micro-models: micro-classes, objective states and their exact probabilities.

A :class:`MicroModel` is a weighted mixture of :class:`MicroClass` objects.
Each class carries, for every elementary observable, a detection
probability and a single deterministic outcome. Whether an object is
registered at all is the only stochastic element; what it shows when
registered is fixed by its micro-properties.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InvalidInput, NotFound
from .quantum import DensityState, OutcomeSet, SpectralObservable, born_probability

DEFAULT_A0 = 0.0
WEIGHT_TOL = 1e-12
MODES = ("deterministic", "stochastic")

COMBINERS = {
    "product": math.prod,
    "sum": math.fsum,
}


@dataclass(frozen=True)
class ExtendedObservable:
    """Observable with spectrum Λ extended by the no-registration outcome ``a0``.

    Elementary observables have no constituents. A composite observable is
    the joint measurement of its constituents; its value is the combiner
    applied to their values.
    """

    label: str
    spectrum: frozenset
    a0: float = DEFAULT_A0
    constituents: tuple = ()
    combiner: str = "product"
    base: SpectralObservable | None = field(default=None, compare=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "spectrum", frozenset(float(v) for v in self.spectrum))
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "constituents", tuple(self.constituents))
        if self.combiner not in COMBINERS:
            raise InvalidInput(f"unknown combiner {self.combiner!r}")

    @property
    def elementary(self) -> bool:
        return not self.constituents

    @property
    def extended_spectrum(self) -> frozenset:
        return self.spectrum | {self.a0}

    def combine(self, values: Sequence[float]) -> float:
        return float(COMBINERS[self.combiner](values))

    def is_dichotomic(self) -> bool:
        return self.spectrum == frozenset({1.0, -1.0})

    @classmethod
    def from_spectral(cls, obs: SpectralObservable, a0: float | None = None) -> "ExtendedObservable":
        if a0 is None:
            a0 = free_a0(obs.spectrum)
        return cls(obs.label, obs.spectrum, a0=a0, base=obs)


def free_a0(spectrum: Iterable[float]) -> float:
    """Default no-registration value: 0 unless 0 is already an eigenvalue."""
    spectrum = set(spectrum)
    if DEFAULT_A0 not in spectrum:
        return DEFAULT_A0
    return float(min(spectrum) - 1.0)


def composite(
    label: str,
    constituents: Sequence[ExtendedObservable],
    combiner: str = "product",
    a0: float | None = None,
) -> ExtendedObservable:
    """Joint-measurement observable over elementary constituents."""
    if not constituents:
        raise InvalidInput("a composite needs at least one constituent")
    if any(not c.elementary for c in constituents):
        raise InvalidInput("constituents must be elementary observables")
    fn = COMBINERS[combiner]
    spectrum = {float(fn(vals)) for vals in itertools.product(*(sorted(c.spectrum) for c in constituents))}
    if a0 is None:
        a0 = free_a0(spectrum)
    return ExtendedObservable(label, spectrum, a0=a0, constituents=tuple(c.label for c in constituents), combiner=combiner)


@dataclass(frozen=True)
class MacroProperty:
    """Macroscopic property F = (A₀, Δ); Δ may contain a₀."""

    observable: str
    delta: OutcomeSet

    @classmethod
    def of(cls, observable: str, members: Iterable[float], contains_a0: bool = False) -> "MacroProperty":
        return cls(observable, OutcomeSet(frozenset(members), contains_a0))

    @property
    def contains_a0(self) -> bool:
        return self.delta.contains_a0


@dataclass(frozen=True)
class MicroProperty:
    """Microscopic property f, mirrored one-to-one by a macro property with a₀ ∉ Δ."""

    id: str
    macro: MacroProperty

    def __post_init__(self):
        if self.macro.contains_a0:
            raise InvalidInput("micro-properties correspond only to macro properties with a0 outside Δ")


def micro_properties(observable: ExtendedObservable) -> list[MicroProperty]:
    """Every micro-property attached to ``observable``: one per subset Δ of Λ."""
    values = sorted(observable.spectrum)
    props = []
    for r in range(len(values) + 1):
        for subset in itertools.combinations(values, r):
            macro = MacroProperty.of(observable.label, subset)
            props.append(MicroProperty(f"{observable.label}:{{{','.join(map(repr, subset))}}}", macro))
    return props


@dataclass(frozen=True)
class Response:
    detect: float
    value: float

    def __post_init__(self):
        object.__setattr__(self, "detect", float(self.detect))
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class MicroClass:
    """Equivalence class of objects sharing all micro-properties."""

    weight: float
    responses: Mapping[str, Response]

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        responses = {k: v if isinstance(v, Response) else Response(*v) for k, v in dict(self.responses).items()}
        object.__setattr__(self, "responses", MappingProxyType(responses))

    def __eq__(self, other):
        if not isinstance(other, MicroClass):
            return NotImplemented
        return self.weight == other.weight and dict(self.responses) == dict(other.responses)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MicroModel:
    """Objective state S as a weighted family of micro-classes.

    Construction does not validate; call :func:`validate_model` for a report
    or :meth:`check` to raise on the first problem.
    """

    classes: tuple
    observables: Mapping[str, ExtendedObservable]
    target: DensityState | None = None
    mode: str = "stochastic"

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not isinstance(self.observables, Mapping):
            registry = {obs.label: obs for obs in self.observables}
        else:
            registry = dict(self.observables)
        object.__setattr__(self, "observables", MappingProxyType(registry))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.classes])

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def observable(self, label: str) -> ExtendedObservable:
        try:
            return self.observables[label]
        except KeyError:
            raise NotFound(f"observable {label!r} is not registered") from None

    def elementary_labels(self) -> list[str]:
        return [label for label, obs in self.observables.items() if obs.elementary]

    def response(self, i: int, label: str) -> tuple[float, float]:
        """(detection probability, value on detection) of class ``i`` for any registered observable.

        Composite detection is the product of constituent detection probabilities.
        """
        if not 0 <= i < len(self.classes):
            raise NotFound(f"class {i} does not exist")
        obs = self.observable(label)
        responses = self.classes[i].responses
        if obs.elementary:
            if label not in responses:
                raise NotFound(f"class {i} has no response for {label!r}")
            r = responses[label]
            return r.detect, r.value
        detect = 1.0
        values = []
        for part in obs.constituents:
            d, v = self.response(i, part)
            detect *= d
            values.append(v)
        return detect, obs.combine(values)

    def response_arrays(self, label: str) -> tuple[np.ndarray, np.ndarray]:
        pairs = [self.response(i, label) for i in range(self.n_classes)]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def check(self) -> "MicroModel":
        problems = validate_model(self)
        if problems:
            raise InvalidInput("invalid model: " + "; ".join(problems))
        return self

    def __eq__(self, other):
        if not isinstance(other, MicroModel):
            return NotImplemented
        return (
            self.classes == other.classes
            and dict(self.observables) == dict(other.observables)
            and self.target == other.target
            and self.mode == other.mode
        )

    __hash__ = None


@dataclass(frozen=True)
class Breakdown:
    """Overall, detection and detection-conditional probability of a property.

    ``conditional`` is ``None`` when nothing is ever detected.
    """

    total: float
    detect: float
    conditional: float | None


def validate_model(model: MicroModel) -> list[str]:
    problems = []
    if model.mode not in MODES:
        problems.append(f"unknown mode {model.mode!r}")
    if not model.classes:
        problems.append("model has no classes")
    weights = model.weights
    if not np.all(np.isfinite(weights)):
        problems.append("class weights must be finite")
    elif weights.size and abs(weights.sum() - 1.0) > WEIGHT_TOL:
        problems.append(f"class weights sum to {weights.sum()!r}, expected 1")
    for i, w in enumerate(weights):
        if not w > 0:
            problems.append(f"class {i} has non-positive weight {w!r}")

    for label, obs in model.observables.items():
        if label != obs.label:
            problems.append(f"registry key {label!r} does not match observable label {obs.label!r}")
        if not obs.spectrum:
            problems.append(f"observable {label!r} has an empty spectrum")
        if obs.a0 in obs.spectrum:
            problems.append(f"no-registration value {obs.a0!r} of {label!r} lies in its spectrum")
        if obs.base is not None and obs.base.spectrum != obs.spectrum:
            problems.append(f"observable {label!r} spectrum differs from its quantum base")
        for part in obs.constituents:
            if part not in model.observables:
                problems.append(f"composite {label!r} refers to unknown observable {part!r}")
            elif not model.observables[part].elementary:
                problems.append(f"composite {label!r} refers to non-elementary {part!r}")

    elementary = model.elementary_labels()
    for i, cls in enumerate(model.classes):
        missing = [lab for lab in elementary if lab not in cls.responses]
        if missing:
            problems.append(f"class {i} lacks responses for {missing}")
        for label, r in cls.responses.items():
            obs = model.observables.get(label)
            if obs is None:
                problems.append(f"class {i} responds to unregistered observable {label!r}")
                continue
            if not obs.elementary:
                problems.append(f"class {i} stores a response for composite {label!r}")
            if r.value not in obs.spectrum:
                problems.append(f"class {i} value {r.value!r} for {label!r} is outside its spectrum")
            if not 0.0 <= r.detect <= 1.0:
                problems.append(f"class {i} detection probability {r.detect!r} for {label!r} outside [0, 1]")
            elif model.mode == "deterministic" and r.detect not in (0.0, 1.0):
                problems.append(f"class {i} detection {r.detect!r} for {label!r} is not 0 or 1 in a deterministic model")

    if model.target is not None:
        for label, obs in model.observables.items():
            if obs.base is not None and obs.base.dim != model.target.dim:
                problems.append(f"observable {label!r} dimension differs from the target state")
    return problems


def _check_delta(obs: ExtendedObservable, F: MacroProperty):
    unknown = F.delta.members - obs.spectrum
    if unknown:
        raise InvalidInput(f"Δ contains {sorted(unknown)} outside the spectrum of {obs.label!r}")


def class_breakdown(model: MicroModel, i: int, F: MacroProperty) -> Breakdown:
    """Per-class breakdown P_t = P_d · P where P is 0 or 1.

    When Δ contains a₀ the undetected branch also counts towards ``total``;
    ``conditional`` stays the detected-only indicator.
    """
    obs = model.observable(F.observable)
    _check_delta(obs, F)
    detect, value = model.response(i, F.observable)
    conditional = 1.0 if value in F.delta.members else 0.0
    total = detect * conditional
    if F.contains_a0:
        total += 1.0 - detect
    return Breakdown(total, detect, conditional)


def state_breakdown(model: MicroModel, F: MacroProperty) -> Breakdown:
    obs = model.observable(F.observable)
    _check_delta(obs, F)
    detect_i, values = model.response_arrays(F.observable)
    indicator = np.isin(values, list(F.delta.members)).astype(float)
    p = model.weights
    detect = float(p @ detect_i)
    detected_part = float(p @ (detect_i * indicator))
    if F.contains_a0:
        total = float(p @ (detect_i * indicator + (1.0 - detect_i)))
    else:
        total = detected_part
    conditional = detected_part / detect if detect > 0 else None
    return Breakdown(total, detect, conditional)


def _dichotomic_pair(model: MicroModel, a: str, b: str):
    obs_a, obs_b = model.observable(a), model.observable(b)
    if not (obs_a.elementary and obs_b.elementary):
        raise DomainError("correlations are defined for elementary observables")
    if not (obs_a.is_dichotomic() and obs_b.is_dichotomic()):
        raise DomainError("correlations need ±1-valued observables")
    return model.response_arrays(a), model.response_arrays(b)


def conditional_correlation(model: MicroModel, a: str, b: str) -> float | None:
    """Correlation over jointly detected objects only; ``None`` if none are."""
    (da, va), (db, vb) = _dichotomic_pair(model, a, b)
    p = model.weights
    coincidence = float(p @ (da * db))
    if coincidence <= 0:
        return None
    return float(p @ (da * db * va * vb)) / coincidence


def unconditional_correlation(model: MicroModel, a: str, b: str) -> float:
    """Correlation over all objects with the no-registration outcome scored as 0."""
    (da, va), (db, vb) = _dichotomic_pair(model, a, b)
    return float(model.weights @ ((da * va) * (db * vb)))


@dataclass(frozen=True)
class ConsistencyReport:
    deviations: tuple
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def quantum_consistency(
    model: MicroModel, properties: Iterable[MacroProperty], tolerance: float = 1e-12
) -> ConsistencyReport:
    """Compare detection-conditional probabilities with the Born rule on ``model.target``.

    An undefined conditional probability counts as an infinite deviation.
    """
    if model.target is None:
        raise InvalidInput("model has no target state")
    deviations = []
    for F in properties:
        if F.contains_a0:
            raise DomainError("properties containing a0 have no quantum counterpart")
        obs = model.observable(F.observable)
        if obs.base is None:
            raise InvalidInput(f"observable {F.observable!r} has no quantum representation")
        quantum = born_probability(model.target, obs.base, F.delta)
        conditional = state_breakdown(model, F).conditional
        deviations.append(math.inf if conditional is None else abs(conditional - quantum))
    return ConsistencyReport(tuple(deviations), max(deviations, default=0.0), tolerance)
