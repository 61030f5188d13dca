"""Seeded Monte Carlo preparation and measurement of physical objects.

Every random draw comes from a counter-based stream keyed by
(seed, purpose, observable label) and indexed by object id, so results do
not depend on how the work is split across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np

from .errors import InvalidInput
from .micro_model import MacroProperty, MicroModel, state_breakdown
from .streams import map_chunks, stream_key, uniforms


class PhysicalObject(NamedTuple):
    id: int
    class_index: int


class OutcomeRecord(NamedTuple):
    object_id: int
    observable_label: str
    outcome: float


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Prepared objects stored column-wise: ids and hidden class indices."""

    ids: np.ndarray
    class_index: np.ndarray
    n_classes: int

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, k) -> PhysicalObject:
        return PhysicalObject(int(self.ids[k]), int(self.class_index[k]))

    def __iter__(self) -> Iterator[PhysicalObject]:
        return (PhysicalObject(int(i), int(c)) for i, c in zip(self.ids, self.class_index))


@dataclass(frozen=True, eq=False)
class Measurement:
    """Outcomes of one observable measured on every object of an ensemble."""

    observable_label: str
    object_ids: np.ndarray
    outcomes: np.ndarray
    detected: np.ndarray
    a0: float

    def __len__(self) -> int:
        return len(self.object_ids)

    def __getitem__(self, k) -> OutcomeRecord:
        return OutcomeRecord(int(self.object_ids[k]), self.observable_label, float(self.outcomes[k]))

    def __iter__(self) -> Iterator[OutcomeRecord]:
        return (self[k] for k in range(len(self)))


def prepare(model: MicroModel, n: int, seed: int, start_id: int = 0) -> Ensemble:
    """Draw ``n`` objects with class probabilities given by the model weights."""
    if n < 1:
        raise InvalidInput("n must be at least 1")
    model.check()
    cum = np.cumsum(model.weights)
    cum /= cum[-1]
    key = stream_key(seed, "prepare")
    last = model.n_classes - 1

    def draw(lo, hi):
        u = uniforms(key, np.arange(start_id + lo, start_id + hi, dtype=np.uint64))
        return np.minimum(np.searchsorted(cum, u, side="right"), last)

    classes = np.concatenate(map_chunks(draw, n)).astype(np.int64)
    ids = np.arange(start_id, start_id + n, dtype=np.int64)
    return Ensemble(ids, classes, model.n_classes)


def measure_ensemble(objects: Ensemble, observable_label: str, model: MicroModel, seed: int) -> Measurement:
    """Measure ``observable_label`` on every object.

    Each constituent is detected independently with its class probability;
    any miss yields the no-registration outcome.
    """
    obs = model.observable(observable_label)
    parts = obs.constituents or (obs.label,)
    detect_tables = []
    for part in parts:
        d, _ = model.response_arrays(part)
        detect_tables.append((stream_key(seed, "detect", observable_label, part), d))
    _, values = model.response_arrays(observable_label)

    def run(lo, hi):
        ids = objects.ids[lo:hi].astype(np.uint64)
        cls = objects.class_index[lo:hi]
        hit = np.ones(hi - lo, dtype=bool)
        for key, d in detect_tables:
            hit &= uniforms(key, ids) < d[cls]
        return hit

    if len(objects):
        detected = np.concatenate(map_chunks(run, len(objects)))
    else:
        detected = np.zeros(0, dtype=bool)
    outcomes = np.where(detected, values[objects.class_index], obs.a0)
    return Measurement(observable_label, objects.ids.copy(), outcomes, detected, obs.a0)


@dataclass(frozen=True)
class EnsembleTally:
    """Counters N, N₀ and per-class N⁽ⁱ⁾, N₀⁽ⁱ⁾, N_F⁽ⁱ⁾ for one property."""

    property: MacroProperty
    n: int
    n0: int
    per_class_n: tuple
    per_class_n0: tuple
    per_class_nf: tuple

    @property
    def nf(self) -> int:
        return sum(self.per_class_nf)

    @property
    def freq_total(self) -> Fraction:
        return Fraction(self.nf, self.n)

    @property
    def freq_detect(self) -> Fraction:
        return Fraction(self.n - self.n0, self.n)

    @property
    def freq_conditional(self) -> Fraction | None:
        detected = self.n - self.n0
        if detected == 0:
            return None
        if self.property.contains_a0:
            detected_nf = self.nf - self.n0
            return Fraction(detected_nf, detected)
        return Fraction(self.nf, detected)

    def class_identity(self, i: int) -> bool | None:
        """Per-class frequency factorization, exact; ``None`` when class i has no detections."""
        n_i, n0_i, nf_i = self.per_class_n[i], self.per_class_n0[i], self.per_class_nf[i]
        if n_i - n0_i <= 0:
            return None
        lhs = Fraction(nf_i, n_i)
        rhs = Fraction(n_i - n0_i, n_i) * Fraction(nf_i, n_i - n0_i)
        return lhs == rhs

    def violations(self) -> list[str]:
        """Every counter identity that fails; empty for any correct run."""
        out = []
        if sum(self.per_class_n) != self.n:
            out.append("per-class N does not sum to N")
        if sum(self.per_class_n0) != self.n0:
            out.append("per-class N0 does not sum to N0")
        for i, (n_i, n0_i, nf_i) in enumerate(zip(self.per_class_n, self.per_class_n0, self.per_class_nf)):
            if not 0 <= n0_i <= n_i:
                out.append(f"class {i}: N0 outside [0, N]")
            if self.class_identity(i) is False:
                out.append(f"class {i}: frequency factorization fails")
            if not self.property.contains_a0 and nf_i not in (0, n_i - n0_i):
                out.append(f"class {i}: N_F is neither 0 nor N - N0")
        if self.n > self.n0:
            lhs = Fraction(self.nf, self.n)
            rhs = Fraction(self.n - self.n0, self.n) * sum(
                (Fraction(nf_i, self.n - self.n0) for nf_i in self.per_class_nf), Fraction(0)
            )
            if lhs != rhs:
                out.append("ensemble frequency factorization fails")
        return out

    def identities_hold(self) -> bool:
        return not self.violations()

    def __add__(self, other: "EnsembleTally") -> "EnsembleTally":
        if not isinstance(other, EnsembleTally):
            return NotImplemented
        if other.property != self.property or len(other.per_class_n) != len(self.per_class_n):
            raise InvalidInput("can only merge tallies of the same property and model")

        def add(a, b):
            return tuple(x + y for x, y in zip(a, b))

        return EnsembleTally(
            self.property,
            self.n + other.n,
            self.n0 + other.n0,
            add(self.per_class_n, other.per_class_n),
            add(self.per_class_n0, other.per_class_n0),
            add(self.per_class_nf, other.per_class_nf),
        )

    def rows(self) -> list[dict]:
        """One row per class plus a totals row, for CSV export."""
        rows = []
        for i, (n_i, n0_i, nf_i) in enumerate(zip(self.per_class_n, self.per_class_n0, self.per_class_nf)):
            rows.append({
                "class": str(i),
                "N": n_i,
                "N0": n0_i,
                "NF": nf_i,
                "identity_ok": self.class_identity(i),
            })
        rows.append({
            "class": "total",
            "N": self.n,
            "N0": self.n0,
            "NF": self.nf,
            "identity_ok": self.identities_hold(),
        })
        return rows


def tally(objects: Ensemble, records: Measurement, F: MacroProperty) -> EnsembleTally:
    if records.observable_label != F.observable:
        raise InvalidInput(f"records are for {records.observable_label!r}, property is on {F.observable!r}")
    if len(records) != len(objects) or not np.array_equal(records.object_ids, objects.ids):
        raise InvalidInput("records do not cover exactly the prepared objects")
    if len(objects) == 0:
        raise InvalidInput("cannot tally an empty ensemble")
    undetected = records.outcomes == records.a0
    in_delta = np.isin(records.outcomes, list(F.delta.members)) & ~undetected
    if F.contains_a0:
        in_delta |= undetected
    k = objects.n_classes
    cls = objects.class_index

    def counts(mask):
        return tuple(int(c) for c in np.bincount(cls[mask], minlength=k))

    return EnsembleTally(
        F,
        n=len(objects),
        n0=int(undetected.sum()),
        per_class_n=tuple(int(c) for c in np.bincount(cls, minlength=k)),
        per_class_n0=counts(undetected),
        per_class_nf=counts(in_delta),
    )


def _binomial_se(p: float, n: float) -> float:
    if n <= 0:
        return math.inf
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass(frozen=True)
class ConvergenceReport:
    tally: EnsembleTally
    analytic_total: float
    analytic_detect: float
    analytic_conditional: float | None
    deviations: dict
    standard_errors: dict

    def within(self, k: float = 5.0) -> bool:
        """True when every defined deviation is at most ``k`` standard errors."""
        for name, dev in self.deviations.items():
            if dev is None:
                continue
            if dev > k * self.standard_errors[name] + 1e-12:
                return False
        return True

    def as_dict(self) -> dict:
        return {
            "n": self.tally.n,
            "analytic": {
                "total": self.analytic_total,
                "detect": self.analytic_detect,
                "conditional": self.analytic_conditional,
            },
            "empirical": {
                "total": float(self.tally.freq_total),
                "detect": float(self.tally.freq_detect),
                "conditional": None if self.tally.freq_conditional is None else float(self.tally.freq_conditional),
            },
            "deviations": dict(self.deviations),
            "standard_errors": dict(self.standard_errors),
            "identities_hold": self.tally.identities_hold(),
        }


def convergence_report(model: MicroModel, F: MacroProperty, n: int, seed: int) -> ConvergenceReport:
    """Compare simulated frequencies with the analytic breakdown of ``F``."""
    objects = prepare(model, n, seed)
    records = measure_ensemble(objects, F.observable, model, seed)
    t = tally(objects, records, F)
    exact = state_breakdown(model, F)
    deviations = {
        "total": abs(float(t.freq_total) - exact.total),
        "detect": abs(float(t.freq_detect) - exact.detect),
        "conditional": None,
    }
    errors = {
        "total": _binomial_se(exact.total, n),
        "detect": _binomial_se(exact.detect, n),
        "conditional": math.inf,
    }
    if exact.conditional is not None and t.freq_conditional is not None:
        deviations["conditional"] = abs(float(t.freq_conditional) - exact.conditional)
        errors["conditional"] = _binomial_se(exact.conditional, n * exact.detect)
    return ConvergenceReport(t, exact.total, exact.detect, exact.conditional, deviations, errors)
