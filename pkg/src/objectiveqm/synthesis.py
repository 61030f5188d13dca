"""Construct micro-models whose detected statistics reproduce quantum targets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import Infeasible, InvalidInput, InvariantViolation, NoThreshold
from .lp import FeasibilityProblem, FeasibilityResult, lp_feasibility
from .micro_model import (
    ExtendedObservable,
    MacroProperty,
    MicroClass,
    MicroModel,
    Response,
    conditional_correlation,
    quantum_consistency,
    unconditional_correlation,
    validate_model,
)
from .presets import chsh_value
from .quantum import DensityState, OutcomeSet, SpectralObservable, born_probability

PRUNE_TOL = 1e-12
NO_CLICK = None
LOCAL_OUTCOMES = (1.0, -1.0, NO_CLICK)
SIDE_A = ("A1", "A2")
SIDE_B = ("B1", "B2")


def synthesize_product(
    rho: DensityState, observables: Sequence[SpectralObservable], detection: float = 1.0
) -> MicroModel:
    """One class per joint outcome tuple, weighted by the product of Born marginals.

    Reproduces every single-observable statistic conditionally on detection;
    joint statistics of several observables are not reproduced.
    """
    detection = float(detection)
    if not 0.0 < detection <= 1.0:
        raise InvalidInput("detection probability must lie in (0, 1]")
    if not observables:
        raise InvalidInput("need at least one observable")
    labels = [o.label for o in observables]
    if len(set(labels)) != len(labels):
        raise InvalidInput("observable labels must be unique")
    registry = {o.label: ExtendedObservable.from_spectral(o) for o in observables}

    marginals = [
        [(v, born_probability(rho, o, OutcomeSet({v}))) for v in o.eigenvalues] for o in observables
    ]
    classes = []
    for combo in itertools.product(*marginals):
        weight = math.prod(p for _, p in combo)
        if weight <= 0.0:
            continue
        responses = {label: Response(detection, v) for label, (v, _) in zip(labels, combo)}
        classes.append((weight, responses))
    total = math.fsum(w for w, _ in classes)
    mode = "deterministic" if detection == 1.0 else "stochastic"
    model = MicroModel(
        tuple(MicroClass(w / total, r) for w, r in classes), registry, target=rho, mode=mode
    )
    model.check()
    return model


def enumerate_joint_strategies(settings_a: Sequence[str], settings_b: Sequence[str]) -> list[tuple[dict, dict]]:
    """Every pair of deterministic local strategies with outcomes +1, -1 or no click (``None``)."""
    if not settings_a or not settings_b:
        raise InvalidInput("each side needs at least one setting")

    def side(settings):
        return [dict(zip(settings, outs)) for outs in itertools.product(LOCAL_OUTCOMES, repeat=len(settings))]

    return [(sa, sb) for sa in side(settings_a) for sb in side(settings_b)]


@dataclass(frozen=True)
class ChshTarget:
    """Four detection-conditional correlations E[x, y] and a per-side detection efficiency."""

    correlations: np.ndarray
    eta: float = 1.0

    def __post_init__(self):
        e = np.array(self.correlations, dtype=float)
        if e.shape != (2, 2):
            raise InvalidInput(f"correlations must be a 2x2 table, got shape {e.shape}")
        if not np.all(np.isfinite(e)) or np.any(np.abs(e) > 1.0):
            raise InvalidInput("correlations must lie in [-1, 1]")
        eta = float(self.eta)
        if not 0.0 < eta <= 1.0:
            raise InvalidInput("eta must lie in (0, 1]")
        e.setflags(write=False)
        object.__setattr__(self, "correlations", e)
        object.__setattr__(self, "eta", eta)

    @property
    def coincidence(self) -> float:
        """Joint detection rate per setting pair, as for independent detection on each side."""
        return self.eta ** 2


def _chsh_problem(target: ChshTarget, strategies) -> FeasibilityProblem:
    rows, rhs = [], []
    rows.append([1.0] * len(strategies))
    rhs.append(1.0)
    for side_index, settings in ((0, SIDE_A), (1, SIDE_B)):
        for s in settings:
            rows.append([float(pair[side_index][s] is not NO_CLICK) for pair in strategies])
            rhs.append(target.eta)
    for a in SIDE_A:
        for b in SIDE_B:
            rows.append([float(sa[a] is not NO_CLICK and sb[b] is not NO_CLICK) for sa, sb in strategies])
            rhs.append(target.coincidence)
    for x, a in enumerate(SIDE_A):
        for y, b in enumerate(SIDE_B):
            row = []
            for sa, sb in strategies:
                if sa[a] is NO_CLICK or sb[b] is NO_CLICK:
                    row.append(0.0)
                else:
                    row.append(sa[a] * sb[b] - target.correlations[x, y])
            rows.append(row)
            rhs.append(0.0)
    return FeasibilityProblem(np.array(rows), np.array(rhs))


def chsh_registry() -> dict[str, ExtendedObservable]:
    return {label: ExtendedObservable(label, {1.0, -1.0}) for label in SIDE_A + SIDE_B}


@dataclass(frozen=True)
class ChshSynthesis:
    model: MicroModel
    lp: FeasibilityResult = field(repr=False)
    conditional: np.ndarray = field(repr=False)
    unconditional: np.ndarray = field(repr=False)

    @property
    def conditional_s(self) -> float:
        return chsh_value(self.conditional)

    @property
    def unconditional_s(self) -> float:
        return chsh_value(self.unconditional)


def chsh_tables(model: MicroModel) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (conditional, unconditional) 2x2 correlation tables."""
    cond = np.full((2, 2), np.nan)
    uncond = np.empty((2, 2))
    for x, a in enumerate(SIDE_A):
        for y, b in enumerate(SIDE_B):
            c = conditional_correlation(model, a, b)
            cond[x, y] = np.nan if c is None else c
            uncond[x, y] = unconditional_correlation(model, a, b)
    return cond, uncond


def synthesize_chsh(target: ChshTarget) -> ChshSynthesis:
    """Mix deterministic local strategies so detected-only correlations hit the targets.

    Each side detects at rate ``eta`` for every setting and each setting pair
    is jointly detected at rate ``eta**2``. Pinning the coincidence rate keeps
    the correlation constraints from being met vacuously by never detecting a
    pair.

    Raises :class:`Infeasible` when no such mixture exists. The returned
    model is re-evaluated analytically; any mismatch is a bug and raises
    :class:`InvariantViolation`.
    """
    strategies = enumerate_joint_strategies(SIDE_A, SIDE_B)
    result = lp_feasibility(_chsh_problem(target, strategies))
    if not result.feasible:
        raise Infeasible(
            f"no local model with detection efficiency {target.eta:g} reproduces the conditional correlations"
        )
    w = result.x
    keep = np.flatnonzero(w > PRUNE_TOL)
    weights = w[keep] / w[keep].sum()
    classes = []
    for k, weight in zip(keep, weights):
        responses = {}
        for side in strategies[k]:
            for label, outcome in side.items():
                # an undetected setting still needs a value in the spectrum; it is never observed
                responses[label] = Response(0.0, 1.0) if outcome is NO_CLICK else Response(1.0, outcome)
        classes.append(MicroClass(weight, responses))
    model = MicroModel(tuple(classes), chsh_registry(), mode="deterministic")

    problems = validate_model(model)
    if problems:
        raise InvariantViolation("synthesized model is invalid: " + "; ".join(problems))
    cond, uncond = chsh_tables(model)
    if np.any(np.isnan(cond)):
        raise InvariantViolation("a setting pair has zero coincidence rate")
    if np.max(np.abs(cond - target.correlations)) > 1e-9:
        raise InvariantViolation("synthesized conditional correlations miss their targets")
    if chsh_value(uncond) > 2.0 + 1e-12:
        raise InvariantViolation("unconditional CHSH value exceeds the local bound")
    return ChshSynthesis(model, result, cond, uncond)


def chsh_feasible(correlations, eta: float) -> bool:
    try:
        synthesize_chsh(ChshTarget(correlations, eta))
    except Infeasible:
        return False
    return True


@dataclass(frozen=True)
class ThresholdResult:
    eta: float
    tol: float
    probes: tuple
    n_bisection_solves: int

    @property
    def n_solves(self) -> int:
        return len(self.probes)


def eta_threshold(correlations, tol: float = 0.005) -> ThresholdResult:
    """Largest detection efficiency (to within ``tol``) at which the targets are locally reproducible.

    Probes η = 1 and η = tol, then bisects. Feasibility must be monotone in η;
    a probe contradicting that raises :class:`InvariantViolation`.
    """
    if not 1e-4 < tol < 0.1:
        raise InvalidInput("tol must lie in (1e-4, 0.1)")
    probes: list[tuple[float, bool]] = []

    def probe(eta):
        ok = chsh_feasible(correlations, eta)
        probes.append((eta, ok))
        feasible_max = max((e for e, f in probes if f), default=-1.0)
        if any(not f and e < feasible_max for e, f in probes):
            raise InvariantViolation(f"feasibility is not monotone in eta: probes {probes}")
        return ok

    if probe(1.0):
        return ThresholdResult(1.0, tol, tuple(probes), 0)
    if not probe(tol):
        raise NoThreshold(f"targets are infeasible even at eta = {tol}")
    lo, hi = tol, 1.0
    n_bisect = 0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        n_bisect += 1
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdResult(lo, tol, tuple(probes), n_bisect)


def product_properties(model: MicroModel) -> list[MacroProperty]:
    """Every single-observable property with a₀ ∉ Δ over the model's quantum observables."""
    props = []
    for label, obs in model.observables.items():
        if obs.base is None:
            continue
        values = sorted(obs.spectrum)
        for r in range(len(values) + 1):
            for subset in itertools.combinations(values, r):
                props.append(MacroProperty.of(label, subset))
    return props


def check_product_model(model: MicroModel, tolerance: float = 1e-12) -> bool:
    return quantum_consistency(model, product_properties(model), tolerance).passed
