"""Block-wise CHSH estimation and context-wise Kochen-Specker checks on micro-models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ensemble import measure_ensemble, prepare
from .errors import InfeasibleEvasion, InvalidInput, TooLarge
from .micro_model import ExtendedObservable, MicroClass, MicroModel, Response, composite
from .presets import chsh_value
from .streams import stream_key
from .synthesis import chsh_tables

KS_MAX_OBSERVABLES = 24


# ---------------------------------------------------------------- CHSH


@dataclass(frozen=True)
class ChshBlock:
    a: str
    b: str
    size: int
    first_id: int
    coincidences: int
    estimate: float | None
    standard_error: float | None


@dataclass(frozen=True)
class ChshBlockReport:
    blocks: tuple
    s_estimate: float | None
    s_standard_error: float | None
    analytic_conditional_s: float | None
    analytic_unconditional_s: float

    def as_dict(self) -> dict:
        return {
            "blocks": [
                {
                    "a": blk.a,
                    "b": blk.b,
                    "size": blk.size,
                    "first_id": blk.first_id,
                    "coincidences": blk.coincidences,
                    "estimate": blk.estimate,
                    "standard_error": blk.standard_error,
                }
                for blk in self.blocks
            ],
            "s_estimate": self.s_estimate,
            "s_standard_error": self.s_standard_error,
            "analytic_conditional_s": self.analytic_conditional_s,
            "analytic_unconditional_s": self.analytic_unconditional_s,
        }

    def table(self) -> str:
        lines = [f"{'pair':<8}{'N':>10}{'coinc':>10}{'E':>12}{'se':>10}"]
        for blk in self.blocks:
            est = "undef" if blk.estimate is None else f"{blk.estimate:+.5f}"
            se = "-" if blk.standard_error is None else f"{blk.standard_error:.5f}"
            lines.append(f"{blk.a + blk.b:<8}{blk.size:>10}{blk.coincidences:>10}{est:>12}{se:>10}")
        if self.s_estimate is None:
            lines.append("S (conditional, estimated): undefined")
        else:
            lines.append(f"S (conditional, estimated): {self.s_estimate:.5f} +/- {self.s_standard_error:.5f}")
        if self.analytic_conditional_s is not None:
            lines.append(f"S (conditional, analytic):  {self.analytic_conditional_s:.5f}")
        lines.append(f"S (all objects, analytic):  {self.analytic_unconditional_s:.5f}")
        return "\n".join(lines)


def chsh_blockwise(
    model: MicroModel,
    settings: Sequence[str] = ("A1", "A2", "B1", "B2"),
    n_per_block: int = 10**5,
    seed: int = 0,
) -> ChshBlockReport:
    """Estimate each CHSH correlation on its own freshly prepared ensemble.

    Only coincident detections enter an estimate. Blocks use disjoint object
    id ranges and seeds derived from (seed, block label).
    """
    if len(settings) != 4:
        raise InvalidInput("settings must name A1, A2, B1, B2")
    if n_per_block < 1000:
        raise InvalidInput("n_per_block must be at least 1000")
    a1, a2, b1, b2 = settings
    for label in settings:
        model.observable(label)
    renamed = _relabel_for_tables(model, settings)

    blocks = []
    for k, (a, b) in enumerate(((a1, b1), (a1, b2), (a2, b1), (a2, b2))):
        block_seed = int(stream_key(seed, "chsh-block", a, b))
        objects = prepare(model, n_per_block, block_seed, start_id=k * n_per_block)
        ra = measure_ensemble(objects, a, model, block_seed)
        rb = measure_ensemble(objects, b, model, block_seed)
        both = ra.detected & rb.detected
        n_c = int(both.sum())
        if n_c == 0:
            blocks.append(ChshBlock(a, b, n_per_block, k * n_per_block, 0, None, None))
            continue
        products = ra.outcomes[both] * rb.outcomes[both]
        est = float(products.mean())
        se = math.sqrt(max(1.0 - est * est, 0.0) / n_c)
        blocks.append(ChshBlock(a, b, n_per_block, k * n_per_block, n_c, est, se))

    if any(blk.estimate is None for blk in blocks):
        s_est = s_se = None
    else:
        e = [blk.estimate for blk in blocks]
        s_est = abs(e[0] + e[1] + e[2] - e[3])
        s_se = math.sqrt(sum(blk.standard_error ** 2 for blk in blocks))

    cond, uncond = chsh_tables(renamed)
    analytic_cond = None if np.any(np.isnan(cond)) else chsh_value(cond)
    return ChshBlockReport(tuple(blocks), s_est, s_se, analytic_cond, chsh_value(uncond))


def _relabel_for_tables(model: MicroModel, settings) -> MicroModel:
    if tuple(settings) == ("A1", "A2", "B1", "B2"):
        return model
    rename = dict(zip(settings, ("A1", "A2", "B1", "B2")))
    registry = {
        rename[k]: ExtendedObservable(rename[k], obs.spectrum, obs.a0)
        for k, obs in model.observables.items()
        if k in rename
    }
    classes = tuple(
        MicroClass(c.weight, {rename[k]: r for k, r in c.responses.items() if k in rename}) for c in model.classes
    )
    return MicroModel(classes, registry, mode=model.mode)


# ---------------------------------------------------------------- Kochen-Specker


@dataclass(frozen=True)
class Context:
    members: tuple
    target: int

    def __post_init__(self):
        members = tuple(self.members)
        if len(set(members)) != len(members) or not members:
            raise InvalidInput(f"context members must be distinct and nonempty: {members}")
        if self.target not in (1, -1):
            raise InvalidInput("context target product must be +1 or -1")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "target", int(self.target))


@dataclass(frozen=True)
class KSSystem:
    """±1-valued observables and the product each context must have."""

    observables: tuple
    contexts: tuple

    def __post_init__(self):
        observables = tuple(self.observables)
        contexts = tuple(c if isinstance(c, Context) else Context(*c) for c in self.contexts)
        if len(set(observables)) != len(observables):
            raise InvalidInput("observable labels must be distinct")
        known = set(observables)
        for ctx in contexts:
            unknown = set(ctx.members) - known
            if unknown:
                raise InvalidInput(f"context refers to unknown observables {sorted(unknown)}")
        object.__setattr__(self, "observables", observables)
        object.__setattr__(self, "contexts", contexts)

    def context_label(self, k: int) -> str:
        return "ctx:" + ",".join(self.contexts[k].members)

    def violations(self, assignment: Mapping[str, int]) -> list[int]:
        return [
            k
            for k, ctx in enumerate(self.contexts)
            if math.prod(assignment[m] for m in ctx.members) != ctx.target
        ]


def peres_mermin() -> KSSystem:
    """3x3 square of two-qubit Pauli products: rows and two columns multiply to +I, one column to -I."""
    grid = [["XI", "IX", "XX"], ["IY", "YI", "YY"], ["XY", "YX", "ZZ"]]
    observables = tuple(label for row in grid for label in row)
    contexts = [Context(tuple(row), 1) for row in grid]
    contexts += [Context(tuple(grid[r][c] for r in range(3)), 1 if c < 2 else -1) for c in range(3)]
    return KSSystem(observables, tuple(contexts))


@dataclass(frozen=True)
class KSSearchResult:
    satisfying: tuple
    min_violations: int
    witness: dict
    minimal: tuple = field(repr=False)


def _all_assignments(n: int) -> np.ndarray:
    """Row j is assignment j: bit k of j set means observable k takes -1."""
    j = np.arange(2 ** n, dtype=np.int64)[:, None]
    bits = (j >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def ks_global_search(system: KSSystem) -> KSSearchResult:
    """Exhaustive search over all ±1 assignments.

    Returns the satisfying assignments, the minimum number of violated
    contexts and every assignment achieving that minimum.
    """
    n = len(system.observables)
    if n > KS_MAX_OBSERVABLES:
        raise TooLarge(f"{n} observables exceeds the brute-force cap of {KS_MAX_OBSERVABLES}")
    values = _all_assignments(n)
    index = {label: k for k, label in enumerate(system.observables)}
    violated = np.zeros(len(values), dtype=np.int64)
    for ctx in system.contexts:
        cols = [index[m] for m in ctx.members]
        violated += np.prod(values[:, cols], axis=1, dtype=np.int64) != ctx.target
    min_v = int(violated.min())

    def as_dict(row):
        return {label: int(v) for label, v in zip(system.observables, row)}

    satisfying = tuple(as_dict(row) for row in values[violated == 0])
    minimal = tuple(as_dict(row) for row in values[violated == min_v])
    return KSSearchResult(satisfying, min_v, minimal[0], minimal)


def ks_registry(system: KSSystem) -> dict[str, ExtendedObservable]:
    registry = {label: ExtendedObservable(label, {1.0, -1.0}) for label in system.observables}
    for k, ctx in enumerate(system.contexts):
        label = system.context_label(k)
        registry[label] = composite(label, [registry[m] for m in ctx.members], "product")
    return registry


def ks_evasion_model(system: KSSystem, search: KSSearchResult | None = None) -> MicroModel:
    """Uniform mixture of minimum-violation assignments with targeted non-detection.

    Each class is undetected on the first member of every context it
    violates, so no violating class is ever jointly detected in that context.
    A satisfiable system gets a single always-detected class.
    """
    search = ks_global_search(system) if search is None else search
    registry = ks_registry(system)
    families = search.minimal if search.min_violations else (search.witness,)
    weight = 1.0 / len(families)
    classes = []
    for assignment in families:
        blind = {system.contexts[k].members[0] for k in system.violations(assignment)}
        responses = {
            label: Response(0.0 if label in blind else 1.0, assignment[label]) for label in system.observables
        }
        classes.append(MicroClass(weight, responses))
    model = MicroModel(tuple(classes), registry, mode="deterministic")
    model.check()

    for k, ctx in enumerate(system.contexts):
        d, v = model.response_arrays(system.context_label(k))
        if np.any((d > 0) & (v != ctx.target)):
            raise InfeasibleEvasion(f"a violating class is detectable in context {k}")
        if not float(model.weights @ d) > 0:
            raise InfeasibleEvasion(f"context {k} is never jointly detected")
    return model


@dataclass(frozen=True)
class ContextCheck:
    label: str
    members: tuple
    target: int
    n: int
    coincidences: int
    violations: int
    analytic_coincidence_rate: float

    @property
    def status(self) -> str:
        if self.coincidences == 0:
            return "unverifiable"
        return "ok" if self.violations == 0 else "violated"

    @property
    def coincidence_rate(self) -> float:
        return self.coincidences / self.n


def ks_context_check(model: MicroModel, system: KSSystem, n: int, seed: int) -> list[ContextCheck]:
    """Simulate the joint measurement of each context and count detected runs breaking its product rule."""
    registry = dict(model.observables)
    missing = [label for label in system.observables if label not in registry]
    if missing:
        raise InvalidInput(f"model does not cover observables {missing}")
    for label, obs in ks_registry(system).items():
        registry.setdefault(label, obs)
    if len(registry) != len(model.observables):
        model = MicroModel(model.classes, registry, model.target, model.mode)

    reports = []
    for k, ctx in enumerate(system.contexts):
        label = system.context_label(k)
        ctx_seed = int(stream_key(seed, "ks-context", label))
        objects = prepare(model, n, ctx_seed, start_id=k * n)
        rec = measure_ensemble(objects, label, model, ctx_seed)
        d, _ = model.response_arrays(label)
        reports.append(
            ContextCheck(
                label,
                ctx.members,
                ctx.target,
                n,
                int(rec.detected.sum()),
                int(np.sum(rec.detected & (rec.outcomes != ctx.target))),
                float(model.weights @ d),
            )
        )
    return reports
