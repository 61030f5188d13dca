import itertools
import math

import numpy as np
import pytest

from objectiveqm.micro_model import (
    ExtendedObservable,
    MicroClass,
    MicroModel,
    Response,
    composite,
)


def random_model(rng, n_classes=None, with_composite=True, dichotomic=False, detect_choices=None):
    """Random valid micro-model over a few elementary observables and one product composite."""
    n_classes = int(rng.integers(1, 6)) if n_classes is None else n_classes
    registry = {}
    n_obs = int(rng.integers(1, 4))
    for k in range(n_obs):
        if dichotomic:
            spectrum = {1.0, -1.0}
        else:
            size = int(rng.integers(1, 4))
            spectrum = {float(v) for v in rng.choice([-2, -1, 1, 2, 3], size=size, replace=False)}
        registry[f"E{k}"] = ExtendedObservable(f"E{k}", spectrum)
    if with_composite:
        parts = [registry[lab] for lab in list(registry)[: max(1, n_obs)]]
        registry["C"] = composite("C", parts, "product")
    weights = rng.dirichlet(np.ones(n_classes))
    weights = weights / weights.sum()
    weights = np.maximum(weights, 1e-6)
    weights = weights / math.fsum(weights)
    classes = []
    for i in range(n_classes):
        responses = {}
        for label, obs in registry.items():
            if not obs.elementary:
                continue
            if detect_choices is not None:
                d = float(rng.choice(detect_choices))
            else:
                d = float(rng.choice([0.0, 1.0, rng.uniform()], p=[0.1, 0.2, 0.7]))
            responses[label] = Response(d, float(rng.choice(sorted(obs.spectrum))))
        classes.append(MicroClass(float(weights[i]), responses))
    model = MicroModel(tuple(classes), registry)
    assert model.check()
    return model


def random_property(rng, model, allow_a0=True):
    from objectiveqm.micro_model import MacroProperty

    label = str(rng.choice(list(model.observables)))
    spectrum = sorted(model.observables[label].spectrum)
    members = [v for v in spectrum if rng.uniform() < 0.5]
    contains_a0 = bool(allow_a0 and rng.uniform() < 0.3)
    return MacroProperty.of(label, members, contains_a0)


def enumerate_branches(model, i, label):
    """Oracle: every (probability, outcome) branch of measuring ``label`` on class ``i``.

    Walks the detection tree of each constituent explicitly instead of using
    the product formula.
    """
    obs = model.observables[label]
    parts = obs.constituents or (label,)
    resp = [model.classes[i].responses[p] for p in parts]
    branches = []
    for pattern in itertools.product((True, False), repeat=len(parts)):
        prob = 1.0
        for hit, r in zip(pattern, resp):
            prob *= r.detect if hit else 1.0 - r.detect
        if all(pattern):
            values = [r.value for r in resp]
            outcome = obs.combine(values) if obs.constituents else values[0]
        else:
            outcome = None
        branches.append((prob, outcome))
    return branches


def oracle_breakdown(model, F):
    """(total, detect, conditional) by summing explicit branches over classes."""
    total = detect = detected_in = 0.0
    for i, cls in enumerate(model.classes):
        for prob, outcome in enumerate_branches(model, i, F.observable):
            w = cls.weight * prob
            if outcome is None:
                if F.contains_a0:
                    total += w
                continue
            detect += w
            if outcome in F.delta.members:
                total += w
                detected_in += w
    return total, detect, (detected_in / detect if detect > 0 else None)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
