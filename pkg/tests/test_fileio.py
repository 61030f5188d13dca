import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from objectiveqm.fileio import (
    ConfigError,
    dump_model,
    load_model,
    model_from_dict,
    model_to_dict,
    observable_from_config,
    property_from_config,
    property_to_config,
    state_from_config,
    to_csv,
)
from objectiveqm.micro_model import ExtendedObservable, MacroProperty, MicroClass, MicroModel, Response, composite
from objectiveqm.quantum import random_density_state, spin_observable
from objectiveqm.synthesis import synthesize_product

from conftest import random_model


def test_model_round_trip_random(rng):
    for _ in range(200):
        model = random_model(rng)
        text = dump_model(model)
        back = load_model(text)
        assert dump_model(back) == text
        assert back.weights.tolist() == model.weights.tolist()
        assert model_to_dict(back) == model_to_dict(model)


def test_parse_serialize_parse_is_stable(rng):
    model = random_model(rng)
    doc = json.loads(dump_model(model))
    assert model_to_dict(model_from_dict(doc)) == doc


def test_product_model_keeps_quantum_observable(rng):
    rho = random_density_state(2, rng)
    model = synthesize_product(rho, [spin_observable((0, 0, 1.0), "z")], 0.8)
    back = load_model(dump_model(model))
    assert back.observables["z"].base is not None
    np.testing.assert_allclose(back.target.rho, model.target.rho, atol=1e-15)
    assert dump_model(back) == dump_model(model)


pm = st.sampled_from([1.0, -1.0])


@settings(max_examples=200, deadline=None)
@given(
    weights=st.lists(st.integers(1, 1000), min_size=1, max_size=5),
    detects=st.lists(st.floats(0, 1), min_size=5, max_size=5),
    values=st.lists(pm, min_size=10, max_size=10),
)
def test_round_trip_property(weights, detects, values):
    total = sum(weights)
    registry = {k: ExtendedObservable(k, {1.0, -1.0}) for k in ("a", "b")}
    registry["ab"] = composite("ab", [registry["a"], registry["b"]])
    classes = tuple(
        MicroClass(w / total, {"a": Response(detects[i], values[2 * i]), "b": Response(1.0, values[2 * i + 1])})
        for i, w in enumerate(weights)
    )
    model = MicroModel(classes, registry)
    text = dump_model(model)
    assert dump_model(load_model(text)) == text


def test_text_is_versioned_json():
    model = MicroModel((MicroClass(1.0, {"a": Response(1.0, 1.0)}),), {"a": ExtendedObservable("a", {1.0, -1.0})})
    doc = json.loads(dump_model(model))
    assert doc["format_version"] == 1 and doc["kind"] == "objectiveqm.model"


def test_rejects_other_versions():
    model = MicroModel((MicroClass(1.0, {"a": Response(1.0, 1.0)}),), {"a": ExtendedObservable("a", {1.0, -1.0})})
    doc = model_to_dict(model)
    doc["format_version"] = 2
    with pytest.raises(ConfigError):
        model_from_dict(doc)


def test_invalid_json():
    with pytest.raises(ConfigError):
        load_model("{not json")


@pytest.mark.parametrize(
    "spec",
    [
        "singlet",
        {"amplitudes": [1, [0, 1]]},
        {"density": [[0.5, 0], [0, 0.5]]},
        {"mixture": [{"weight": 0.5, "state": {"amplitudes": [1, 0]}}, {"weight": 0.5, "state": {"amplitudes": [0, 1]}}]},
    ],
)
def test_state_specs(spec):
    rho = state_from_config(spec)
    assert np.trace(rho.rho).real == pytest.approx(1.0)


def test_unknown_state():
    with pytest.raises(ConfigError):
        state_from_config({"preset": "ghz"})
    with pytest.raises(ConfigError):
        state_from_config({})


def test_observable_specs():
    z = observable_from_config({"spin": [0, 0, 1]}, "z")
    np.testing.assert_allclose(z.projector(1.0).real, np.diag([1, 0]), atol=1e-15)
    a = observable_from_config({"angle": 0.0, "label": "a"})
    np.testing.assert_allclose(a.projector(1.0), z.projector(1.0), atol=1e-15)
    zz = observable_from_config({"tensor": [{"spin": [0, 0, 1]}, {"spin": [0, 0, 1]}]}, "zz")
    assert sorted(zz.eigenvalues) == [-1.0, 1.0]
    b = observable_from_config({"branches": [{"value": 2, "projector": [[1, 0], [0, 0]]}, {"value": 5, "projector": [[0, 0], [0, 1]]}]})
    assert sorted(b.eigenvalues) == [2.0, 5.0]
    with pytest.raises(ConfigError):
        observable_from_config({"label": "q"})


def test_property_round_trip():
    F = MacroProperty.of("A", [1.0, -1.0], True)
    assert property_from_config(property_to_config(F)) == F
    empty = property_from_config({"observable": "A"})
    assert empty.delta.members == frozenset() and not empty.contains_a0


def test_csv():
    text = to_csv([{"a": 1, "b": None}, {"a": 0.5, "b": True}], ["a", "b"])
    assert text.splitlines()[0] == "a,b"
    assert len(text.splitlines()) == 3
