"""JSON documents for configs, model files and reports.

Floats are written with Python's shortest round-trip repr, so a parsed
file reproduces every number bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import operator
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidInput
from .micro_model import (
    COMBINERS,
    ExtendedObservable,
    MacroProperty,
    MicroClass,
    MicroModel,
    Response,
)
from .quantum import (
    DensityState,
    SpectralObservable,
    make_pure,
    mix,
    plane_direction,
    singlet_state,
    spin_observable,
    tensor_product_observable,
)

FORMAT_VERSION = 1
MODEL_KIND = "objectiveqm.model"


class ConfigError(InvalidInput):
    """Malformed configuration document."""


def require(doc: dict, key: str, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise ConfigError(f"missing required field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"field {key!r} has the wrong type")
    return value


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_text(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


def digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(row.get(k)) for k in columns})
    return buf.getvalue()


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


# ------------------------------------------------------------ complex numbers


def _complex(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(f"cannot read {x!r} as a complex number")


def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(rows) -> np.ndarray:
    try:
        return np.array([[_complex(z) for z in row] for row in rows], dtype=complex)
    except TypeError:
        raise ConfigError("matrix must be a list of rows") from None


# ------------------------------------------------------------ states and observables


def state_from_config(spec) -> DensityState:
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, dict):
        raise ConfigError("state must be an object")
    if "preset" in spec:
        if spec["preset"] != "singlet":
            raise ConfigError(f"unknown state preset {spec['preset']!r}")
        return singlet_state()
    if "amplitudes" in spec:
        return make_pure([_complex(z) for z in spec["amplitudes"]])
    if "density" in spec:
        return DensityState(_decode_matrix(spec["density"]))
    if "mixture" in spec:
        return mix((float(require(c, "weight")), state_from_config(require(c, "state"))) for c in spec["mixture"])
    raise ConfigError("state needs one of preset, amplitudes, density, mixture")


def state_to_config(state: DensityState) -> dict:
    return {"density": _encode_matrix(state.rho)}


def observable_from_config(spec: dict, label: str | None = None) -> SpectralObservable:
    if not isinstance(spec, dict):
        raise ConfigError("observable must be an object")
    label = spec.get("label", label or "obs")
    if "spin" in spec:
        return spin_observable([float(c) for c in spec["spin"]], label)
    if "angle" in spec:
        return spin_observable(plane_direction(float(spec["angle"])), label)
    if "tensor" in spec:
        parts = spec["tensor"]
        if len(parts) != 2:
            raise ConfigError("tensor observables take exactly two factors")
        combiner = spec.get("combiner", "product")
        fn = {"product": operator.mul, "sum": operator.add}.get(combiner)
        if fn is None:
            raise ConfigError(f"unknown combiner {combiner!r}")
        a = observable_from_config(parts[0], f"{label}.0")
        b = observable_from_config(parts[1], f"{label}.1")
        return tensor_product_observable(a, b, fn, label)
    if "branches" in spec:
        branches = spec["branches"]
        return SpectralObservable(
            label,
            tuple(float(require(b, "value")) for b in branches),
            tuple(_decode_matrix(require(b, "projector")) for b in branches),
        )
    raise ConfigError(f"observable {label!r} needs one of spin, angle, tensor, branches")


def spectral_to_config(obs: SpectralObservable) -> dict:
    return {
        "label": obs.label,
        "branches": [
            {"value": v, "projector": _encode_matrix(p)} for v, p in zip(obs.eigenvalues, obs.projectors)
        ],
    }


def property_from_config(spec: dict) -> MacroProperty:
    return MacroProperty.of(
        str(require(spec, "observable")),
        [float(v) for v in spec.get("delta", [])],
        bool(spec.get("contains_a0", False)),
    )


def property_to_config(F: MacroProperty) -> dict:
    return {"observable": F.observable, "delta": sorted(F.delta.members), "contains_a0": F.contains_a0}


# ------------------------------------------------------------ model files


def model_to_dict(model: MicroModel) -> dict:
    observables = []
    for label, obs in model.observables.items():
        entry = {"label": label, "spectrum": sorted(obs.spectrum), "a0": obs.a0}
        if obs.constituents:
            entry["constituents"] = list(obs.constituents)
            entry["combiner"] = obs.combiner
        if obs.base is not None:
            entry["quantum"] = spectral_to_config(obs.base)
        observables.append(entry)
    classes = [
        {"weight": c.weight, "responses": {k: [r.detect, r.value] for k, r in c.responses.items()}}
        for c in model.classes
    ]
    return {
        "format_version": FORMAT_VERSION,
        "kind": MODEL_KIND,
        "mode": model.mode,
        "observables": observables,
        "classes": classes,
        "target": None if model.target is None else state_to_config(model.target),
    }


def model_from_dict(doc: dict) -> MicroModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model format_version {doc.get('format_version')!r}")
    registry = {}
    for entry in require(doc, "observables", list):
        label = str(require(entry, "label"))
        base = observable_from_config(entry["quantum"], label) if entry.get("quantum") else None
        combiner = entry.get("combiner", "product")
        if combiner not in COMBINERS:
            raise ConfigError(f"unknown combiner {combiner!r}")
        registry[label] = ExtendedObservable(
            label,
            frozenset(float(v) for v in require(entry, "spectrum", list)),
            a0=float(entry.get("a0", 0.0)),
            constituents=tuple(entry.get("constituents", ())),
            combiner=combiner,
            base=base,
        )
    classes = []
    for c in require(doc, "classes", list):
        responses = {k: Response(float(v[0]), float(v[1])) for k, v in require(c, "responses", dict).items()}
        classes.append(MicroClass(float(require(c, "weight")), responses))
    target = doc.get("target")
    return MicroModel(
        tuple(classes),
        registry,
        target=None if target is None else state_from_config(target),
        mode=doc.get("mode", "stochastic"),
    )


def dump_model(model: MicroModel) -> str:
    return dumps(model_to_dict(model))


def load_model(text: str) -> MicroModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(doc)
