"""Command-line front end.

    objectiveqm <born|simulate|synthesize|chsh|ks|threshold> --config FILE --out DIR [--seed N]
    objectiveqm replay --manifest FILE --out DIR

Every run writes its outputs plus ``manifest.json`` into ``--out``.
Exit codes: 0 success (an infeasible synthesis is a success), 2 bad
config, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import measure_ensemble, prepare, tally, convergence_report
from .errors import (
    DomainError,
    Infeasible,
    InfeasibleEvasion,
    InvalidInput,
    InvariantViolation,
    NoThreshold,
    NotFound,
    NumericallyAmbiguous,
    TooLarge,
)
from .fileio import (
    FORMAT_VERSION,
    ConfigError,
    digest,
    dump_model,
    dumps,
    model_from_dict,
    observable_from_config,
    property_from_config,
    property_to_config,
    require,
    state_from_config,
    to_csv,
    write_text,
)
from .micro_model import MicroClass, MicroModel, Response, state_breakdown
from .nogo import (
    Context,
    KSSystem,
    chsh_blockwise,
    ks_context_check,
    ks_evasion_model,
    ks_global_search,
    peres_mermin,
)
from .presets import CHSH_SETTINGS, chsh_optimal_observables, quantum_chsh_correlations
from .quantum import OutcomeSet, born_probability, singlet_state, tensor_product_observable
from .synthesis import ChshTarget, eta_threshold, synthesize_chsh, synthesize_product
from .streams import worker_count

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3
COMMANDS = ("born", "simulate", "synthesize", "chsh", "ks", "threshold")
STOCHASTIC = ("simulate", "chsh", "ks")


class Outputs:
    """Collects output files so the manifest can record their digests."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []

    def write(self, name: str, text: str) -> None:
        write_text(self.out / name, text)
        self.files.append(name)

    def json(self, name: str, doc) -> None:
        self.write(name, dumps({"format_version": FORMAT_VERSION, **doc}))


# ------------------------------------------------------------------ helpers


def _seed(config: dict) -> int:
    seed = require(config, "seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    return seed


def _positive_int(config: dict, key: str, default=None) -> int:
    value = config.get(key, default)
    if value is None:
        raise ConfigError(f"missing required field {key!r}")
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{key} must be a positive integer")
    return value


def _model(config: dict, base_dir: Path) -> MicroModel:
    """Inline model document or a path to a model file, relative to the config."""
    spec = require(config, "model")
    if isinstance(spec, str):
        path = (base_dir / spec) if not Path(spec).is_absolute() else Path(spec)
        try:
            spec = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read model file {path}: {exc}") from None
        config["model"] = spec
    return model_from_dict(spec).check()


def _correlations(spec) -> np.ndarray:
    if spec is None:
        raise ConfigError("missing required field 'target'")
    if isinstance(spec, str):
        spec = {"preset": spec}
    if "preset" in spec:
        if spec["preset"] != "chsh-optimal":
            raise ConfigError(f"unknown target preset {spec['preset']!r}")
        return quantum_chsh_correlations()
    return np.array(require(spec, "correlations"), dtype=float)


def _system(spec) -> KSSystem:
    if spec is None or spec == "peres-mermin":
        return peres_mermin()
    if isinstance(spec, str):
        raise ConfigError(f"unknown KS system preset {spec!r}")
    contexts = [Context(tuple(require(c, "members")), int(require(c, "target"))) for c in require(spec, "contexts")]
    return KSSystem(tuple(require(spec, "observables")), tuple(contexts))


# ------------------------------------------------------------------ commands


def cmd_born(config: dict, out: Outputs, base_dir: Path) -> None:
    if config.get("preset") == "chsh-optimal":
        rho = singlet_state()
        sides = chsh_optimal_observables()
        observables = {
            a + b: tensor_product_observable(sides[a], sides[b], label=a + b)
            for a in CHSH_SETTINGS[:2]
            for b in CHSH_SETTINGS[2:]
        }
        properties = [{"observable": label, "delta": [v]} for label in observables for v in (1.0, -1.0)]
        properties = config.get("properties", properties)
    else:
        rho = state_from_config(require(config, "state"))
        observables = {}
        for k, spec in enumerate(require(config, "observables", list)):
            obs = observable_from_config(spec, f"obs{k}")
            if obs.dim != rho.dim:
                raise ConfigError(f"observable {obs.label!r} acts on dimension {obs.dim}, state has {rho.dim}")
            observables[obs.label] = obs
        properties = require(config, "properties", list)
    rows = []
    for spec in properties:
        F = property_from_config(spec)
        if F.observable not in observables:
            raise ConfigError(f"property refers to unknown observable {F.observable!r}")
        p = born_probability(rho, observables[F.observable], OutcomeSet(F.delta.members, F.contains_a0))
        rows.append({
            "observable": F.observable,
            "delta": " ".join(repr(v) for v in sorted(F.delta.members)),
            "probability": p,
        })
    out.write("born.csv", to_csv(rows, ["observable", "delta", "probability"]))


def cmd_simulate(config: dict, out: Outputs, base_dir: Path) -> None:
    model = _model(config, base_dir)
    F = property_from_config(require(config, "property"))
    n = _positive_int(config, "n")
    seed = _seed(config)
    if n >= 1000:
        report = convergence_report(model, F, n, seed)
        t = report.tally
        convergence = report.as_dict()
    else:
        objects = prepare(model, n, seed)
        t = tally(objects, measure_ensemble(objects, F.observable, model, seed), F)
        exact = state_breakdown(model, F)
        convergence = {"n": n, "analytic": {"total": exact.total, "detect": exact.detect, "conditional": exact.conditional}}
    violations = t.violations()
    out.write("tally.csv", to_csv(t.rows(), ["class", "N", "N0", "NF", "identity_ok"]))
    out.json("convergence.json", {
        "property": property_to_config(F),
        **convergence,
        "identities_hold": not violations,
        "identity_violations": violations,
    })
    if violations:
        raise InvariantViolation("counter identities failed: " + "; ".join(violations))


def _synthesize_chsh_doc(spec: dict):
    target = ChshTarget(_correlations(spec.get("target")), float(spec.get("eta", 1.0)))
    try:
        result = synthesize_chsh(target)
    except Infeasible as exc:
        return None, {"status": "infeasible", "eta": target.eta, "reason": str(exc)}
    return result.model, {
        "status": "feasible",
        "eta": target.eta,
        "n_classes": result.model.n_classes,
        "conditional_correlations": result.conditional.tolist(),
        "unconditional_correlations": result.unconditional.tolist(),
        "conditional_s": result.conditional_s,
        "unconditional_s": result.unconditional_s,
    }


def cmd_synthesize(config: dict, out: Outputs, base_dir: Path) -> None:
    kind = config.get("kind", "chsh")
    if kind == "chsh":
        model, summary = _synthesize_chsh_doc(config)
    elif kind == "product":
        rho = state_from_config(require(config, "state"))
        observables = [observable_from_config(s, f"obs{k}") for k, s in enumerate(require(config, "observables", list))]
        model = synthesize_product(rho, observables, float(config.get("detection", 1.0)))
        summary = {"status": "feasible", "n_classes": model.n_classes}
    else:
        raise ConfigError(f"unknown synthesis kind {kind!r}")
    if model is not None:
        out.write("model.json", dump_model(model))
    out.json("synthesis.json", {"kind": kind, **summary})


def cmd_chsh(config: dict, out: Outputs, base_dir: Path) -> None:
    if "synthesize" in config:
        model, summary = _synthesize_chsh_doc(config["synthesize"])
        if model is None:
            out.json("chsh.json", {"synthesis": summary, "report": None})
            return
    else:
        model, summary = _model(config, base_dir), None
    settings = tuple(config.get("settings", CHSH_SETTINGS))
    report = chsh_blockwise(model, settings, _positive_int(config, "n_per_block", 10**5), _seed(config))
    doc = {"synthesis": summary, "report": report.as_dict()}
    out.json("chsh.json", doc)
    out.write("chsh.txt", report.table() + "\n")


def _corrupt(model: MicroModel) -> MicroModel:
    """Negative control: detect every observable of every class."""
    classes = tuple(
        MicroClass(c.weight, {k: Response(1.0, r.value) for k, r in c.responses.items()}) for c in model.classes
    )
    return MicroModel(classes, model.observables, model.target, model.mode)


def cmd_ks(config: dict, out: Outputs, base_dir: Path) -> None:
    system = _system(config.get("system"))
    n = _positive_int(config, "n", 10**5)
    seed = _seed(config)
    search = ks_global_search(system)
    doc = {
        "search": {
            "n_observables": len(system.observables),
            "n_assignments": 2 ** len(system.observables),
            "n_satisfying": len(search.satisfying),
            "min_violations": search.min_violations,
            "witness": search.witness,
            "witness_violated_contexts": system.violations(search.witness),
        }
    }
    try:
        model = ks_evasion_model(system, search)
    except InfeasibleEvasion as exc:
        doc["evasion"] = {"status": "infeasible", "reason": str(exc)}
        out.json("ks.json", doc)
        return
    doc["evasion"] = {"status": "ok", "n_classes": model.n_classes}
    if config.get("corrupt", False):
        model = _corrupt(model)
        doc["evasion"]["corrupted"] = True
    checks = ks_context_check(model, system, n, seed)
    doc["contexts"] = [
        {
            "label": c.label,
            "members": list(c.members),
            "target": c.target,
            "n": c.n,
            "coincidences": c.coincidences,
            "coincidence_rate": c.coincidence_rate,
            "analytic_coincidence_rate": c.analytic_coincidence_rate,
            "violations": c.violations,
            "status": c.status,
        }
        for c in checks
    ]
    doc["total_violations"] = sum(c.violations for c in checks)
    out.json("ks.json", doc)
    out.write("model.json", dump_model(model))


def cmd_threshold(config: dict, out: Outputs, base_dir: Path) -> None:
    correlations = _correlations(config.get("target"))
    tol = float(config.get("tol", 0.005))
    try:
        result = eta_threshold(correlations, tol)
    except NoThreshold as exc:
        out.json("threshold.json", {"status": "no-threshold", "reason": str(exc), "tol": tol})
        return
    out.json("threshold.json", {
        "status": "ok",
        "eta_threshold": result.eta,
        "tol": tol,
        "n_bisection_solves": result.n_bisection_solves,
        "probes": [{"eta": e, "feasible": f} for e, f in result.probes],
    })


HANDLERS = {
    "born": cmd_born,
    "simulate": cmd_simulate,
    "synthesize": cmd_synthesize,
    "chsh": cmd_chsh,
    "ks": cmd_ks,
    "threshold": cmd_threshold,
}


# ------------------------------------------------------------------ driver


def execute(command: str, config: dict, out_dir: Path, base_dir: Path) -> Outputs:
    """Run ``command`` and write outputs plus a manifest into ``out_dir``."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    version = config.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported config format_version {version!r}")
    if command in STOCHASTIC:
        _seed(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = Outputs(out_dir)
    snapshot = json.loads(json.dumps(config))
    try:
        HANDLERS[command](config, out, base_dir)
    finally:
        # model paths get inlined by the handlers, so the snapshot is self-contained
        if isinstance(config.get("model"), dict):
            snapshot["model"] = config["model"]
        manifest = {
            "format_version": FORMAT_VERSION,
            "command": command,
            "config": snapshot,
            "seed": config.get("seed"),
            "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "threads": worker_count(),
            "outputs": {name: digest(out_dir / name) for name in out.files},
        }
        write_text(out_dir / "manifest.json", dumps(manifest))
    return out


def replay(manifest_path: Path, out_dir: Path) -> list[str]:
    """Re-run a manifest; returns the names of outputs whose digests differ."""
    manifest = json.loads(Path(manifest_path).read_text())
    command = require(manifest, "command")
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r} in manifest")
    config = require(manifest, "config", dict)
    execute(command, config, out_dir, Path(manifest_path).parent)
    expected = manifest.get("outputs", {})
    mismatched = [name for name, d in expected.items() if not (out_dir / name).exists() or digest(out_dir / name) != d]
    return mismatched


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="objectiveqm", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    p = sub.add_parser("replay", help="re-run a manifest and verify output digests")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            mismatched = replay(args.manifest, args.out)
            if mismatched:
                print(f"objectiveqm: replay differs in {', '.join(mismatched)}", file=sys.stderr)
                return EXIT_INVARIANT
            print("replay reproduced all outputs")
            return EXIT_OK
        try:
            config = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if args.seed is not None and isinstance(config, dict):
            config["seed"] = args.seed
        execute(args.command, config, args.out, args.config.parent)
    except (InvariantViolation, NumericallyAmbiguous) as exc:
        print(f"objectiveqm: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InvalidInput, DomainError, NotFound, TooLarge, ValueError, TypeError) as exc:
        print(f"objectiveqm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
