import itertools
import math

import numpy as np
import pytest

from objectiveqm.errors import InvalidInput, NotFound, TooLarge
from objectiveqm.micro_model import ExtendedObservable, MicroClass, MicroModel, Response
from objectiveqm.nogo import (
    Context,
    KSSystem,
    chsh_blockwise,
    ks_context_check,
    ks_evasion_model,
    ks_global_search,
    peres_mermin,
)
from objectiveqm.presets import quantum_chsh_correlations
from objectiveqm.synthesis import ChshTarget, synthesize_chsh

PM = {1.0, -1.0}
LABELS = ("A1", "A2", "B1", "B2")


def deterministic_chsh(values, detect=1.0, labels=LABELS):
    registry = {k: ExtendedObservable(k, PM) for k in labels}
    cls = MicroClass(1.0, {k: Response(detect, v) for k, v in zip(labels, values)})
    return MicroModel((cls,), registry)


class TestChshBlockwise:
    def test_classical_point_mass(self):
        report = chsh_blockwise(deterministic_chsh((1, 1, 1, 1)), n_per_block=1000, seed=1)
        assert [b.estimate for b in report.blocks] == [1.0, 1.0, 1.0, 1.0]
        assert report.s_estimate == 2.0
        assert report.analytic_conditional_s == report.analytic_unconditional_s == 2.0

    def test_never_detected_is_undefined(self):
        report = chsh_blockwise(deterministic_chsh((1, 1, 1, 1), detect=0.0), n_per_block=1000, seed=1)
        assert report.s_estimate is None and report.analytic_conditional_s is None
        assert "undefined" in report.table()

    def test_synthesized_model(self):
        model = synthesize_chsh(ChshTarget(quantum_chsh_correlations(), 0.5)).model
        report = chsh_blockwise(model, n_per_block=10**5, seed=3)
        assert report.analytic_conditional_s == pytest.approx(2 * math.sqrt(2), abs=1e-9)
        assert abs(report.s_estimate - 2 * math.sqrt(2)) <= 5 * report.s_standard_error
        assert report.analytic_unconditional_s <= 2 + 1e-12

    def test_fresh_disjoint_blocks(self):
        report = chsh_blockwise(deterministic_chsh((1, -1, 1, 1)), n_per_block=2000, seed=2)
        ranges = [range(b.first_id, b.first_id + b.size) for b in report.blocks]
        for r1, r2 in itertools.combinations(ranges, 2):
            assert not set(r1) & set(r2)

    def test_deterministic(self):
        model = synthesize_chsh(ChshTarget(quantum_chsh_correlations(), 0.5)).model
        a = chsh_blockwise(model, n_per_block=5000, seed=9).as_dict()
        b = chsh_blockwise(model, n_per_block=5000, seed=9).as_dict()
        assert a == b
        assert a != chsh_blockwise(model, n_per_block=5000, seed=10).as_dict()

    def test_custom_labels(self):
        labels = ("a", "a'", "b", "b'")
        report = chsh_blockwise(deterministic_chsh((1, 1, 1, -1), labels=labels), settings=labels, n_per_block=1000)
        assert report.s_estimate == 2.0
        assert report.analytic_conditional_s == 2.0

    def test_small_block(self):
        with pytest.raises(InvalidInput):
            chsh_blockwise(deterministic_chsh((1, 1, 1, 1)), n_per_block=999)

    def test_missing_observable(self):
        with pytest.raises(NotFound):
            chsh_blockwise(deterministic_chsh((1, 1, 1, 1)), settings=("A1", "A2", "B1", "Q"), n_per_block=1000)


def brute_force_ks(system):
    # independent oracle: plain itertools over assignments
    best, satisfying = None, 0
    for values in itertools.product((1, -1), repeat=len(system.observables)):
        a = dict(zip(system.observables, values))
        v = sum(1 for c in system.contexts if math.prod(a[m] for m in c.members) != c.target)
        satisfying += v == 0
        best = v if best is None else min(best, v)
    return satisfying, best


class TestKSSearch:
    def test_peres_mermin(self):
        r = ks_global_search(peres_mermin())
        assert len(r.satisfying) == 0
        assert r.min_violations == 1
        assert len(peres_mermin().violations(r.witness)) == 1

    def test_all_plus_one_targets(self):
        pm = peres_mermin()
        flipped = KSSystem(pm.observables, tuple(Context(c.members, 1) for c in pm.contexts))
        r = ks_global_search(flipped)
        assert r.min_violations == 0
        assert {o: 1 for o in pm.observables} in r.satisfying

    def test_single_observable(self):
        r = ks_global_search(KSSystem(("A",), (Context(("A",), -1),)))
        assert r.satisfying == ({"A": -1},)

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 7))
            obs = tuple(f"o{k}" for k in range(n))
            contexts = []
            for _ in range(int(rng.integers(1, 5))):
                size = int(rng.integers(1, n + 1))
                members = tuple(rng.choice(obs, size=size, replace=False).tolist())
                contexts.append(Context(members, int(rng.choice([1, -1]))))
            system = KSSystem(obs, tuple(contexts))
            r = ks_global_search(system)
            assert (len(r.satisfying), r.min_violations) == brute_force_ks(system)

    def test_too_large(self):
        obs = tuple(f"o{k}" for k in range(25))
        with pytest.raises(TooLarge):
            ks_global_search(KSSystem(obs, (Context(obs[:2], 1),)))

    @pytest.mark.parametrize(
        "obs, contexts",
        [(("A", "A"), ()), (("A",), ((("A", "A"), 1),)), (("A",), ((("A",), 2),)), (("A",), ((("B",), 1),))],
    )
    def test_malformed(self, obs, contexts):
        with pytest.raises(InvalidInput):
            KSSystem(obs, contexts)


class TestKSEvasion:
    def test_satisfiable_system_single_class(self):
        pm = peres_mermin()
        flipped = KSSystem(pm.observables, tuple(Context(c.members, 1) for c in pm.contexts))
        model = ks_evasion_model(flipped)
        assert model.n_classes == 1
        checks = ks_context_check(model, flipped, 1000, 1)
        assert all(c.status == "ok" and c.coincidences == 1000 for c in checks)

    def test_peres_mermin(self):
        pm = peres_mermin()
        model = ks_evasion_model(pm)
        checks = ks_context_check(model, pm, 10**4, 7)
        assert len(checks) == 6
        for c in checks:
            assert c.analytic_coincidence_rate > 0
            assert c.coincidences > 0 and c.violations == 0 and c.status == "ok"

    def test_some_objects_go_undetected(self):
        model = ks_evasion_model(peres_mermin())
        d = np.array([[r.detect for r in c.responses.values()] for c in model.classes])
        assert np.all(d.min(axis=1) == 0.0)

    def test_corrupted_model_is_caught(self):
        pm = peres_mermin()
        model = ks_evasion_model(pm)
        classes = tuple(
            MicroClass(c.weight, {k: Response(1.0, r.value) for k, r in c.responses.items()}) for c in model.classes
        )
        corrupt = MicroModel(classes, model.observables, mode="deterministic")
        checks = ks_context_check(corrupt, pm, 10**4, 7)
        assert sum(c.violations for c in checks) > 0
        assert any(c.status == "violated" for c in checks)

    def test_missing_observables(self):
        model = MicroModel((MicroClass(1.0, {"XI": Response(1.0, 1.0)}),), {"XI": ExtendedObservable("XI", PM)})
        with pytest.raises(InvalidInput):
            ks_context_check(model, peres_mermin(), 1000, 1)
