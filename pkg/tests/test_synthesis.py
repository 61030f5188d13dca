import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from objectiveqm.errors import Infeasible, InvalidInput, NoThreshold
from objectiveqm.micro_model import MacroProperty, state_breakdown, validate_model
from objectiveqm.presets import chsh_value, quantum_chsh_correlations
from objectiveqm.quantum import (
    DensityState,
    OutcomeSet,
    born_probability,
    random_density_state,
    random_observable,
    spin_observable,
)
from objectiveqm.synthesis import (
    SIDE_A,
    SIDE_B,
    ChshTarget,
    _chsh_problem,
    chsh_tables,
    check_product_model,
    enumerate_joint_strategies,
    eta_threshold,
    synthesize_chsh,
    synthesize_product,
)

Z = spin_observable((0.0, 0.0, 1.0), "z")
X = spin_observable((1.0, 0.0, 0.0), "x")
TSIRELSON = 2 * np.sqrt(2)


def classical_table(sa, sb):
    return np.array([[sa[a] * sb[b] for b in (0, 1)] for a in (0, 1)], dtype=float)


class TestProduct:
    def test_eigenstate(self):
        m = synthesize_product(DensityState(np.diag([1.0, 0.0])), [Z], 1.0)
        assert m.n_classes == 1
        assert m.classes[0].responses["z"].value == 1.0
        assert m.mode == "deterministic"

    def test_mixed_with_partial_detection(self):
        m = synthesize_product(DensityState(np.diag([0.5, 0.5])), [Z], 0.7)
        assert sorted(m.weights) == [0.5, 0.5]
        b = state_breakdown(m, MacroProperty.of("z", [1.0]))
        assert b.conditional == pytest.approx(0.5, abs=1e-15)
        assert b.detect == pytest.approx(0.7, abs=1e-15)

    def test_two_observables_marginals(self, rng):
        rho = random_density_state(2, rng)
        m = synthesize_product(rho, [Z, X], 1.0)
        assert m.n_classes == 4
        for obs in (Z, X):
            for v in (1.0, -1.0):
                brute = sum(c.weight for c in m.classes if c.responses[obs.label].value == v)
                assert brute == pytest.approx(born_probability(rho, obs, OutcomeSet({v})), abs=1e-12)

    def test_zero_weight_tuples_dropped(self):
        m = synthesize_product(DensityState(np.diag([1.0, 0.0])), [Z, spin_observable((0, 0, -1.0), "mz")])
        assert m.n_classes == 1

    def test_every_subset_exact(self, rng):
        for _ in range(30):
            dim = int(rng.choice([2, 3, 4]))
            rho = random_density_state(dim, rng)
            obs = [random_observable(dim, rng, label=f"o{k}") for k in range(int(rng.integers(1, 3)))]
            m = synthesize_product(rho, obs, float(rng.uniform(0.1, 1.0)))
            assert not validate_model(m)
            assert check_product_model(m, 1e-12)

    @pytest.mark.parametrize("d", [0.0, -0.1, 1.5])
    def test_bad_detection(self, d):
        with pytest.raises(InvalidInput):
            synthesize_product(DensityState(np.diag([1.0, 0.0])), [Z], d)


class TestStrategies:
    def test_counts(self):
        assert len(enumerate_joint_strategies(SIDE_A, SIDE_B)) == 81
        assert len(enumerate_joint_strategies(["a"], ["b"])) == 9

    def test_total_on_settings(self):
        for sa, sb in enumerate_joint_strategies(SIDE_A, SIDE_B):
            assert set(sa) == set(SIDE_A) and set(sb) == set(SIDE_B)
            assert set(sa.values()) | set(sb.values()) <= {1.0, -1.0, None}

    def test_all_distinct(self):
        pairs = enumerate_joint_strategies(SIDE_A, SIDE_B)
        keys = {(tuple(sa.values()), tuple(sb.values())) for sa, sb in pairs}
        assert len(keys) == 81

    def test_empty_side(self):
        with pytest.raises(InvalidInput):
            enumerate_joint_strategies([], ["b"])


class TestChsh:
    def test_classical_targets_full_detection(self):
        for sa in itertools.product((1, -1), repeat=2):
            for sb in itertools.product((1, -1), repeat=2):
                target = classical_table(sa, sb)
                result = synthesize_chsh(ChshTarget(target, 1.0))
                np.testing.assert_allclose(result.conditional, target, atol=1e-9)
                np.testing.assert_allclose(result.unconditional, target, atol=1e-9)

    def test_singlet_full_detection_is_infeasible(self):
        with pytest.raises(Infeasible):
            synthesize_chsh(ChshTarget(quantum_chsh_correlations(), 1.0))

    def test_singlet_half_detection(self):
        target = quantum_chsh_correlations()
        result = synthesize_chsh(ChshTarget(target, 0.5))
        assert not validate_model(result.model)
        assert result.conditional_s == pytest.approx(TSIRELSON, abs=1e-9)
        assert result.unconditional_s <= 2 + 1e-12
        cond, uncond = chsh_tables(result.model)
        np.testing.assert_allclose(cond, target, atol=1e-9)

    def test_detection_rates_are_eta(self):
        from objectiveqm.micro_model import MacroProperty

        model = synthesize_chsh(ChshTarget(quantum_chsh_correlations(), 0.6)).model
        for label in SIDE_A + SIDE_B:
            detect = state_breakdown(model, MacroProperty.of(label, [1.0, -1.0])).detect
            assert detect == pytest.approx(0.6, abs=1e-9)

    def test_random_local_mixtures_round_trip(self, rng):
        # any mixture of detecting local strategies lies inside the local polytope
        pairs = [(sa, sb) for sa in itertools.product((1, -1), repeat=2) for sb in itertools.product((1, -1), repeat=2)]
        for _ in range(20):
            w = rng.dirichlet(np.ones(len(pairs)))
            target = sum(wk * classical_table(*p) for wk, p in zip(w, pairs))
            result = synthesize_chsh(ChshTarget(target, 1.0))
            np.testing.assert_allclose(result.conditional, target, atol=1e-9)
            assert result.unconditional_s <= 2 + 1e-12

    @pytest.mark.parametrize("eta", [0.0, 1.1])
    def test_bad_eta(self, eta):
        with pytest.raises(InvalidInput):
            ChshTarget(np.zeros((2, 2)), eta)

    def test_bad_correlations(self):
        with pytest.raises(InvalidInput):
            ChshTarget(np.full((2, 2), 1.5))


def scipy_feasible(correlations, eta):
    problem = _chsh_problem(ChshTarget(correlations, eta), enumerate_joint_strategies(SIDE_A, SIDE_B))
    n = problem.n_variables
    return linprog(np.zeros(n), A_eq=problem.a_eq, b_eq=problem.b_eq, bounds=(0, None), method="highs").status == 0


class TestThreshold:
    def test_classical_is_one(self):
        r = eta_threshold(classical_table((1, -1), (1, 1)))
        assert r.eta == 1.0 and r.n_bisection_solves == 0

    def test_singlet(self):
        r = eta_threshold(quantum_chsh_correlations(), 0.005)
        assert 0.82 <= r.eta <= 0.84
        assert abs(r.eta - 2 / (1 + np.sqrt(2))) <= 0.005
        assert r.n_bisection_solves <= 8

    def test_scipy_cross_check(self):
        target = quantum_chsh_correlations()
        assert scipy_feasible(target, 0.82)
        assert not scipy_feasible(target, 0.84)
        assert scipy_feasible(target, 0.5)
        assert not scipy_feasible(target, 1.0)

    def test_probes_are_monotone(self):
        r = eta_threshold(quantum_chsh_correlations(), 0.01)
        feasible = [e for e, ok in r.probes if ok]
        infeasible = [e for e, ok in r.probes if not ok]
        assert max(feasible) < min(infeasible)

    def test_pr_box(self):
        # the maximally nonlocal box needs eta <= 2/3
        pr_box = np.array([[1.0, 1.0], [1.0, -1.0]])
        assert abs(eta_threshold(pr_box, 0.005).eta - 2 / 3) <= 0.005

    def test_no_threshold(self, monkeypatch):
        import objectiveqm.synthesis as synthesis

        monkeypatch.setattr(synthesis, "chsh_feasible", lambda correlations, eta: False)
        with pytest.raises(NoThreshold):
            eta_threshold(quantum_chsh_correlations(), 0.05)

    @pytest.mark.parametrize("tol", [1e-5, 0.1, 0.5])
    def test_bad_tol(self, tol):
        with pytest.raises(InvalidInput):
            eta_threshold(quantum_chsh_correlations(), tol)


def test_chsh_value_formula():
    assert chsh_value(np.array([[1, 1], [1, -1]])) == 4
    assert chsh_value(quantum_chsh_correlations()) == pytest.approx(TSIRELSON, abs=1e-12)
