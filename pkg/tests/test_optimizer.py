import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cdl.initializer import initial_unseen_codes, initialize, semantic_code
from cdl.model import Hyperparams, Variant, class_means, loss
from cdl.optimizer import STEP_NAMES, CoupledDictionaryLearner, effective_hyperparams, fit
from common.errors import DimensionError, MonotonicityError
from common.linalg_solvers import solve_dictionary, solve_joint_code
from dataio.dataset import Dataset
from dataio.planted import generate_planted


def tiny_dataset(X_s, labels, C_s, C_u):
    X_s = np.asarray(X_s, dtype=float)
    C_s = np.asarray(C_s, dtype=float)
    C_u = np.asarray(C_u, dtype=float)
    return Dataset(
        X_s=X_s, labels_s=np.asarray(labels), C_s=C_s, C_u=C_u,
        seen_classes=tuple(f"s{k}" for k in range(C_s.shape[1])),
        unseen_classes=tuple(f"u{l}" for l in range(C_u.shape[1])),
    ).validate()


def random_dataset(rng, d=6, m=5, K=4, L=2, per_class=3):
    labels = np.repeat(np.arange(K), per_class)
    return tiny_dataset(rng.standard_normal((d, labels.size)), labels,
                        rng.standard_normal((m, K)), rng.standard_normal((m, L)))


class TestInitialUnseenCodes:
    def test_single_identical_prototype(self):
        C = np.array([[0.6], [0.8]])
        assert_allclose(initial_unseen_codes(C, C, n_b=1, rng_seed=0), [[1.0]])

    def test_orthogonal_seen_prototypes(self):
        C_s = np.eye(3)
        C_u = np.array([[0.0], [2.0], [0.0]])
        assert_allclose(initial_unseen_codes(C_s, C_u, n_b=3, rng_seed=0), [[0.0], [1.0], [0.0]])

    def test_zero_semantic_vector(self):
        C_s = np.eye(2)
        C_u = np.zeros((2, 1))
        assert_array_equal(initial_unseen_codes(C_s, C_u, n_b=2, rng_seed=0), np.zeros((2, 1)))

    def test_random_codes_have_unit_columns(self, rng):
        Z_u = initial_unseen_codes(rng.standard_normal((4, 3)), rng.standard_normal((4, 5)), n_b=6, rng_seed=3)
        assert Z_u.shape == (6, 5)
        assert np.all(Z_u >= 0.0)
        assert_allclose(np.linalg.norm(Z_u, axis=0), 1.0)

    def test_random_codes_are_seeded(self, rng):
        C_s, C_u = rng.standard_normal((4, 3)), rng.standard_normal((4, 2))
        assert_array_equal(initial_unseen_codes(C_s, C_u, 5, 9), initial_unseen_codes(C_s, C_u, 5, 9))


class TestInitialize:
    def test_single_class_symmetry(self):
        C = [[0.6], [0.8]]
        dataset = tiny_dataset([[0.3, 0.1], [0.2, 0.0]], [0, 0], C, C)
        model = initialize(dataset, Hyperparams())
        assert_allclose(model.Z_u, [[1.0]])
        assert_allclose(model.P_u, model.P_s, atol=1e-8)

    def test_orthogonal_prototypes_copy_seen_class(self):
        C_s = np.eye(3)
        C_u = np.array([[0.0], [0.0], [1.0]])
        X_s = 0.1 * np.eye(3)
        dataset = tiny_dataset(X_s, [0, 1, 2], C_s, C_u)
        model = initialize(dataset, Hyperparams())
        assert_allclose(model.Z_u[:, 0], [0.0, 0.0, 1.0])
        assert_allclose(model.P_u[:, 0], model.P_s[:, 2], atol=1e-8)

    def test_compositional_oracle(self, rng):
        dataset = random_dataset(rng)
        hp = Hyperparams()
        model = initialize(dataset, hp)

        Z_u = initial_unseen_codes(dataset.C_s, dataset.C_u, dataset.n_seen, 0)
        D_2 = solve_dictionary([(dataset.C_u, Z_u, 1.0)]).dictionary
        Z_s = solve_joint_code(np.zeros((1, 4)), D_2, np.zeros((1, 4)), dataset.C_s, 1.0, hp.ridge_eps)
        P_s = class_means(dataset.X_s, dataset.labels_s, 4)
        D_1 = solve_dictionary([(P_s, Z_s, 1.0)]).dictionary

        assert_allclose(model.Z_u, Z_u)
        assert_allclose(model.D_2, D_2)
        assert_allclose(model.Z_s, Z_s)
        assert_allclose(model.P_s, P_s)
        assert_allclose(model.D_1, D_1)
        assert_allclose(model.P_u, D_1 @ Z_u)

    def test_semantic_code_fits_semantic_term_only(self, rng):
        D_2 = rng.standard_normal((6, 3))
        C = rng.standard_normal((6, 2))
        expected = np.linalg.lstsq(D_2, C, rcond=None)[0]
        assert_allclose(semantic_code(D_2, C, 0.0), expected, atol=1e-10)

    def test_initial_trace(self, rng):
        dataset = random_dataset(rng)
        model = initialize(dataset, Hyperparams())
        assert model.variant is Variant.NA
        assert model.trace.iterations_run == 0
        assert model.trace.initial.total == pytest.approx(loss(model, dataset.X_s, dataset.H).total)

    def test_dictionaries_are_feasible(self, rng):
        model = initialize(random_dataset(rng), Hyperparams(n_b=6))
        assert model.n_bases == 6
        model.check_consistency()


class TestCoupledDictionaryLearner:
    def test_loss_never_increases(self, noisy_planted, fast_hp):
        model = fit(noisy_planted.dataset, fast_hp)
        totals = [model.trace.initial.total] + model.trace.totals()
        assert all(b <= a + 1e-8 * max(abs(a), 1.0) + 1e-9 for a, b in zip(totals, totals[1:]))
        for record in model.trace.records:
            assert set(record.step_losses) == set(STEP_NAMES)

    def test_single_iteration(self, noisy_planted):
        model = fit(noisy_planted.dataset, Hyperparams(max_iters=1))
        assert model.trace.iterations_run == 1
        assert model.trace.records[0].iteration == 1

    def test_na_returns_initialization(self, noisy_planted):
        hp = Hyperparams()
        initial = initialize(noisy_planted.dataset, hp)
        model = fit(noisy_planted.dataset, hp, variant=Variant.NA)
        assert model.variant is Variant.NA
        assert model.trace.iterations_run == 0
        for name, matrix in initial.matrices().items():
            assert_array_equal(getattr(model, name), matrix)

    def test_deterministic(self, noisy_planted, fast_hp):
        a = fit(noisy_planted.dataset, fast_hp, rng_seed=5)
        b = fit(noisy_planted.dataset, fast_hp, rng_seed=5)
        for name, matrix in a.matrices().items():
            assert_array_equal(getattr(b, name), matrix)
        assert a.trace.totals() == b.trace.totals()

    def test_planted_fixed_point(self, planted):
        model = fit(planted.dataset, Hyperparams(), initial_model=planted.truth_model())
        assert model.trace.final_total <= 1e-6

    def test_planted_fit_improves_on_initialization(self, planted):
        model = fit(planted.dataset, Hyperparams(max_iters=50))
        assert model.trace.final_total <= model.trace.initial.total
        model.check_consistency()

    def test_large_beta_pins_class_means(self, rng):
        dataset = random_dataset(rng, d=3, m=3, K=3, L=3, per_class=2)
        model = fit(dataset, Hyperparams(beta=1e6, max_iters=5))
        assert_allclose(model.P_s, class_means(dataset.X_s, dataset.labels_s, 3), atol=1e-3)

    def test_prototype_variant_keeps_class_means(self, noisy_planted, fast_hp):
        dataset = noisy_planted.dataset
        model = fit(dataset, fast_hp, variant=Variant.CDL_PR)
        assert_allclose(model.P_s, class_means(dataset.X_s, dataset.labels_s, dataset.n_seen))
        assert "seen_prototypes" not in model.trace.records[0].step_losses

    def test_adaptation_variant(self, noisy_planted, fast_hp):
        model = fit(noisy_planted.dataset, fast_hp, variant=Variant.CDL_AD)
        assert model.hyperparams.alpha == 0.0
        steps = model.trace.records[0].step_losses
        assert "unseen_codes" not in steps and "unseen_prototypes" not in steps
        assert_allclose(model.Z_u, semantic_code(model.D_2, model.C_u, model.hyperparams.ridge_eps))
        assert_allclose(model.P_u, model.D_1 @ model.Z_u)

    def test_both_ablations(self, noisy_planted, fast_hp):
        model = fit(noisy_planted.dataset, fast_hp, variant=Variant.CDL_AD_PR)
        assert set(model.trace.records[0].step_losses) == {"seen_codes", "visual_dictionary", "semantic_dictionary"}

    def test_effective_hyperparams(self):
        hp = Hyperparams(alpha=2.0)
        assert effective_hyperparams(hp, Variant.CDL).alpha == 2.0
        assert effective_hyperparams(hp, Variant.CDL_AD_PR).alpha == 0.0

    def test_initial_model_must_match_dataset(self, planted, noisy_planted):
        with pytest.raises(DimensionError):
            fit(noisy_planted.dataset, Hyperparams(), initial_model=planted.truth_model())

    def test_monotonicity_violation_is_reported(self, noisy_planted, fast_hp, monkeypatch):
        learner = CoupledDictionaryLearner(noisy_planted.dataset, fast_hp)

        def worsen():
            learner.P_u = learner.P_u + 10.0
            return 0.0

        monkeypatch.setattr(learner, "update_unseen_prototypes", worsen)
        with pytest.raises(MonotonicityError, match="unseen_prototypes") as info:
            learner.fit()
        assert info.value.details["iteration"] == 1

    @pytest.mark.parametrize("seed", range(20))
    def test_monotone_on_random_data(self, seed):
        dataset = random_dataset(np.random.default_rng(seed))
        model = fit(dataset, Hyperparams())
        for record in model.trace.records:
            values = [record.step_losses[name] for name in STEP_NAMES]
            assert all(b <= a + 1e-8 * max(abs(a), 1.0) + 1e-9 for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("seed", range(20))
    def test_converges_on_dictionary_consistent_data(self, seed):
        sizes = np.random.default_rng(1000 + seed)
        K = int(sizes.integers(5, 11))
        L = int(sizes.integers(1, 6))
        m = int(sizes.integers(K, 33))
        d = int(sizes.integers(8, 33))
        dataset = generate_planted(d, m, K, L, samples_per_class=4, noise=0.1, rng_seed=seed).dataset
        model = fit(dataset, Hyperparams(max_iters=100, rel_tol=1e-7))
        assert model.trace.converged, f"not converged after {model.trace.iterations_run} iterations"
        assert model.trace.iterations_run <= 100

    def test_non_strict_mode_only_warns(self, noisy_planted, monkeypatch, caplog):
        learner = CoupledDictionaryLearner(noisy_planted.dataset, Hyperparams(max_iters=2), strict=False)

        def worsen():
            learner.P_u = learner.P_u + 10.0
            return 0.0

        monkeypatch.setattr(learner, "update_unseen_prototypes", worsen)
        model = learner.fit()
        assert model.trace.iterations_run >= 1
        assert any("unseen_prototypes" in record.message for record in caplog.records)
