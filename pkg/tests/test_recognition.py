import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cdl.model import CdlModel, Hyperparams
from cdl.optimizer import fit
from common.errors import ConfigError, DimensionError, NotFittedError
from dataio.planted import generate_planted
from experiment.evaluation import evaluate, evaluate_gzsl, evaluate_zsl
from recognition.recognizer import (
    Candidates,
    Recognizer,
    SimilarityMatrix,
    Space,
    SpaceSelection,
    cosine_similarity,
    fuse,
    predict,
)
from recognition.structure import class_structure, structure_gap


def simple_model(P_s, P_u, n_b=2, m=2):
    P_s = np.asarray(P_s, dtype=float)
    P_u = np.asarray(P_u, dtype=float)
    d, K, L = P_s.shape[0], P_s.shape[1], P_u.shape[1]
    return CdlModel(
        P_s=P_s, P_u=P_u, D_1=np.eye(d, n_b), D_2=np.eye(m, n_b),
        Z_s=np.ones((n_b, K)), Z_u=np.ones((n_b, L)),
        C_s=np.ones((m, K)), C_u=np.ones((m, L)),
        hyperparams=Hyperparams(),
        seen_classes=tuple(f"s{k}" for k in range(K)),
        unseen_classes=tuple(f"u{l}" for l in range(L)),
    )


class TestCosineSimilarity:
    def test_same_vector(self, rng):
        v = rng.standard_normal(5)
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_diagonal(self):
        assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(0.7071, abs=1e-4)

    def test_zero_vector(self):
        assert cosine_similarity([0, 0], [1, 0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            cosine_similarity([1, 0, 0], [1, 0])


class TestSpaceSelection:
    def test_parse_short_form(self):
        assert SpaceSelection.parse("av").spaces == (Space.VISUAL, Space.ALIGNED)

    def test_parse_long_form(self):
        assert SpaceSelection.parse("semantic,visual").label == "vs"
        assert SpaceSelection.parse("v+a+s").label == "vas"
        assert SpaceSelection.parse("aligned").label == "a"

    def test_all_subsets(self):
        labels = [s.label for s in SpaceSelection.all()]
        assert labels == ["v", "a", "s", "va", "vs", "as", "vas"]

    @pytest.mark.parametrize("text", ["", "vv", "x"])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            SpaceSelection.parse(text)


class TestFuse:
    def test_sum(self):
        a = SimilarityMatrix(np.array([[0.2, 0.5]]), ("x", "y"))
        b = SimilarityMatrix(np.array([[0.6, 0.0]]), ("x", "y"))
        fused = fuse([a, b])
        assert_allclose(fused.values, [[0.8, 0.5]])
        assert_array_equal(fused.argmax(), [0])

    def test_registry_mismatch(self):
        a = SimilarityMatrix(np.zeros((1, 2)), ("x", "y"))
        b = SimilarityMatrix(np.zeros((1, 2)), ("y", "x"))
        with pytest.raises(DimensionError):
            fuse([a, b])


class TestRecognizer:
    def test_self_similarity_is_maximal(self, rng):
        P_u = rng.standard_normal((4, 3))
        model = simple_model(rng.standard_normal((4, 2)), P_u)
        for j in range(3):
            sims = Recognizer(model).similarities(P_u[:, [j]], Space.VISUAL)
            assert int(sims.argmax()[0]) == j

    def test_single_candidate(self, rng):
        model = simple_model(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        pred = predict(model, rng.standard_normal((3, 7)), SpaceSelection.parse("v"))
        assert_array_equal(pred, np.zeros(7))

    def test_tie_goes_to_lower_index(self):
        P_u = np.array([[1.0, 1.0], [0.0, 0.0]])
        model = simple_model(np.eye(2), P_u)
        pred = predict(model, np.array([[1.0], [0.5]]), SpaceSelection.parse("v"))
        assert_array_equal(pred, [0])

    def test_both_candidates(self, rng):
        model = simple_model(rng.standard_normal((3, 2)), rng.standard_normal((3, 4)))
        sims = Recognizer(model).similarities(rng.standard_normal((3, 5)), Space.VISUAL, Candidates.BOTH)
        assert sims.shape == (5, 6)
        assert sims.classes == ("s0", "s1", "u0", "u1", "u2", "u3")

    def test_scale_invariance(self, planted):
        recognizer = Recognizer(planted.truth_model())
        X = planted.dataset.X_test_unseen
        selection = SpaceSelection.parse("vas")
        assert_array_equal(recognizer.predict(X, selection), recognizer.predict(7.5 * X, selection))

    def test_semantic_space_uses_decoded_codes(self, planted):
        model = planted.truth_model()
        recognizer = Recognizer(model)
        X = planted.dataset.X_test_unseen[:, :4]
        Z = recognizer.encode(X)
        sims = recognizer.similarities(X, Space.SEMANTIC)
        assert sims.shape == (4, model.n_unseen)
        C_u = model.C_u
        manual = (model.D_2 @ Z).T @ C_u
        manual /= np.linalg.norm(model.D_2 @ Z, axis=0)[:, None] * np.linalg.norm(C_u, axis=0)[None, :]
        assert_allclose(sims.values, manual, atol=1e-12)

    def test_unfitted_model(self):
        with pytest.raises(NotFittedError):
            Recognizer(None)

    def test_empty_matrix(self, rng):
        model = simple_model(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        model.P_u = np.zeros((3, 0))
        with pytest.raises(NotFittedError, match="P_u"):
            Recognizer(model)

    def test_feature_dimension_mismatch(self, rng):
        model = simple_model(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        with pytest.raises(DimensionError):
            Recognizer(model).similarities(rng.standard_normal((4, 2)), Space.VISUAL)

    def test_truth_model_is_perfect_in_visual_space(self, planted):
        report = evaluate_zsl(planted.truth_model(), planted.dataset, [SpaceSelection.parse("v")])
        assert report.results[0].accuracy == 1.0

    def test_fitted_model_recovers_planted_classes(self, planted):
        model = fit(planted.dataset, Hyperparams(max_iters=50))
        report = evaluate_zsl(model, planted.dataset, [SpaceSelection.parse("v"), SpaceSelection.parse("a")])
        assert report.result("v").accuracy >= 0.95
        assert report.result("a").accuracy >= 0.95

    def test_accuracy_degrades_gracefully_with_noise(self):
        selection = SpaceSelection.parse("v")
        means = []
        for noise in (0.0, 0.05, 0.1):
            accuracies = []
            for seed in (7, 8, 9):
                dataset = generate_planted(20, 12, 6, 3, samples_per_class=5, noise=noise, rng_seed=seed).dataset
                model = fit(dataset, Hyperparams(max_iters=50))
                accuracies.append(evaluate_zsl(model, dataset, [selection]).results[0].accuracy)
            means.append(float(np.mean(accuracies)))
        assert means[0] >= 0.95
        assert means[0] >= means[1] >= means[2]


class TestEvaluation:
    def test_zsl_report_lists_every_selection(self, planted):
        report = evaluate(planted.truth_model(), planted.dataset, "zsl", SpaceSelection.all())
        assert [r.spaces for r in report.results] == ["v", "a", "s", "va", "vs", "as", "vas"]
        assert all(r.ts is None and 0.0 <= r.accuracy <= 1.0 for r in report.results)
        assert report.variant == "CDL"

    def test_gzsl_reports_harmonic_mean(self, planted):
        report = evaluate_gzsl(planted.truth_model(), planted.dataset, [SpaceSelection.parse("v")])
        result = report.results[0]
        assert result.accuracy is None
        assert result.tr == 1.0
        if result.ts + result.tr > 0:
            assert result.H == pytest.approx(2 * result.ts * result.tr / (result.ts + result.tr))
        assert set(result.per_class) == set(planted.dataset.unseen_classes)
        assert set(result.per_class_seen) == set(planted.dataset.seen_classes)

    def test_gzsl_needs_seen_test_split(self, planted):
        dataset = planted.dataset.replace(X_test_seen=None, labels_test_seen=None)
        with pytest.raises(ConfigError, match="seen-class test split"):
            evaluate(planted.truth_model(), dataset, "gzsl", [SpaceSelection.parse("v")])

    def test_unknown_mode(self, planted):
        with pytest.raises(ConfigError):
            evaluate(planted.truth_model(), planted.dataset, "fsl", [SpaceSelection.parse("v")])


class TestClassStructure:
    def test_identical_structures(self):
        Z_s = np.eye(2)
        model = CdlModel(
            P_s=np.eye(3, 2), P_u=np.ones((3, 1)), D_1=np.eye(3, 2), D_2=np.eye(2),
            Z_s=Z_s, Z_u=np.ones((2, 1)), C_s=np.eye(2), C_u=np.ones((2, 1)),
            hyperparams=Hyperparams(),
        )
        structure = class_structure(model)
        assert structure.gap_before == pytest.approx(0.0)
        assert structure.gap_after == pytest.approx(0.0)
        assert_allclose(structure.visual, np.eye(2))

    def test_gap(self):
        assert structure_gap(np.eye(2), np.ones((2, 2))) == pytest.approx(np.sqrt(2) / 2)

    def test_gaps_are_measured_against_shared_codes(self):
        # D_1·Z_s = P_s and D_2·Z_s = C_s, but Z_s has its own class structure
        P_s = np.eye(2)
        C_s = np.array([[1.0, 1.0], [0.0, 1.0]])
        Z_s = np.array([[1.0, 0.6], [0.0, 0.8]])
        model = CdlModel(
            P_s=P_s, P_u=np.ones((2, 1)), D_1=P_s @ np.linalg.inv(Z_s), D_2=C_s @ np.linalg.inv(Z_s),
            Z_s=Z_s, Z_u=np.ones((2, 1)), C_s=C_s, C_u=np.ones((2, 1)),
            hyperparams=Hyperparams(),
        )
        structure = class_structure(model)
        assert structure.gap_before == pytest.approx(0.5)
        assert structure.gap_visual == pytest.approx(0.6 * np.sqrt(2) / 2)
        assert structure.gap_semantic == pytest.approx((np.sqrt(0.5) - 0.6) * np.sqrt(2) / 2)
        assert structure.gap_after == pytest.approx(structure.gap_visual)
        assert structure.gap_after != pytest.approx(structure.gap_before)
        assert_allclose(structure.aligned, [[1.0, 0.6], [0.6, 1.0]])

    def test_report_keys(self, planted):
        structure = class_structure(planted.truth_model())
        assert set(structure.to_dict()) == {"gap_before", "gap_after", "gap_visual", "gap_semantic"}
        assert set(structure.matrices()) == {"structure_visual", "structure_semantic", "structure_aligned"}
