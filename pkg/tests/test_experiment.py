import json

import pytest

import config
from cdl.model import Hyperparams, Variant
from cdl.optimizer import fit
from common.errors import ConfigError
from experiment.ablation import ABLATION_VARIANTS, AblationResult, planted_datasets, run_ablation
from experiment.evaluation import evaluate_zsl
from experiment.gridsearch import (
    GridPoint,
    GridRow,
    grid_points,
    parse_grid_spec,
    rank_rows,
    run_grid_search,
)
from experiment.run_config import RunConfig, parse_selections
from recognition.recognizer import SpaceSelection


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig().validate()
        assert [s.label for s in cfg.spaces] == ["v", "a", "s", "va", "vs", "as", "vas"]
        assert cfg.resolved_model_dir.name == "model"

    def test_flat_and_nested_hyperparams(self):
        cfg = RunConfig().apply({"lam": 0.1, "hyperparams": {"beta": 10.0}, "variant": "cdl-pr"})
        assert cfg.hyperparams.lam == 0.1
        assert cfg.hyperparams.beta == 10.0
        assert cfg.variant is Variant.CDL_PR

    def test_file_overrides_flags(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"mode": "gzsl", "spaces": "v,va", "lam": 5.0}), encoding="utf-8")
        cfg = RunConfig().apply({"lam": 0.1, "mode": "zsl"}).apply_file(str(path))
        assert cfg.mode == "gzsl"
        assert cfg.hyperparams.lam == 5.0
        assert [s.label for s in cfg.spaces] == ["v", "va"]

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown run config keys"):
            RunConfig().apply({"epochs": 3})

    def test_unknown_nested_hyperparameter(self):
        with pytest.raises(ConfigError, match="unknown hyperparameters"):
            RunConfig().apply({"hyperparams": {"delta": 1.0}})

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            RunConfig().apply({"mode": "fsl"})
        with pytest.raises(ConfigError):
            RunConfig().apply({"gamma": 0.0})
        with pytest.raises(ConfigError):
            RunConfig().apply({"workers": 0})

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            RunConfig().apply_file(str(path))
        with pytest.raises(ConfigError, match="not found"):
            RunConfig().apply_file(str(tmp_path / "absent.json"))

    def test_parse_selections(self):
        assert len(parse_selections("all")) == 7
        assert [s.label for s in parse_selections("va,v,av")] == ["va", "v"]
        with pytest.raises(ConfigError):
            parse_selections("")

    def test_dataset_required(self):
        with pytest.raises(ConfigError, match="--dataset"):
            RunConfig().require_dataset()


class TestGridSpec:
    def test_default_grid(self):
        grid = parse_grid_spec(None)
        assert all(values == config.HYPERPARAM_GRID for values in grid.values())
        assert len(grid_points(grid)) == 625

    def test_partial_spec(self):
        grid = parse_grid_spec("lam=0.1,1;beta=1")
        assert grid["lam"] == [0.1, 1.0]
        assert grid["beta"] == [1.0]
        assert grid["alpha"] == config.HYPERPARAM_GRID
        assert len(grid_points(grid)) == 2 * 5 * 1 * 5

    def test_lambda_is_outer_loop(self):
        points = grid_points({"lam": [1, 2], "alpha": [3], "beta": [4], "gamma": [5, 6]})
        assert [(p.index, p.lam, p.gamma) for p in points] == [(0, 1, 5), (1, 1, 6), (2, 2, 5), (3, 2, 6)]

    @pytest.mark.parametrize("spec", ["delta=1", "lam", "lam=a", "lam="])
    def test_invalid_spec(self, spec):
        with pytest.raises(ConfigError):
            parse_grid_spec(spec)


class TestGridSearch:
    def test_ranking(self):
        rows = [
            GridRow(GridPoint(0, 1, 1, 1, 1), accuracy=0.5),
            GridRow(GridPoint(1, 1, 1, 1, 1), accuracy=None, error="singular system"),
            GridRow(GridPoint(2, 1, 1, 1, 1), accuracy=0.8),
            GridRow(GridPoint(3, 1, 1, 1, 1), accuracy=0.8),
        ]
        assert [r.point.index for r in rank_rows(rows)] == [2, 3, 0, 1]

    def test_single_point_matches_direct_evaluation(self, noisy_planted):
        base = Hyperparams(max_iters=5)
        point = GridPoint(0, lam=0.1, alpha=1.0, beta=1.0, gamma=0.01)
        selection = SpaceSelection.parse("va")
        rows = run_grid_search(noisy_planted.dataset, base, [point], selection=selection, seed=3)

        split = noisy_planted.dataset.validation_split()
        model = fit(split, point.hyperparams(base), rng_seed=3)
        expected = evaluate_zsl(model, split, [selection]).results[0].accuracy
        assert len(rows) == 1
        assert rows[0].accuracy == expected

    def test_full_grid(self, noisy_planted):
        points = grid_points(parse_grid_spec(None))
        rows = run_grid_search(noisy_planted.dataset, Hyperparams(max_iters=1), points, seed=0)
        assert len(rows) == 625
        assert sorted(r.point.index for r in rows) == list(range(625))
        scores = [r.accuracy for r in rows if r.accuracy is not None]
        assert scores == sorted(scores, reverse=True)

    def test_requires_validation_classes(self, noisy_planted):
        dataset = noisy_planted.dataset.replace(validation_classes=())
        with pytest.raises(ConfigError):
            run_grid_search(dataset, Hyperparams(), grid_points(parse_grid_spec("lam=1;alpha=1;beta=1;gamma=1")))


class TestAblation:
    def test_runs_every_variant(self):
        datasets = planted_datasets([0, 1], d=12, m=8, K=4, L=2, samples_per_class=3,
                                    noise=0.05, semantic_noise=0.1)
        result = run_ablation(datasets, Hyperparams(max_iters=5), SpaceSelection.parse("va"))
        assert result.seeds == [0, 1]
        assert set(result.accuracies) == {v.value for v in ABLATION_VARIANTS}
        assert all(len(values) == 2 for values in result.accuracies.values())
        data = result.to_dict()
        assert set(data["ordering"]) == {"CDL>=CDL-Ad", "CDL>=CDL-Pr"}

    def test_ordering(self):
        result = AblationResult(selection="va", seeds=[0], accuracies={
            "CDL": [0.6], "CDL-Ad": [0.5], "CDL-Pr": [0.7],
        })
        assert result.ordering() == {"CDL>=CDL-Ad": True, "CDL>=CDL-Pr": False}
        assert result.mean(Variant.CDL) == 0.6
