"""
コマンドの実装
cli.py から呼ばれ、データの読み込み・学習・評価・書き出しをまとめて行う
"""
import csv
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence

import config
from cdl.optimizer import CoupledDictionaryLearner
from common.errors import ConfigError, DimensionError
from dataio.dataset import Dataset, load_dataset, save_dataset
from dataio.model_store import load_model, save_model
from dataio.planted import generate_planted
from dataio.report import TRACE_FILE, export_report, write_trace_csv
from dataio.xlsa_import import convert_xlsa
from experiment.ablation import planted_datasets, run_ablation
from experiment.evaluation import evaluate
from experiment.gridsearch import grid_points, parse_grid_spec, run_grid_search
from experiment.run_config import RunConfig
from recognition.recognizer import Candidates, Recognizer
from recognition.structure import class_structure

# ログ設定
logger = logging.getLogger(__name__)

RUN_CONFIG_FILE = "run_config.json"
GRID_TABLE_FILE = "gridsearch.csv"
GRID_JSON_FILE = "gridsearch.json"
ABLATION_FILE = "ablation.json"


@dataclass
class SynthParams:
    """合成データ生成の設定"""
    output: str
    d: int = 20
    m: int = 12
    K: int = 8
    L: int = 4
    samples_per_class: int = 10
    test_samples_per_class: Optional[int] = None
    noise: float = 0.0
    semantic_noise: float = 0.0
    n_validation: Optional[int] = None
    seed: int = config.DEFAULT_SEED
    binary: bool = False


def _write_json(path: Path, data: Dict[str, object]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _load(cfg: RunConfig, normalize: Optional[bool] = None) -> Dataset:
    dataset = load_dataset(cfg.require_dataset())
    if cfg.normalize if normalize is None else normalize:
        logger.info("特徴量を列ごとにL2正規化します")
        dataset = dataset.normalized()
    return dataset


def cmd_train(cfg: RunConfig) -> Path:
    """
    学習してモデルと損失の履歴を保存する

    Returns:
        Path: モデルディレクトリ
    """
    dataset = _load(cfg)
    learner = CoupledDictionaryLearner(dataset, cfg.hyperparams, variant=cfg.variant,
                                       rng_seed=cfg.seed, strict=cfg.strict)
    model = learner.fit()
    model_dir = cfg.resolved_model_dir
    save_model(model, model_dir)
    write_trace_csv(model.trace, model_dir / TRACE_FILE)
    _write_json(model_dir / RUN_CONFIG_FILE, cfg.to_dict())
    return model_dir


def cmd_eval(cfg: RunConfig) -> Path:
    """
    保存済みモデルを評価してレポートを書き出す

    学習時に特徴量を正規化したモデルは評価時も同じ処理を適用する。

    Returns:
        Path: report.json のパス
    """
    model_dir = cfg.resolved_model_dir
    model = load_model(model_dir)
    trained_with = model_dir / RUN_CONFIG_FILE
    normalize = cfg.normalize
    if trained_with.is_file():
        normalize = normalize or bool(json.loads(trained_with.read_text(encoding="utf-8")).get("normalize"))
    dataset = _load(cfg, normalize)
    cfg.check_dataset(dataset)
    _check_model_matches(model, dataset)

    report = evaluate(model, dataset, cfg.mode, cfg.spaces)
    structure = class_structure(model)
    matrices = None
    if cfg.export_matrices or cfg.heatmaps:
        matrices = dict(model.matrices())
        matrices.update(structure.matrices())
        candidates = Candidates.BOTH if cfg.mode == "gzsl" else Candidates.UNSEEN
        sims = Recognizer(model).fused_similarities(dataset.X_test_unseen, cfg.selection, candidates)
        matrices[f"similarity_{cfg.selection.label}"] = sims.values
    return export_report(
        report, model.trace, Path(cfg.output_dir) / f"eval_{cfg.mode}",
        matrices=matrices, heatmaps=cfg.heatmaps,
        extra={"structure": structure.to_dict(), "dataset": dataset.summary(), "seed": cfg.seed,
               "normalize": bool(normalize)},
        timestamps=cfg.timestamps,
    )


def _check_model_matches(model, dataset: Dataset) -> None:
    if model.D_1.shape[0] != dataset.n_features:
        raise DimensionError(f"model expects {model.D_1.shape[0]} features, dataset has {dataset.n_features}",
                             pair="model/dataset")
    if model.unseen_classes and tuple(model.unseen_classes) != tuple(dataset.unseen_classes):
        raise DimensionError("model and dataset list different unseen classes", pair="model/dataset")
    if model.seen_classes and tuple(model.seen_classes) != tuple(dataset.seen_classes):
        raise DimensionError("model and dataset list different seen classes", pair="model/dataset")


def cmd_gridsearch(cfg: RunConfig, grid_spec: Optional[str] = None) -> Path:
    """
    検証分割でグリッドサーチを行い、最良の点で全ての見えるクラスを使って学習し直す

    Returns:
        Path: 順位表（CSV）のパス
    """
    dataset = _load(cfg)
    points = grid_points(parse_grid_spec(grid_spec))
    rows = run_grid_search(dataset, cfg.hyperparams, points, variant=cfg.variant,
                           selection=cfg.selection, seed=cfg.seed, workers=cfg.workers)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / GRID_TABLE_FILE
    with open(table_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        columns = ["rank", "index", "lam", "alpha", "beta", "gamma", "accuracy", "iterations", "converged", "error"]
        writer.writerow(columns)
        for rank, row in enumerate(rows, start=1):
            data = row.to_dict()
            writer.writerow([rank] + ["" if data[c] is None else data[c] for c in columns[1:]])
    _write_json(out / GRID_JSON_FILE, {
        "selection": cfg.selection.label,
        "variant": cfg.variant.value,
        "seed": cfg.seed,
        "rows": [row.to_dict() for row in rows],
    })
    logger.info(f"順位表を書き出しました: {table_path}")

    best = rows[0]
    retrain = dataclasses.replace(cfg, hyperparams=best.point.hyperparams(cfg.hyperparams),
                                  model_dir=str(out / "model"))
    model = CoupledDictionaryLearner(dataset, retrain.hyperparams, variant=cfg.variant,
                                     rng_seed=cfg.seed, strict=cfg.strict).fit()
    save_model(model, retrain.resolved_model_dir)
    write_trace_csv(model.trace, retrain.resolved_model_dir / TRACE_FILE)
    _write_json(retrain.resolved_model_dir / RUN_CONFIG_FILE, retrain.to_dict())
    return table_path


def cmd_ablate(cfg: RunConfig, seeds: Sequence[int], synth: Optional[SynthParams] = None) -> Path:
    """
    サブモデルを比較する

    --dataset を指定した場合はそのデータセットで、指定しない場合はシードごとの合成データで比較する。

    Returns:
        Path: ablation.json のパス
    """
    if cfg.dataset:
        datasets = [(cfg.seed, _load(cfg))]
    else:
        synth = synth or SynthParams(output=cfg.output_dir)
        datasets = planted_datasets(seeds, synth.d, synth.m, synth.K, synth.L, synth.samples_per_class,
                                    synth.noise, synth.semantic_noise)
    result = run_ablation(datasets, cfg.hyperparams, cfg.selection)
    data = result.to_dict()
    data["hyperparams"] = cfg.hyperparams.to_dict()
    return _write_json(Path(cfg.output_dir) / ABLATION_FILE, data)


def cmd_synth(params: SynthParams) -> Path:
    """
    合成データを生成してマニフェスト形式で保存する

    Returns:
        Path: マニフェストのパス
    """
    instance = generate_planted(
        params.d, params.m, params.K, params.L, params.samples_per_class, params.noise, params.seed,
        test_samples_per_class=params.test_samples_per_class,
        semantic_noise=params.semantic_noise,
        n_validation=params.n_validation,
    )
    manifest = save_dataset(instance.dataset, params.output, binary=params.binary)
    truth_dir = Path(params.output) / "truth"
    save_model(instance.truth_model(), truth_dir)
    logger.info(f"合成データを保存しました: {manifest}（正解モデル: {truth_dir}）")
    return manifest


def cmd_validate_data(cfg: RunConfig) -> Dict[str, object]:
    """データセットを読み込んで不変条件を確認し、要約を返す"""
    dataset = load_dataset(cfg.require_dataset())
    summary = dataset.summary()
    if dataset.validation_classes:
        split = dataset.validation_split()
        summary["validation_split"] = {"train_classes": split.n_seen,
                                       "validation_samples": int(split.X_test_unseen.shape[1])}
    if cfg.mode == "gzsl" and not dataset.has_seen_test:
        raise ConfigError("gzsl mode requires a seen-class test split", dataset=dataset.name)
    return summary


def cmd_import_xlsa(archive_dir: str, output_dir: str, name: Optional[str] = None, binary: bool = True) -> Path:
    """公開分割を変換する"""
    return convert_xlsa(archive_dir, output_dir, name=name, binary=binary)