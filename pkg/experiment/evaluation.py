"""
ZSL / GZSL の評価
空間ごとの類似度を一度だけ求め、空間の組ごとに足し合わせて分類する
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np

from cdl.model import CdlModel
from common.errors import ConfigError
from recognition.metrics import GZSL, ZSL, EvalReport, SpaceResult, harmonic_mean, per_class_top1
from recognition.recognizer import Candidates, Recognizer, SimilarityMatrix, Space, SpaceSelection, fuse

# ログ設定
logger = logging.getLogger(__name__)


def _space_similarities(recognizer: Recognizer, X: np.ndarray, selections: Sequence[SpaceSelection],
                        candidates: Candidates) -> Dict[Space, SimilarityMatrix]:
    needed = [space for space in Space if any(space in s.spaces for s in selections)]
    return {space: recognizer.similarities(X, space, candidates) for space in needed}


def _predict(sims: Dict[Space, SimilarityMatrix], selection: SpaceSelection) -> np.ndarray:
    return fuse([sims[space] for space in selection.spaces]).argmax()


def evaluate_zsl(model: CdlModel, dataset, selections: Sequence[SpaceSelection],
                 dataset_name: Optional[str] = None) -> EvalReport:
    """
    見えないクラスのみを候補としたクラス平均top-1正解率

    Args:
        model: 学習済みモデル
        dataset: 見えないクラスのテスト分割を持つデータセット
        selections: 評価する空間の組

    Returns:
        EvalReport: 組ごとの結果
    """
    if not dataset.has_unseen_test:
        raise ConfigError("evaluation needs an unseen-class test split", dataset=dataset.name)
    recognizer = Recognizer(model)
    names = recognizer.class_names(Candidates.UNSEEN)
    sims = _space_similarities(recognizer, dataset.X_test_unseen, selections, Candidates.UNSEEN)

    report = EvalReport(mode=ZSL, dataset=dataset_name or dataset.name, variant=model.variant.value,
                        hyperparams=model.hyperparams.to_dict())
    for selection in selections:
        accuracy, per_class = per_class_top1(_predict(sims, selection), dataset.labels_test_unseen, names)
        report.results.append(SpaceResult(spaces=selection.label, n_samples=int(dataset.labels_test_unseen.size),
                                          accuracy=accuracy, per_class=per_class))
        logger.info(f"ZSL [{selection.label}] 正解率 {accuracy:.4f}")
    return report


def evaluate_gzsl(model: CdlModel, dataset, selections: Sequence[SpaceSelection],
                  dataset_name: Optional[str] = None) -> EvalReport:
    """
    見える・見えないクラスの両方を候補とした評価（ts, tr, H）

    候補の並びは見えるクラス、続いて見えないクラス。
    ts は見えないクラスのテスト、tr は見えるクラスのテストのクラス平均正解率。
    """
    if not dataset.has_unseen_test:
        raise ConfigError("evaluation needs an unseen-class test split", dataset=dataset.name)
    if not dataset.has_seen_test:
        raise ConfigError("gzsl mode requires a seen-class test split", dataset=dataset.name)
    recognizer = Recognizer(model)
    names = recognizer.class_names(Candidates.BOTH)
    offset = model.n_seen
    sims_unseen = _space_similarities(recognizer, dataset.X_test_unseen, selections, Candidates.BOTH)
    sims_seen = _space_similarities(recognizer, dataset.X_test_seen, selections, Candidates.BOTH)

    report = EvalReport(mode=GZSL, dataset=dataset_name or dataset.name, variant=model.variant.value,
                        hyperparams=model.hyperparams.to_dict())
    for selection in selections:
        ts, per_unseen = per_class_top1(_predict(sims_unseen, selection),
                                        np.asarray(dataset.labels_test_unseen) + offset, names)
        tr, per_seen = per_class_top1(_predict(sims_seen, selection), dataset.labels_test_seen, names)
        H = harmonic_mean(ts, tr)
        report.results.append(SpaceResult(
            spaces=selection.label,
            n_samples=int(dataset.labels_test_unseen.size + dataset.labels_test_seen.size),
            ts=ts, tr=tr, H=H, per_class=per_unseen, per_class_seen=per_seen,
        ))
        logger.info(f"GZSL [{selection.label}] ts {ts:.4f}, tr {tr:.4f}, H {H:.4f}")
    return report


def evaluate(model: CdlModel, dataset, mode: str, selections: Sequence[SpaceSelection],
             dataset_name: Optional[str] = None) -> EvalReport:
    if mode == ZSL:
        return evaluate_zsl(model, dataset, selections, dataset_name)
    if mode == GZSL:
        return evaluate_gzsl(model, dataset, selections, dataset_name)
    raise ConfigError(f"unknown mode '{mode}'", choices=[ZSL, GZSL])
