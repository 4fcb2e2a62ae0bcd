"""
アブレーション
NA / CDL / CDL-Ad / CDL-Pr / CDL-Ad-Pr を同じデータで学習し、ZSL正解率を比較する
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from cdl.model import Hyperparams, Variant
from cdl.optimizer import fit
from dataio.planted import generate_planted
from experiment.evaluation import evaluate_zsl
from recognition.recognizer import SpaceSelection

# ログ設定
logger = logging.getLogger(__name__)

ABLATION_VARIANTS = (Variant.NA, Variant.CDL, Variant.CDL_AD, Variant.CDL_PR, Variant.CDL_AD_PR)
# (比較の名前, 上位であるべきサブモデル, 下位のサブモデル)
EXPECTED_ORDERING = (
    ("CDL>=CDL-Ad", Variant.CDL, Variant.CDL_AD),
    ("CDL>=CDL-Pr", Variant.CDL, Variant.CDL_PR),
)


@dataclass
class AblationResult:
    """サブモデルごと・シードごとの正解率"""
    selection: str
    seeds: List[int] = field(default_factory=list)
    accuracies: Dict[str, List[float]] = field(default_factory=dict)

    def mean(self, variant: Variant) -> float:
        return float(np.mean(self.accuracies[variant.value]))

    def ordering(self) -> Dict[str, bool]:
        """平均正解率で期待される順序が成り立つか"""
        return {name: self.mean(upper) >= self.mean(lower) for name, upper, lower in EXPECTED_ORDERING}

    def to_dict(self) -> Dict[str, object]:
        return {
            "selection": self.selection,
            "seeds": self.seeds,
            "accuracies": self.accuracies,
            "mean": {name: float(np.mean(values)) for name, values in self.accuracies.items()},
            "ordering": self.ordering(),
        }


def run_ablation(datasets: Sequence[Tuple[int, object]], hp: Hyperparams, selection: SpaceSelection,
                 variants: Sequence[Variant] = ABLATION_VARIANTS) -> AblationResult:
    """
    各データセットで全サブモデルを学習・評価する

    Args:
        datasets: (シード, データセット) の列
        hp: ハイパーパラメータ
        selection: 評価に使う空間の組
        variants: 比較するサブモデル

    Returns:
        AblationResult: 結果（順序が成り立たない場合も返し、警告を出す）
    """
    result = AblationResult(selection=selection.label, accuracies={v.value: [] for v in variants})
    for seed, dataset in datasets:
        result.seeds.append(int(seed))
        for variant in variants:
            model = fit(dataset, hp, variant=variant, rng_seed=seed)
            accuracy = evaluate_zsl(model, dataset, [selection]).results[0].accuracy
            result.accuracies[variant.value].append(accuracy)
            logger.info(f"シード {seed} {variant.value}: 正解率 {accuracy:.4f}")

    if all(upper.value in result.accuracies and lower.value in result.accuracies
           for _, upper, lower in EXPECTED_ORDERING):
        for name, holds in result.ordering().items():
            if not holds:
                logger.warning(f"期待される順序 {name} が平均正解率で成り立ちませんでした")
    return result


def planted_datasets(seeds: Sequence[int], d: int, m: int, K: int, L: int, samples_per_class: int,
                     noise: float, semantic_noise: float) -> List[Tuple[int, object]]:
    """シードごとに合成データを作る（意味ベクトルの雑音で構造の不一致を注入する）"""
    return [(seed, generate_planted(d, m, K, L, samples_per_class, noise, seed,
                                    semantic_noise=semantic_noise).dataset)
            for seed in seeds]
