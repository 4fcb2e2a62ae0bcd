"""
評価指標
クラスごとのtop-1正解率の平均と、GZSLの ts / tr / 調和平均 H
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.errors import ConfigError, DataError, DimensionError

ZSL = "zsl"
GZSL = "gzsl"


def per_class_top1(pred, truth, classes: Sequence[str]) -> Tuple[float, Dict[str, float]]:
    """
    クラスごとのtop-1正解率とその平均

    truth に現れないクラスは平均から除く。

    Args:
        pred: 予測クラスID
        truth: 正解クラスID（classes のインデックス）
        classes: クラス登録

    Returns:
        (平均正解率, クラス名 -> 正解率)
    """
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if truth.size == 0:
        raise DataError("cannot score an empty label set")
    if pred.shape != truth.shape:
        raise DimensionError(f"{pred.size} predictions for {truth.size} labels", pair="pred/truth")
    if truth.min() < 0 or truth.max() >= len(classes):
        bad = truth[(truth < 0) | (truth >= len(classes))][0]
        raise DataError(f"true label {int(bad)} is not in the class registry")

    per_class = {}
    for k in np.unique(truth):
        mask = truth == k
        per_class[classes[int(k)]] = float(np.mean(pred[mask] == k))
    overall = float(np.mean(list(per_class.values())))
    return overall, per_class


def harmonic_mean(ts: float, tr: float) -> float:
    """
    GZSLの調和平均 H = 2·ts·tr / (ts + tr)（ts + tr = 0 なら0）
    """
    for name, value in (("ts", ts), ("tr", tr)):
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"{name} must lie in [0, 1]", **{name: value})
    if ts + tr == 0.0:
        return 0.0
    return 2.0 * ts * tr / (ts + tr)


@dataclass
class SpaceResult:
    """
    1つの空間の組合せでの評価結果

    ZSLでは accuracy と per_class（見えないクラス）、
    GZSLでは ts / tr / H と per_class（見えないクラス）・per_class_seen を持つ。
    """
    spaces: str
    n_samples: int
    accuracy: Optional[float] = None
    ts: Optional[float] = None
    tr: Optional[float] = None
    H: Optional[float] = None
    per_class: Dict[str, float] = field(default_factory=dict)
    per_class_seen: Dict[str, float] = field(default_factory=dict)

    @property
    def score(self) -> float:
        """順位付けに使う値（ZSLは正解率、GZSLは H）"""
        return self.accuracy if self.accuracy is not None else self.H

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {"spaces": self.spaces, "n_samples": self.n_samples, "per_class": self.per_class}
        if self.accuracy is not None:
            data["accuracy"] = self.accuracy
        else:
            data.update({"ts": self.ts, "tr": self.tr, "H": self.H, "per_class_seen": self.per_class_seen})
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "SpaceResult":
        return cls(
            spaces=data["spaces"], n_samples=int(data["n_samples"]),
            accuracy=data.get("accuracy"), ts=data.get("ts"), tr=data.get("tr"), H=data.get("H"),
            per_class=dict(data.get("per_class", {})), per_class_seen=dict(data.get("per_class_seen", {})),
        )


@dataclass
class EvalReport:
    """評価レポート"""
    mode: str
    dataset: str
    variant: str
    hyperparams: Dict[str, object]
    results: List[SpaceResult] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in (ZSL, GZSL):
            raise ConfigError(f"unknown evaluation mode '{self.mode}'", choices=[ZSL, GZSL])

    def result(self, spaces: str) -> SpaceResult:
        for result in self.results:
            if result.spaces == spaces:
                return result
        raise KeyError(spaces)

    def best(self) -> SpaceResult:
        return max(self.results, key=lambda r: r.score)

    def rows(self) -> List[Dict[str, object]]:
        """表示用の行（クラス別の内訳を除く）"""
        rows = []
        for result in self.results:
            row = {k: v for k, v in result.to_dict().items() if not k.startswith("per_class")}
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, object]:
        return {
            "mode": self.mode,
            "dataset": self.dataset,
            "variant": self.variant,
            "hyperparams": self.hyperparams,
            "results": [result.to_dict() for result in self.results],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "EvalReport":
        return cls(
            mode=data["mode"], dataset=data["dataset"], variant=data["variant"],
            hyperparams=dict(data.get("hyperparams", {})),
            results=[SpaceResult.from_dict(r) for r in data.get("results", [])],
        )
