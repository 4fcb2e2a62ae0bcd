"""
クラス構造の分析
見えるクラスのプロトタイプ間のコサイン類似度行列を各空間で求め、
視覚空間・意味空間の構造と共有コード空間の構造のずれを数値で比較する
"""
from dataclasses import dataclass
from typing import Dict

import numpy as np

from cdl.model import CdlModel
from common.matrix import cosine_similarity_matrix


@dataclass(eq=False)
class ClassStructure:
    """
    クラス構造の比較結果

    Attributes:
        visual: P_s のクラス間類似度
        semantic: C_s のクラス間類似度
        aligned: Z_s のクラス間類似度（視覚・意味で共有するコード）
        gap_before: ‖S(P_s) − S(C_s)‖_F / K
        gap_visual: ‖S(P_s) − S(Z_s)‖_F / K
        gap_semantic: ‖S(C_s) − S(Z_s)‖_F / K
        gap_after: max(gap_visual, gap_semantic)
    """
    visual: np.ndarray
    semantic: np.ndarray
    aligned: np.ndarray
    gap_before: float
    gap_visual: float
    gap_semantic: float

    @property
    def gap_after(self) -> float:
        return max(self.gap_visual, self.gap_semantic)

    def matrices(self) -> Dict[str, np.ndarray]:
        return {
            "structure_visual": self.visual,
            "structure_semantic": self.semantic,
            "structure_aligned": self.aligned,
        }

    def to_dict(self) -> Dict[str, float]:
        return {
            "gap_before": self.gap_before,
            "gap_after": self.gap_after,
            "gap_visual": self.gap_visual,
            "gap_semantic": self.gap_semantic,
        }


def structure_gap(S_a: np.ndarray, S_b: np.ndarray) -> float:
    return float(np.linalg.norm(S_a - S_b, ord="fro") / S_a.shape[0])


def class_structure(model: CdlModel) -> ClassStructure:
    """
    見えるクラスの構造を視覚・意味・共有コードの各表現で比較する

    gap_before は視覚と意味の構造のずれ、gap_after は共有コードの構造から
    より離れている側のずれ。
    """
    def self_similarity(M: np.ndarray) -> np.ndarray:
        return cosine_similarity_matrix(M, M)

    visual = self_similarity(model.P_s)
    semantic = self_similarity(model.C_s)
    aligned = self_similarity(model.Z_s)
    return ClassStructure(
        visual=visual,
        semantic=semantic,
        aligned=aligned,
        gap_before=structure_gap(visual, semantic),
        gap_visual=structure_gap(visual, aligned),
        gap_semantic=structure_gap(semantic, aligned),
    )
