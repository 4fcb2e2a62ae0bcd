"""
最近傍プロトタイプによるゼロショット認識
各空間のコサイン類似度を計算し、選択した空間の類似度を足し合わせて分類する
"""
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cdl.model import CdlModel
from common.errors import ConfigError, DimensionError, NotFittedError
from common.linalg_solvers import ridge_encode
from common.matrix import as_matrix, cosine_similarity_matrix

# ログ設定
logger = logging.getLogger(__name__)


class Space(str, Enum):
    """認識に使う空間"""
    VISUAL = "v"
    ALIGNED = "a"
    SEMANTIC = "s"

    @classmethod
    def parse(cls, value: str) -> "Space":
        key = str(value).strip().lower()
        for space in cls:
            if key in (space.value, space.name.lower()):
                return space
        raise ConfigError(f"unknown space '{value}'", choices=[s.name.lower() for s in cls])


@dataclass(frozen=True)
class SpaceSelection:
    """空集合でない空間の組（v, a, s の順に正規化して保持）"""
    spaces: Tuple[Space, ...]

    def __post_init__(self):
        if not self.spaces:
            raise ConfigError("space selection must not be empty")
        if len(set(self.spaces)) != len(self.spaces):
            raise ConfigError("space selection contains duplicates", spaces=self.label)
        ordered = tuple(space for space in Space if space in self.spaces)
        object.__setattr__(self, "spaces", ordered)

    @property
    def label(self) -> str:
        return "".join(space.value for space in self.spaces)

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, value: str) -> "SpaceSelection":
        """
        "va" のような短縮形、または "visual,aligned" のようなカンマ区切りを解釈する
        """
        text = str(value).strip().lower()
        if "," in text or "+" in text:
            parts = [p for p in text.replace("+", ",").split(",") if p.strip()]
        elif text in {space.name.lower() for space in Space}:
            parts = [text]
        else:
            parts = list(text)
        return cls(tuple(Space.parse(part) for part in parts))

    @classmethod
    def all(cls) -> List["SpaceSelection"]:
        """7通りの組合せ（要素数の少ない順）"""
        spaces = list(Space)
        return [cls(combo) for size in range(1, len(spaces) + 1)
                for combo in itertools.combinations(spaces, size)]


class Candidates(str, Enum):
    """候補クラス（ZSLは見えないクラスのみ、GZSLは両方）"""
    UNSEEN = "unseen"
    SEEN = "seen"
    BOTH = "both"

    @classmethod
    def parse(cls, value: str) -> "Candidates":
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"unknown candidate set '{value}'", choices=[c.value for c in cls]) from None


@dataclass(eq=False)
class SimilarityMatrix:
    """
    類似度行列

    values は (テストサンプル数 × 候補クラス数)、classes は列に対応するクラス名。
    """
    values: np.ndarray
    classes: Tuple[str, ...]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def argmax(self) -> np.ndarray:
        # np.argmax は同値のとき最初の列を返す
        return np.argmax(self.values, axis=1)


def cosine_similarity(a, b) -> float:
    """
    2つのベクトルのコサイン類似度（どちらかのノルムが0なら0）
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.size} vs {b.size}", pair="a/b")
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        return 0.0
    return float(np.clip(a @ b / norm, -1.0, 1.0))


def fuse(sims: Sequence[SimilarityMatrix]) -> SimilarityMatrix:
    """
    類似度行列を要素ごとに足し合わせる

    Args:
        sims: 同じ形・同じクラス登録の類似度行列

    Returns:
        SimilarityMatrix: 和
    """
    if not sims:
        raise ConfigError("nothing to fuse")
    first = sims[0]
    total = first.values.copy()
    for sim in sims[1:]:
        if tuple(sim.classes) != tuple(first.classes):
            raise DimensionError("similarity matrices have different class registries", pair="sims")
        if sim.values.shape != first.values.shape:
            raise DimensionError(f"similarity shapes differ: {sim.values.shape} vs {first.values.shape}", pair="sims")
        total += sim.values
    return SimilarityMatrix(values=total, classes=tuple(first.classes))


class Recognizer:
    """
    学習済みモデルによる最近傍プロトタイプ認識を行うクラス
    """

    def __init__(self, model: Optional[CdlModel]):
        """
        初期化

        Args:
            model: 学習済みモデル
        """
        if model is None:
            raise NotFittedError("recognizer needs a fitted model")
        for name in ("P_s", "P_u", "D_1", "D_2", "Z_s", "Z_u", "C_s", "C_u"):
            value = getattr(model, name, None)
            if value is None or np.size(value) == 0:
                raise NotFittedError(f"model has no learned {name}")
        self.model = model
        self.gamma = model.hyperparams.gamma

    def class_names(self, candidates: Candidates) -> Tuple[str, ...]:
        """候補クラスの登録（both のときは見えるクラス、続いて見えないクラス）"""
        seen = tuple(self.model.seen_classes) or tuple(f"seen_{k}" for k in range(self.model.n_seen))
        unseen = tuple(self.model.unseen_classes) or tuple(f"unseen_{l}" for l in range(self.model.n_unseen))
        if candidates is Candidates.UNSEEN:
            return unseen
        if candidates is Candidates.SEEN:
            return seen
        return seen + unseen

    def _prototypes(self, space: Space, candidates: Candidates) -> np.ndarray:
        model = self.model
        seen, unseen = {
            Space.VISUAL: (model.P_s, model.P_u),
            Space.ALIGNED: (model.Z_s, model.Z_u),
            Space.SEMANTIC: (model.C_s, model.C_u),
        }[space]
        if candidates is Candidates.UNSEEN:
            return unseen
        if candidates is Candidates.SEEN:
            return seen
        return np.hstack([seen, unseen])

    def _check_features(self, X_test) -> np.ndarray:
        X_test = as_matrix("X_test", X_test)
        d = self.model.D_1.shape[0]
        if X_test.shape[0] != d:
            raise DimensionError(f"test features have dimension {X_test.shape[0]}, model expects {d}",
                                 pair="X_test/D_1")
        return X_test

    def encode(self, X_test) -> np.ndarray:
        """テストサンプルの整列空間での表現 Z_i = (D_1ᵀD_1 + γI)⁻¹D_1ᵀX"""
        return ridge_encode(self.model.D_1, self._check_features(X_test), self.gamma)

    def _representations(self, X_test: np.ndarray, spaces: Sequence[Space]) -> Dict[Space, np.ndarray]:
        reps = {}
        if Space.VISUAL in spaces:
            reps[Space.VISUAL] = X_test
        if Space.ALIGNED in spaces or Space.SEMANTIC in spaces:
            Z = ridge_encode(self.model.D_1, X_test, self.gamma)
            reps[Space.ALIGNED] = Z
            if Space.SEMANTIC in spaces:
                reps[Space.SEMANTIC] = self.model.D_2 @ Z
        return reps

    def similarities(self, X_test, space: Space, candidates: Candidates = Candidates.UNSEEN) -> SimilarityMatrix:
        """
        1つの空間でテストサンプルと候補クラスのプロトタイプのコサイン類似度を求める

        Args:
            X_test: テストサンプル (d × n)
            space: 空間
            candidates: 候補クラス

        Returns:
            SimilarityMatrix: n × 候補クラス数
        """
        X_test = self._check_features(X_test)
        rep = self._representations(X_test, [space])[space]
        return SimilarityMatrix(
            values=cosine_similarity_matrix(rep, self._prototypes(space, candidates)),
            classes=self.class_names(candidates),
        )

    def fused_similarities(self, X_test, spaces: SpaceSelection,
                           candidates: Candidates = Candidates.UNSEEN) -> SimilarityMatrix:
        """選択した空間の類似度の和"""
        X_test = self._check_features(X_test)
        reps = self._representations(X_test, spaces.spaces)
        names = self.class_names(candidates)
        return fuse([
            SimilarityMatrix(values=cosine_similarity_matrix(reps[space], self._prototypes(space, candidates)),
                             classes=names)
            for space in spaces.spaces
        ])

    def predict(self, X_test, spaces: SpaceSelection,
                candidates: Candidates = Candidates.UNSEEN) -> np.ndarray:
        """
        融合した類似度が最大のクラスを予測する（同値は登録順で先のクラス）

        Returns:
            np.ndarray: 候補クラス登録内のクラスID
        """
        predictions = self.fused_similarities(X_test, spaces, candidates).argmax()
        logger.debug(f"{spaces.label} / {candidates.value}: {predictions.size}件を分類しました")
        return predictions


def similarities(model: CdlModel, X_test, space: Space,
                 candidates: Candidates = Candidates.UNSEEN) -> SimilarityMatrix:
    return Recognizer(model).similarities(X_test, space, candidates)


def predict(model: CdlModel, X_test, spaces: SpaceSelection,
            candidates: Candidates = Candidates.UNSEEN) -> np.ndarray:
    return Recognizer(model).predict(X_test, spaces, candidates)
