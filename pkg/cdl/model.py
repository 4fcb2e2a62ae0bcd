"""
CDLモデルの状態と損失
ハイパーパラメータ、学習履歴、モデル本体、損失計算
"""
import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

import config
from common.errors import ConfigError, DataError, DimensionError
from common.matrix import as_matrix, frobenius_sq, require_cols, require_rows


class Variant(str, Enum):
    """アブレーション用のサブモデル"""
    CDL = "CDL"
    NA = "NA"
    CDL_AD = "CDL-Ad"
    CDL_PR = "CDL-Pr"
    CDL_AD_PR = "CDL-Ad-Pr"

    @property
    def optimizes(self) -> bool:
        """初期化後に交互最適化を行うか（NAは行わない）"""
        return self is not Variant.NA

    @property
    def uses_adaptation(self) -> bool:
        """見えないクラスの適応項を学習に使うか"""
        return self not in (Variant.CDL_AD, Variant.CDL_AD_PR)

    @property
    def learns_prototypes(self) -> bool:
        """P_s を学習するか（CDL-Prではクラス平均に固定）"""
        return self not in (Variant.CDL_PR, Variant.CDL_AD_PR)

    @classmethod
    def parse(cls, value: str) -> "Variant":
        for variant in cls:
            if variant.value.lower() == str(value).strip().lower():
                return variant
        raise ConfigError(f"unknown variant '{value}'", choices=[v.value for v in cls])


@dataclass(frozen=True)
class Hyperparams:
    """
    ハイパーパラメータ

    Attributes:
        lam: 視覚空間と意味空間のバランス λ
        alpha: ドメイン適応項の重み α
        beta: プロトタイプ学習項の重み β
        gamma: テスト時の符号化のリッジ係数 γ
        n_b: 辞書の基底数（Noneなら見えるクラス数 K）
        max_iters: 交互最適化の最大反復回数
        rel_tol: 全損失の相対減少による停止閾値
        ridge_eps: 共有コードの正規方程式に加えるリッジ項
    """
    lam: float = config.DEFAULT_LAMBDA
    alpha: float = config.DEFAULT_ALPHA
    beta: float = config.DEFAULT_BETA
    gamma: float = config.DEFAULT_GAMMA
    n_b: Optional[int] = None
    max_iters: int = config.MAX_ITERS
    rel_tol: float = config.REL_TOL
    ridge_eps: float = config.RIDGE_EPS
    dictionary_tol: float = config.DICTIONARY_TOL
    dictionary_max_sweeps: int = config.DICTIONARY_MAX_SWEEPS

    def validate(self) -> "Hyperparams":
        for name in ("lam", "alpha", "beta", "rel_tol", "ridge_eps", "dictionary_tol"):
            value = getattr(self, name)
            if not (value >= 0 and np.isfinite(value)):
                raise ConfigError(f"{name} must be a finite nonnegative number", **{name: value})
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ConfigError("gamma must be positive", gamma=self.gamma)
        if self.n_b is not None and self.n_b < 1:
            raise ConfigError("n_b must be at least 1", n_b=self.n_b)
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1", max_iters=self.max_iters)
        if self.dictionary_max_sweeps < 1:
            raise ConfigError("dictionary_max_sweeps must be at least 1", dictionary_max_sweeps=self.dictionary_max_sweeps)
        return self

    def resolve_bases(self, n_seen: int) -> int:
        return self.n_b if self.n_b is not None else n_seen

    def replace(self, **changes) -> "Hyperparams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, object]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "Hyperparams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {unknown}")
        return cls(**data).validate()


class LossTerms(NamedTuple):
    """全損失とその内訳（L = L_s + α·L_u + β·L_p）"""
    total: float
    l_s: float
    l_u: float
    l_p: float


@dataclass
class IterationRecord:
    """交互最適化1サイクル分の記録"""
    iteration: int
    total: float
    l_s: float
    l_u: float
    l_p: float
    # ステップ名 -> そのステップ直後の全損失
    step_losses: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "IterationRecord":
        return cls(**data)


@dataclass
class TrainingTrace:
    """学習履歴"""
    initial: Optional[LossTerms] = None
    records: List[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations_run(self) -> int:
        return len(self.records)

    @property
    def final_total(self) -> Optional[float]:
        if self.records:
            return self.records[-1].total
        return self.initial.total if self.initial else None

    def totals(self) -> List[float]:
        return [record.total for record in self.records]

    def to_dict(self) -> Dict[str, object]:
        return {
            "initial": self.initial._asdict() if self.initial else None,
            "records": [record.to_dict() for record in self.records],
            "converged": self.converged,
            "iterations_run": self.iterations_run,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "TrainingTrace":
        initial = data.get("initial")
        return cls(
            initial=LossTerms(**initial) if initial else None,
            records=[IterationRecord.from_dict(r) for r in data.get("records", [])],
            converged=bool(data.get("converged", False)),
        )


@dataclass(eq=False)
class CdlModel:
    """
    学習済みのCDLモデル

    P_s/P_u は視覚空間、Z_s/Z_u は整列空間、C_s/C_u は意味空間のクラスプロトタイプ。
    hyperparams には実際に学習に使った値（CDL-Adでは α = 0）を保持する。
    """
    P_s: np.ndarray
    P_u: np.ndarray
    D_1: np.ndarray
    D_2: np.ndarray
    Z_s: np.ndarray
    Z_u: np.ndarray
    C_s: np.ndarray
    C_u: np.ndarray
    hyperparams: Hyperparams
    variant: Variant = Variant.CDL
    trace: TrainingTrace = field(default_factory=TrainingTrace)
    seen_classes: Sequence[str] = ()
    unseen_classes: Sequence[str] = ()

    MATRIX_FIELDS = ("P_s", "P_u", "D_1", "D_2", "Z_s", "Z_u", "C_s", "C_u")

    @property
    def n_seen(self) -> int:
        return self.P_s.shape[1]

    @property
    def n_unseen(self) -> int:
        return self.P_u.shape[1]

    @property
    def n_bases(self) -> int:
        return self.D_1.shape[1]

    def matrices(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.MATRIX_FIELDS}

    def check_consistency(self) -> "CdlModel":
        """次元関係と辞書の列ノルム制約を確認する"""
        for name in self.MATRIX_FIELDS:
            setattr(self, name, as_matrix(name, getattr(self, name)))
        require_rows("P_s", self.P_s, "D_1", self.D_1)
        require_rows("P_u", self.P_u, "D_1", self.D_1)
        require_rows("C_s", self.C_s, "D_2", self.D_2)
        require_rows("C_u", self.C_u, "D_2", self.D_2)
        require_cols("D_1", self.D_1, "D_2", self.D_2)
        require_cols("P_s", self.P_s, "Z_s", self.Z_s)
        require_cols("P_s", self.P_s, "C_s", self.C_s)
        require_cols("P_u", self.P_u, "Z_u", self.Z_u)
        require_cols("P_u", self.P_u, "C_u", self.C_u)
        if self.Z_s.shape[0] != self.n_bases or self.Z_u.shape[0] != self.n_bases:
            raise DimensionError("code rows must equal the number of dictionary bases", pair="Z/D_1")
        for name in ("D_1", "D_2"):
            norms_sq = np.sum(getattr(self, name) ** 2, axis=0)
            if np.any(norms_sq > 1.0 + 1e-9):
                raise DataError(f"{name} violates the unit-norm column constraint",
                                location=f"column {int(np.argmax(norms_sq))}")
        if self.seen_classes and len(self.seen_classes) != self.n_seen:
            raise DimensionError("seen class registry does not match P_s", pair="seen_classes/P_s")
        if self.unseen_classes and len(self.unseen_classes) != self.n_unseen:
            raise DimensionError("unseen class registry does not match P_u", pair="unseen_classes/P_u")
        return self


def one_hot(labels, n_classes: int, n_samples: Optional[int] = None) -> np.ndarray:
    """
    ラベル列からone-hot行列 H (K × n_s) を作る

    Args:
        labels: サンプルごとのクラスID（0 ≤ id < K）
        n_classes: クラス数 K
        n_samples: サンプル数 n_s（省略時は len(labels)）

    Returns:
        np.ndarray: H[k, i] = 1（サンプル i がクラス k のとき）
    """
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimensionError("labels must be a 1-D sequence", pair="labels")
    if n_samples is not None and labels.shape[0] != n_samples:
        raise DimensionError(f"expected {n_samples} labels, got {labels.shape[0]}", pair="labels/n_s")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        bad = labels[(labels < 0) | (labels >= n_classes)][0]
        raise DataError(f"label {bad} is out of range [0, {n_classes})")
    H = np.zeros((n_classes, labels.shape[0]))
    H[labels.astype(int), np.arange(labels.shape[0])] = 1.0
    return H


def class_means(X, labels, n_classes: int, class_names: Optional[Sequence[str]] = None) -> np.ndarray:
    """
    クラスごとのサンプル平均（P_s の初期値）

    Args:
        X: 学習サンプル (d × n_s)
        labels: サンプルごとのクラスID
        n_classes: クラス数 K（列の並びはクラス登録順）
        class_names: エラーメッセージ用のクラス名

    Returns:
        np.ndarray: d × K のクラス平均
    """
    X = as_matrix("X_s", X)
    H = one_hot(labels, n_classes, X.shape[1])
    counts = H.sum(axis=1)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        k = int(empty[0])
        name = class_names[k] if class_names is not None else str(k)
        raise DataError(f"class '{name}' has no training samples", location=f"class {k}")
    return (X @ H.T) / counts[np.newaxis, :]


def loss(model: CdlModel, X_s, H) -> LossTerms:
    """
    全損失 L = L_s + α·L_u + β·L_p とその内訳

    Args:
        model: CDLモデル
        X_s: 学習サンプル (d × n_s)
        H: one-hotラベル (K × n_s)

    Returns:
        LossTerms: (total, L_s, L_u, L_p)
    """
    X_s = as_matrix("X_s", X_s)
    H = as_matrix("H", H)
    require_rows("X_s", X_s, "P_s", model.P_s)
    require_cols("X_s", X_s, "H", H)
    if H.shape[0] != model.n_seen:
        raise DimensionError("H rows must equal the number of seen classes", pair="H/P_s")
    return loss_terms(
        model.P_s, model.P_u, model.D_1, model.D_2, model.Z_s, model.Z_u,
        model.C_s, model.C_u, X_s, H, model.hyperparams,
    )


def loss_terms(P_s, P_u, D_1, D_2, Z_s, Z_u, C_s, C_u, X_s, H, hp: Hyperparams) -> LossTerms:
    """行列を直接受け取る損失計算（最適化ループ内で使用）"""
    l_p = frobenius_sq(X_s - P_s @ H)
    l_s = frobenius_sq(P_s - D_1 @ Z_s) + hp.lam * frobenius_sq(C_s - D_2 @ Z_s)
    l_u = frobenius_sq(P_u - D_1 @ Z_u) + hp.lam * frobenius_sq(C_u - D_2 @ Z_u)
    total = l_s + hp.alpha * l_u + hp.beta * l_p
    return LossTerms(total=total, l_s=l_s, l_u=l_u, l_p=l_p)
