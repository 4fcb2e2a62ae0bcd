"""
正解既知の合成データ（planted instance）の生成
辞書とコードを先に決め、そこからプロトタイプ・意味ベクトル・サンプルを作る
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cdl.model import CdlModel, Hyperparams, TrainingTrace, Variant, one_hot
from common.errors import ConfigError
from dataio.dataset import Dataset

# ログ設定
logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PlantedInstance:
    """
    正解の辞書・コード・プロトタイプと生成されたデータセット

    semantic_noise = 0 のとき C_s = D_2·Z_s, C_u = D_2·Z_u が厳密に成り立つ。
    サンプルは P_s の列に標準偏差 noise のガウス雑音を加えたもの。
    """
    D_1: np.ndarray
    D_2: np.ndarray
    Z_s: np.ndarray
    Z_u: np.ndarray
    P_s: np.ndarray
    P_u: np.ndarray
    dataset: Dataset
    noise: float
    semantic_noise: float = 0.0

    def truth_model(self, hp: Optional[Hyperparams] = None) -> CdlModel:
        """正解の行列をそのまま持つモデル（固定点の確認などに使う）"""
        return CdlModel(
            P_s=self.P_s.copy(), P_u=self.P_u.copy(), D_1=self.D_1.copy(), D_2=self.D_2.copy(),
            Z_s=self.Z_s.copy(), Z_u=self.Z_u.copy(),
            C_s=self.dataset.C_s.copy(), C_u=self.dataset.C_u.copy(),
            hyperparams=(hp or Hyperparams()).validate(), variant=Variant.CDL, trace=TrainingTrace(),
            seen_classes=self.dataset.seen_classes, unseen_classes=self.dataset.unseen_classes,
        )


def _unit_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    D = rng.standard_normal((rows, cols))
    return D / np.linalg.norm(D, axis=0, keepdims=True)


def generate_planted(d: int, m: int, K: int, L: int, samples_per_class: int, noise: float, rng_seed: int,
                     test_samples_per_class: Optional[int] = None,
                     semantic_noise: float = 0.0,
                     perturbation: float = 0.1,
                     n_validation: Optional[int] = None) -> PlantedInstance:
    """
    合成データを生成する（n_b = K）

    コードは one-hot に小さな非負の摂動を加えたもので、見えないクラスは
    L ≤ K なら互いに異なる見えるクラスの基底に割り当てる。
    乱数の消費順は noise に依存しないため、同じシードで noise だけを変えると
    同じ正解モデルに異なる強さの雑音が乗ったデータになる。

    Args:
        d: 視覚特徴の次元
        m: 意味ベクトルの次元
        K: 見えるクラス数（= 基底数）
        L: 見えないクラス数
        samples_per_class: 見えるクラスごとの学習サンプル数
        noise: サンプル雑音の標準偏差
        rng_seed: 乱数シード
        test_samples_per_class: クラスごとのテストサンプル数（省略時は samples_per_class）
        semantic_noise: 意味ベクトルに加える雑音（構造の不一致を注入する）
        perturbation: コードの摂動の大きさ
        n_validation: 検証用に取り分ける見えるクラス数（省略時は K // 4、最低1）

    Returns:
        PlantedInstance: 正解と生成データ
    """
    for name, value in (("d", d), ("m", m), ("K", K), ("L", L), ("samples_per_class", samples_per_class)):
        if value < 1:
            raise ConfigError(f"{name} must be at least 1", **{name: value})
    if noise < 0 or semantic_noise < 0 or perturbation < 0:
        raise ConfigError("noise levels must be nonnegative", noise=noise, semantic_noise=semantic_noise)
    test_samples_per_class = test_samples_per_class or samples_per_class
    if n_validation is None:
        n_validation = max(1, K // 4) if K >= 2 else 0
    if n_validation >= K:
        raise ConfigError("validation classes must leave at least one training class", n_validation=n_validation, K=K)

    rng = np.random.default_rng(rng_seed)
    D_1 = _unit_columns(rng, d, K)
    D_2 = _unit_columns(rng, m, K)
    Z_s = np.eye(K) + perturbation * rng.uniform(0.0, 1.0, size=(K, K))
    if L <= K:
        assignment = rng.permutation(K)[:L]
    else:
        assignment = rng.integers(0, K, size=L)
    Z_u = one_hot(assignment, K, L) + perturbation * rng.uniform(0.0, 1.0, size=(K, L))

    P_s = D_1 @ Z_s
    P_u = D_1 @ Z_u
    C_s = D_2 @ Z_s + semantic_noise * rng.standard_normal((m, K))
    C_u = D_2 @ Z_u + semantic_noise * rng.standard_normal((m, L))

    labels_s = np.repeat(np.arange(K), samples_per_class)
    X_s = P_s[:, labels_s] + noise * rng.standard_normal((d, labels_s.size))
    labels_test_unseen = np.repeat(np.arange(L), test_samples_per_class)
    X_test_unseen = P_u[:, labels_test_unseen] + noise * rng.standard_normal((d, labels_test_unseen.size))
    labels_test_seen = np.repeat(np.arange(K), test_samples_per_class)
    X_test_seen = P_s[:, labels_test_seen] + noise * rng.standard_normal((d, labels_test_seen.size))

    seen = tuple(f"seen_{k:02d}" for k in range(K))
    unseen = tuple(f"unseen_{l:02d}" for l in range(L))
    dataset = Dataset(
        X_s=X_s, labels_s=labels_s, C_s=C_s, C_u=C_u,
        seen_classes=seen, unseen_classes=unseen,
        X_test_unseen=X_test_unseen, labels_test_unseen=labels_test_unseen,
        X_test_seen=X_test_seen, labels_test_seen=labels_test_seen,
        validation_classes=seen[K - n_validation:] if n_validation else (),
        name=f"planted-d{d}-m{m}-K{K}-L{L}-seed{rng_seed}",
    ).validate()
    logger.info(f"合成データを生成しました: {dataset.summary()}, noise={noise}, semantic_noise={semantic_noise}")
    return PlantedInstance(D_1=D_1, D_2=D_2, Z_s=Z_s, Z_u=Z_u, P_s=P_s, P_u=P_u,
                           dataset=dataset, noise=noise, semantic_noise=semantic_noise)
