"""
CDLモデルの初期化
各変数を順に個別に求める6ステップ
"""
import logging

import numpy as np

from cdl.model import CdlModel, Hyperparams, TrainingTrace, Variant, class_means, loss_terms
from common.linalg_solvers import solve_dictionary, solve_joint_code
from common.matrix import cosine_similarity_matrix

# ログ設定
logger = logging.getLogger(__name__)


def initial_unseen_codes(C_s: np.ndarray, C_u: np.ndarray, n_b: int, rng_seed: int) -> np.ndarray:
    """
    Z_u の初期値

    n_b = K のときは見えないクラスと見えるクラスの意味プロトタイプ間のコサイン類似度。
    それ以外は [0, 1] の一様乱数を列ごとに単位ノルムへ正規化したもの。
    """
    K = C_s.shape[1]
    if n_b == K:
        return cosine_similarity_matrix(C_s, C_u)
    rng = np.random.default_rng(rng_seed)
    Z_u = rng.uniform(0.0, 1.0, size=(n_b, C_u.shape[1]))
    return Z_u / np.linalg.norm(Z_u, axis=0, keepdims=True)


def semantic_code(D_2: np.ndarray, C: np.ndarray, ridge_eps: float) -> np.ndarray:
    """意味項だけで共有コードを求める（視覚項の重みを0にした solve_joint_code）"""
    n_b, n = D_2.shape[1], C.shape[1]
    return solve_joint_code(np.zeros((1, n_b)), D_2, np.zeros((1, n)), C, lam=1.0, ridge_eps=ridge_eps)


def initialize(dataset, hp: Hyperparams, rng_seed: int = 0) -> CdlModel:
    """
    データセットからCDLモデルを初期化する

    (i) Z_u ← コサイン類似度, (ii) D_2 ← C_u ≈ D_2·Z_u, (iii) Z_s ← C_s ≈ D_2·Z_s,
    (iv) P_s ← クラス平均, (v) D_1 ← P_s ≈ D_1·Z_s, (vi) P_u ← D_1·Z_u

    Args:
        dataset: 学習用データセット（dataio.dataset.Dataset）
        hp: ハイパーパラメータ
        rng_seed: n_b ≠ K のときの Z_u 初期化に使う乱数シード

    Returns:
        CdlModel: 初期化済みモデル（学習履歴には初期損失のみ）
    """
    hp = hp.validate()
    K = dataset.n_seen
    n_b = hp.resolve_bases(K)
    if n_b != K:
        logger.warning(f"基底数 n_b={n_b} が見えるクラス数 K={K} と異なるため Z_u を乱数で初期化します")

    Z_u = initial_unseen_codes(dataset.C_s, dataset.C_u, n_b, rng_seed)
    D_2 = solve_dictionary(
        [(dataset.C_u, Z_u, 1.0)], tol=hp.dictionary_tol, max_sweeps=hp.dictionary_max_sweeps
    ).dictionary
    Z_s = semantic_code(D_2, dataset.C_s, hp.ridge_eps)
    P_s = class_means(dataset.X_s, dataset.labels_s, K, dataset.seen_classes)
    D_1 = solve_dictionary(
        [(P_s, Z_s, 1.0)], tol=hp.dictionary_tol, max_sweeps=hp.dictionary_max_sweeps
    ).dictionary
    P_u = D_1 @ Z_u

    terms = loss_terms(P_s, P_u, D_1, D_2, Z_s, Z_u, dataset.C_s, dataset.C_u, dataset.X_s, dataset.H, hp)
    logger.info(f"初期化完了: K={K}, L={dataset.n_unseen}, n_b={n_b}, 初期損失 {terms.total:.6e}")
    return CdlModel(
        P_s=P_s, P_u=P_u, D_1=D_1, D_2=D_2, Z_s=Z_s, Z_u=Z_u,
        C_s=dataset.C_s.copy(), C_u=dataset.C_u.copy(),
        hyperparams=hp, variant=Variant.NA,
        trace=TrainingTrace(initial=terms),
        seen_classes=tuple(dataset.seen_classes),
        unseen_classes=tuple(dataset.unseen_classes),
    )
