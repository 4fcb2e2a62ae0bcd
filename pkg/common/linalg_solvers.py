"""
最小二乗部分問題のソルバー
CDLの各更新ステップが呼び出す閉形式・反復ソルバー
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from common.errors import ConfigError, DataError, DimensionError, SolverError
from common.matrix import as_matrix, frobenius_sq, require_cols, require_rows

# ログ設定
logger = logging.getLogger(__name__)

DEFAULT_RIDGE_EPS = 1e-10
DEFAULT_DICTIONARY_TOL = 1e-9
DEFAULT_DICTIONARY_MAX_SWEEPS = 50


@dataclass
class DictionarySolution:
    """辞書更新の結果"""
    dictionary: np.ndarray
    objective: float
    sweeps: int
    unused_atoms: List[int] = field(default_factory=list)


def _solve_spd(A: np.ndarray, B: np.ndarray, ridge_eps: float) -> np.ndarray:
    """
    対称正定値系 A·Z = B をコレスキー分解で解く

    Args:
        A: 正規方程式の係数行列（リッジ項は加算済み）
        B: 右辺
        ridge_eps: エラーメッセージ用

    Returns:
        np.ndarray: 解 Z
    """
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise SolverError(
            "singular system: normal matrix is not positive definite; use ridge_eps > 0",
            ridge_eps=ridge_eps,
        ) from e
    # 丸め誤差で分解が通っても、ピボットが相対精度以下なら特異とみなす
    pivots = np.abs(np.diag(factor[0]))
    tol = 10 * A.shape[0] * np.finfo(np.float64).eps * np.abs(np.diag(A)).max()
    if pivots.min() ** 2 <= tol:
        raise SolverError(
            "singular system: normal matrix is numerically rank deficient; use ridge_eps > 0",
            ridge_eps=ridge_eps, min_pivot=float(pivots.min()),
        )
    Z = linalg.cho_solve(factor, B, check_finite=False)
    if not np.all(np.isfinite(Z)):
        raise SolverError("singular system: solution is not finite; use ridge_eps > 0", ridge_eps=ridge_eps)
    return Z


def solve_joint_code(D1, D2, P, C, lam: float, ridge_eps: float = DEFAULT_RIDGE_EPS) -> np.ndarray:
    """
    視覚・意味の両空間で共有するコードを求める

    ‖P − D1·Z‖² + λ‖C − D2·Z‖² を最小化する Z を
    (D1ᵀD1 + λ·D2ᵀD2 + ε·I)·Z = D1ᵀP + λ·D2ᵀC から求める。

    Args:
        D1: 視覚辞書 (d × n_b)
        D2: 意味辞書 (m × n_b)
        P: 視覚プロトタイプ (d × n)
        C: 意味プロトタイプ (m × n)
        lam: 意味項の重み λ ≥ 0
        ridge_eps: 可解性のためのリッジ項 ε ≥ 0

    Returns:
        np.ndarray: コード Z (n_b × n)
    """
    D1 = as_matrix("D1", D1)
    D2 = as_matrix("D2", D2)
    P = as_matrix("P", P)
    C = as_matrix("C", C)
    if lam < 0:
        raise ConfigError("lambda must be nonnegative", lam=lam)
    if ridge_eps < 0:
        raise ConfigError("ridge_eps must be nonnegative", ridge_eps=ridge_eps)
    require_rows("D1", D1, "P", P)
    require_rows("D2", D2, "C", C)
    require_cols("D1", D1, "D2", D2)
    require_cols("P", P, "C", C)

    n_b = D1.shape[1]
    A = D1.T @ D1 + lam * (D2.T @ D2) + ridge_eps * np.eye(n_b)
    B = D1.T @ P + lam * (D2.T @ C)
    return _solve_spd(A, B, ridge_eps)


def check_one_hot(H: np.ndarray) -> None:
    """各列がone-hotベクトルであることを確認する"""
    is_binary = np.all((H == 0.0) | (H == 1.0), axis=0)
    has_single = np.sum(H, axis=0) == 1.0
    bad = np.flatnonzero(~(is_binary & has_single))
    if bad.size:
        raise DataError("H column is not one-hot", location=f"column {int(bad[0])}")


def solve_prototype(D1Z, X, H, beta: float) -> np.ndarray:
    """
    見えるクラスの視覚プロトタイプを更新する

    ‖P_s − D1Z‖² + β‖X − P_s·H‖² の最小解
    P_s = (D1Z + β·X·Hᵀ)·(I + β·H·Hᵀ)⁻¹ を返す。
    H·Hᵀ はクラスごとのサンプル数を並べた対角行列なので列ごとのスケーリングで済む。

    Args:
        D1Z: 辞書による再構成 D1·Z_s (d × K)
        X: 学習サンプル (d × n_s)
        H: one-hotラベル行列 (K × n_s)
        beta: プロトタイプ項の重み β ≥ 0

    Returns:
        np.ndarray: P_s (d × K)
    """
    D1Z = as_matrix("D1Z", D1Z)
    X = as_matrix("X", X)
    H = as_matrix("H", H)
    if beta < 0:
        raise ConfigError("beta must be nonnegative", beta=beta)
    require_rows("D1Z", D1Z, "X", X)
    require_cols("X", X, "H", H)
    if H.shape[0] != D1Z.shape[1]:
        raise DimensionError(
            f"class count mismatch: D1Z has {D1Z.shape[1]} columns, H has {H.shape[0]} rows",
            pair="D1Z/H",
        )
    check_one_hot(H)

    if beta == 0.0:
        return D1Z.copy()
    counts = H.sum(axis=1)
    return (D1Z + beta * (X @ H.T)) / (1.0 + beta * counts)[np.newaxis, :]


def _validated_targets(targets: Sequence[Tuple[object, object, float]]) -> List[Tuple[np.ndarray, np.ndarray, float]]:
    if not targets:
        raise ConfigError("solve_dictionary needs at least one target")
    checked = []
    for i, (P, Z, weight) in enumerate(targets):
        P = as_matrix(f"P[{i}]", P)
        Z = as_matrix(f"Z[{i}]", Z)
        require_cols(f"P[{i}]", P, f"Z[{i}]", Z)
        if weight < 0:
            raise ConfigError("target weights must be nonnegative", target=i, weight=weight)
        if checked:
            require_rows("P[0]", checked[0][0], f"P[{i}]", P)
            require_rows("Z[0]", checked[0][1], f"Z[{i}]", Z)
        checked.append((P, Z, float(weight)))
    if all(weight == 0.0 for _, _, weight in checked):
        raise ConfigError("solve_dictionary needs at least one positive weight")
    return checked


def dictionary_objective(D: np.ndarray, targets: Sequence[Tuple[np.ndarray, np.ndarray, float]]) -> float:
    """Σ_i w_i‖P_i − D·Z_i‖²"""
    return sum(weight * frobenius_sq(P - D @ Z) for P, Z, weight in targets if weight > 0.0)


def project_columns(D: np.ndarray) -> np.ndarray:
    """各列を単位球 ‖d‖₂ ≤ 1 に射影する"""
    norms = np.linalg.norm(D, axis=0)
    return D / np.maximum(norms, 1.0)[np.newaxis, :]


def solve_dictionary(
    targets: Sequence[Tuple[object, object, float]],
    initial: Optional[np.ndarray] = None,
    tol: float = DEFAULT_DICTIONARY_TOL,
    max_sweeps: int = DEFAULT_DICTIONARY_MAX_SWEEPS,
) -> DictionarySolution:
    """
    列ノルム制約付きの辞書を求める

    Σ_i w_i‖P_i − D·Z_i‖² を ‖d_j‖² ≤ 1 の下で最小化する。
    列ごとのブロック座標降下で、各列は残差から閉形式で求めて単位球へ射影する。
    1スイープあたりの相対的な目的関数の減少が tol を下回るか、
    max_sweeps に達したら終了する。

    Args:
        targets: (P_i, Z_i, w_i) のリスト。P_i は r × n_i、Z_i は n_b × n_i
        initial: 開始点 (r × n_b)。省略時は制約なし最小二乗解を射影したもの
        tol: 相対減少の停止閾値
        max_sweeps: 最大スイープ数

    Returns:
        DictionarySolution: 辞書、目的関数値、スイープ数、未使用の基底
    """
    checked = _validated_targets(targets)
    r = checked[0][0].shape[0]
    n_b = checked[0][1].shape[0]

    # 正規方程式の十分統計量
    G = np.zeros((n_b, n_b))
    E = np.zeros((r, n_b))
    for P, Z, weight in checked:
        if weight > 0.0:
            G += weight * (Z @ Z.T)
            E += weight * (P @ Z.T)

    if initial is None:
        D = linalg.lstsq(G, E.T, check_finite=False)[0].T
    else:
        D = as_matrix("initial", initial).copy()
        if D.shape != (r, n_b):
            raise DimensionError(f"initial dictionary must be {(r, n_b)}, got {D.shape}", pair="initial/targets")
    D = project_columns(D)

    unused = [j for j in range(n_b) if G[j, j] <= 0.0]
    if unused:
        logger.debug(f"未使用の基底: {unused}")

    objective = dictionary_objective(D, checked)
    sweeps = 0
    while sweeps < max_sweeps and objective > 0.0:
        for j in range(n_b):
            g = G[j, j]
            if g <= 0.0:
                continue
            u = D[:, j] + (E[:, j] - D @ G[:, j]) / g
            norm = np.linalg.norm(u)
            D[:, j] = u / norm if norm > 1.0 else u
        sweeps += 1
        previous = objective
        objective = dictionary_objective(D, checked)
        if previous - objective <= tol * previous:
            break

    logger.debug(f"辞書更新: {sweeps}スイープ, 目的関数 {objective:.6e}")
    return DictionarySolution(dictionary=D, objective=objective, sweeps=sweeps, unused_atoms=unused)


def ridge_encode(D, X, gamma: float) -> np.ndarray:
    """
    リッジ回帰でテスト画像を整列空間へ符号化する

    ‖X − D·Z‖² + γ‖Z‖² の最小解 (DᵀD + γI)·Z = DᵀX を返す。

    Args:
        D: 辞書 (r × n_b)
        X: 符号化する列ベクトル群 (r × n)
        gamma: リッジ係数 γ > 0

    Returns:
        np.ndarray: Z (n_b × n)
    """
    D = as_matrix("D", D)
    X = as_matrix("X", X)
    if not gamma > 0:
        raise ConfigError("gamma must be positive", gamma=gamma)
    require_rows("D", D, "X", X)
    A = D.T @ D + gamma * np.eye(D.shape[1])
    return _solve_spd(A, D.T @ X, gamma)
