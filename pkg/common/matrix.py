"""
行列の検証と共通計算
"""
from typing import Tuple

import numpy as np

from common.errors import DataError, DimensionError


def as_matrix(name: str, value) -> np.ndarray:
    """
    2次元の有限な実数行列としてfloat64配列に変換する

    Args:
        name: エラーメッセージ用の行列名
        value: 変換対象

    Returns:
        np.ndarray: float64の2次元配列
    """
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got {array.ndim}-D", pair=name)
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and one column, got {array.shape}", pair=name)
    if not np.all(np.isfinite(array)):
        row, col = np.argwhere(~np.isfinite(array))[0]
        raise DataError(f"{name} contains a non-finite entry", location=f"row {row}, col {col}")
    return array


def require_rows(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray) -> None:
    """行数が一致することを確認する"""
    if a.shape[0] != b.shape[0]:
        raise DimensionError(
            f"row count mismatch: {name_a} has {a.shape[0]}, {name_b} has {b.shape[0]}",
            pair=f"{name_a}/{name_b}",
        )


def require_cols(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray) -> None:
    """列数が一致することを確認する"""
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"column count mismatch: {name_a} has {a.shape[1]}, {name_b} has {b.shape[1]}",
            pair=f"{name_a}/{name_b}",
        )


def frobenius_sq(residual: np.ndarray) -> float:
    """二乗フロベニウスノルム"""
    return float(np.sum(residual * residual))


def normalize_columns(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    各列をL2正規化する。ノルム0の列は0のまま

    Returns:
        (正規化済み行列, 元の列ノルム)
    """
    norms = np.linalg.norm(matrix, axis=0)
    safe = np.where(norms > 0.0, norms, 1.0)
    return matrix / safe, norms


def cosine_similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    列同士のコサイン類似度行列（a.shape[1] × b.shape[1]）

    ノルム0の列を含む組の類似度は0とする。
    """
    require_rows("a", a, "b", b)
    a_unit, _ = normalize_columns(a)
    b_unit, _ = normalize_columns(b)
    # 丸め誤差で[-1, 1]をわずかに超えないようにする
    return np.clip(a_unit.T @ b_unit, -1.0, 1.0)
