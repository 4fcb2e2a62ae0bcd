"""
行列ファイル・クラス登録ファイル・ラベルファイルの読み書き

テキスト形式: 1行目に "rows cols"、以降は行ごとに空白区切りの値
バイナリ形式（.bin）: little-endian int64 の rows, cols に続けて float64 を行優先で格納
"""
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from common.errors import DataError

PathLike = Union[str, Path]

BINARY_SUFFIX = ".bin"
_HEADER_DTYPE = np.dtype("<i8")
_VALUE_DTYPE = np.dtype("<f8")


def is_binary_path(path: PathLike) -> bool:
    return Path(path).suffix.lower() == BINARY_SUFFIX


def read_matrix(path: PathLike) -> np.ndarray:
    """
    行列ファイルを読み込む（拡張子 .bin ならバイナリ形式）

    Args:
        path: 行列ファイルのパス

    Returns:
        np.ndarray: float64の2次元配列
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("matrix file not found", path=str(path))
    matrix = _read_binary(path) if is_binary_path(path) else _read_text(path)
    bad = np.argwhere(~np.isfinite(matrix))
    if bad.size:
        row, col = bad[0]
        raise DataError("matrix contains a non-finite value", path=str(path), location=f"row {row}, col {col}")
    return matrix


def _read_text(path: Path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        body = f.read().split()
    rows, cols = _parse_header(header, path)
    if len(body) != rows * cols:
        raise DataError(f"expected {rows * cols} values, found {len(body)}", path=str(path), location="body")
    try:
        values = np.array(body, dtype=np.float64)
    except ValueError:
        for index, token in enumerate(body):
            try:
                float(token)
            except ValueError:
                raise DataError(f"invalid number '{token}'", path=str(path),
                                location=f"row {index // cols}, col {index % cols}") from None
        raise
    return values.reshape(rows, cols)


def _parse_header(header: List[str], path: Path):
    if len(header) != 2:
        raise DataError("header must be 'rows cols'", path=str(path), location="line 1")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise DataError("header must contain two integers", path=str(path), location="line 1") from None
    if rows < 1 or cols < 1:
        raise DataError("matrix must have at least one row and one column", path=str(path), location="line 1")
    return rows, cols


def _read_binary(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 2 * _HEADER_DTYPE.itemsize:
        raise DataError("binary matrix header is truncated", path=str(path), location="header")
    rows, cols = np.frombuffer(raw, dtype=_HEADER_DTYPE, count=2)
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise DataError("matrix must have at least one row and one column", path=str(path), location="header")
    payload = raw[2 * _HEADER_DTYPE.itemsize:]
    if len(payload) != rows * cols * _VALUE_DTYPE.itemsize:
        raise DataError(f"expected {rows * cols} float64 values", path=str(path), location="body")
    return np.frombuffer(payload, dtype=_VALUE_DTYPE).reshape(rows, cols).astype(np.float64)


def write_matrix(path: PathLike, matrix: np.ndarray) -> Path:
    """
    行列ファイルを書き出す（拡張子 .bin ならバイナリ形式）

    テキスト形式は有効数字17桁で書くため、読み戻すと元の値と一致する。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    rows, cols = matrix.shape
    if is_binary_path(path):
        header = np.array([rows, cols], dtype=_HEADER_DTYPE).tobytes()
        path.write_bytes(header + np.ascontiguousarray(matrix, dtype=_VALUE_DTYPE).tobytes())
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{rows} {cols}\n")
            np.savetxt(f, matrix, fmt="%.17g")
    return path


def read_registry(path: PathLike) -> List[str]:
    """クラス登録ファイル（1行に1クラス名）を読み込む"""
    path = Path(path)
    if not path.is_file():
        raise DataError("class registry not found", path=str(path))
    names = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    names = [name for name in names if name]
    if len(set(names)) != len(names):
        duplicate = next(name for name in names if names.count(name) > 1)
        raise DataError(f"duplicate class name '{duplicate}'", path=str(path))
    return names


def write_registry(path: PathLike, names: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{name}\n" for name in names), encoding="utf-8")
    return path


def read_labels(path: PathLike, registry: Sequence[str]) -> np.ndarray:
    """
    ラベルファイル（1行に1クラス名）を読み込み、登録順のクラスIDに変換する

    Args:
        path: ラベルファイルのパス
        registry: クラス名の登録リスト

    Returns:
        np.ndarray: int64のクラスID
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("label file not found", path=str(path))
    index = {name: i for i, name in enumerate(registry)}
    ids = []
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        name = line.strip()
        if not name:
            continue
        if name not in index:
            raise DataError(f"unknown label '{name}'", path=str(path), location=f"line {line_number}")
        ids.append(index[name])
    return np.array(ids, dtype=np.int64)


def write_labels(path: PathLike, ids: Sequence[int], registry: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{registry[int(i)]}\n" for i in ids), encoding="utf-8")
    return path
