"""
データセットとマニフェスト
マニフェストは key=value 形式のテキストで、行列・登録・ラベルの各ファイルを参照する
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from dotenv import dotenv_values

from cdl.model import one_hot
from common.errors import ConfigError, DataError, DimensionError
from common.matrix import normalize_columns
from dataio.matrix_io import (
    PathLike,
    read_labels,
    read_matrix,
    read_registry,
    write_labels,
    write_matrix,
    write_registry,
)

# ログ設定
logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"

# マニフェストのキー
REQUIRED_KEYS = ("features", "labels", "semantics_seen", "semantics_unseen", "seen_classes", "unseen_classes")
OPTIONAL_KEYS = (
    "name",
    "test_unseen_features",
    "test_unseen_labels",
    "test_seen_features",
    "test_seen_labels",
    "validation_classes",
)


@dataclass(eq=False)
class Dataset:
    """
    学習・評価用データセット

    行列はすべて列がサンプルまたはクラスに対応する（X_s は d × n_s、C_s は m × K）。
    ラベルは対応する登録リスト内のクラスID。
    """
    X_s: np.ndarray
    labels_s: np.ndarray
    C_s: np.ndarray
    C_u: np.ndarray
    seen_classes: Tuple[str, ...]
    unseen_classes: Tuple[str, ...]
    X_test_unseen: Optional[np.ndarray] = None
    labels_test_unseen: Optional[np.ndarray] = None
    X_test_seen: Optional[np.ndarray] = None
    labels_test_seen: Optional[np.ndarray] = None
    validation_classes: Tuple[str, ...] = ()
    name: str = "dataset"
    source: Optional[str] = field(default=None, compare=False)

    @property
    def n_features(self) -> int:
        return self.X_s.shape[0]

    @property
    def n_semantic(self) -> int:
        return self.C_s.shape[0]

    @property
    def n_seen(self) -> int:
        return len(self.seen_classes)

    @property
    def n_unseen(self) -> int:
        return len(self.unseen_classes)

    @property
    def n_samples(self) -> int:
        return self.X_s.shape[1]

    @property
    def has_unseen_test(self) -> bool:
        return self.X_test_unseen is not None

    @property
    def has_seen_test(self) -> bool:
        return self.X_test_seen is not None

    @cached_property
    def H(self) -> np.ndarray:
        """one-hotラベル行列 (K × n_s)"""
        return one_hot(self.labels_s, self.n_seen, self.n_samples)

    def _fail(self, message: str, key: Optional[str] = None, **details) -> None:
        raise DataError(message, path=self.source, location=key, **details)

    def validate(self) -> "Dataset":
        """
        データセットの不変条件を確認する（何度呼んでも結果は同じ）

        Returns:
            Dataset: self
        """
        if not self.seen_classes or not self.unseen_classes:
            self._fail("dataset needs at least one seen and one unseen class", "seen_classes")
        overlap = sorted(set(self.seen_classes) & set(self.unseen_classes))
        if overlap:
            self._fail(f"seen and unseen registries overlap: {overlap}", "unseen_classes")

        self._check_matrix("features", self.X_s)
        self._check_matrix("semantics_seen", self.C_s)
        self._check_matrix("semantics_unseen", self.C_u)
        if self.C_s.shape[1] != self.n_seen:
            raise DimensionError(f"semantics_seen has {self.C_s.shape[1]} columns for {self.n_seen} seen classes",
                                 pair="semantics_seen/seen_classes", path=self.source)
        if self.C_u.shape[1] != self.n_unseen:
            raise DimensionError(f"semantics_unseen has {self.C_u.shape[1]} columns for {self.n_unseen} unseen classes",
                                 pair="semantics_unseen/unseen_classes", path=self.source)
        if self.C_s.shape[0] != self.C_u.shape[0]:
            raise DimensionError("semantic dimensions differ", pair="semantics_seen/semantics_unseen", path=self.source)

        self._check_labels("labels", self.labels_s, self.n_samples, self.seen_classes)
        counts = np.bincount(np.asarray(self.labels_s, dtype=np.int64), minlength=self.n_seen)
        if np.any(counts == 0):
            missing = self.seen_classes[int(np.flatnonzero(counts == 0)[0])]
            self._fail(f"seen class '{missing}' has no training samples", "labels")

        self._check_split("test_unseen", self.X_test_unseen, self.labels_test_unseen, self.unseen_classes)
        self._check_split("test_seen", self.X_test_seen, self.labels_test_seen, self.seen_classes)

        unknown = [name for name in self.validation_classes if name not in self.seen_classes]
        if unknown:
            self._fail(f"validation class '{unknown[0]}' is not a seen class", "validation_classes")
        return self

    def _check_matrix(self, key: str, matrix: np.ndarray) -> None:
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            self._fail(f"{key} must be a nonempty 2-D matrix", key)
        bad = np.argwhere(~np.isfinite(matrix))
        if bad.size:
            self._fail(f"{key} contains a non-finite value", key, entry=f"row {bad[0][0]}, col {bad[0][1]}")

    def _check_labels(self, key: str, labels: np.ndarray, n: int, registry: Sequence[str]) -> None:
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.shape[0] != n:
            raise DimensionError(f"{key} has {labels.size} entries for {n} samples", pair=key, path=self.source)
        if labels.size and (labels.min() < 0 or labels.max() >= len(registry)):
            self._fail(f"{key} contains an id outside the registry", key)

    def _check_split(self, key: str, X: Optional[np.ndarray], labels: Optional[np.ndarray],
                     registry: Sequence[str]) -> None:
        if (X is None) != (labels is None):
            self._fail(f"{key} needs both features and labels", key)
        if X is None:
            return
        self._check_matrix(f"{key}_features", X)
        if X.shape[0] != self.n_features:
            raise DimensionError(f"{key}_features has dimension {X.shape[0]}, training features have {self.n_features}",
                                 pair=f"{key}_features/features", path=self.source)
        self._check_labels(f"{key}_labels", labels, X.shape[1], registry)

    def replace(self, **changes) -> "Dataset":
        return dataclasses.replace(self, **changes)

    def normalized(self) -> "Dataset":
        """特徴量の各列をL2正規化したコピー（学習・テストに同じ処理を適用）"""
        def unit(X):
            return None if X is None else normalize_columns(X)[0]
        return self.replace(X_s=unit(self.X_s), X_test_unseen=unit(self.X_test_unseen),
                            X_test_seen=unit(self.X_test_seen))

    def validation_split(self) -> "Dataset":
        """
        検証用の分割を作る

        validation_classes を疑似的な見えないクラスとして扱い、
        残りの見えるクラスで学習、検証クラスのサンプルでテストする。
        """
        if not self.validation_classes:
            raise ConfigError("dataset defines no validation classes", dataset=self.name)
        held_out = [self.seen_classes.index(name) for name in self.validation_classes]
        kept = [k for k in range(self.n_seen) if k not in held_out]
        if not kept:
            raise ConfigError("validation split leaves no training classes", dataset=self.name)

        labels = np.asarray(self.labels_s)
        train_mask = np.isin(labels, kept)
        test_mask = ~train_mask
        remap_kept = {old: new for new, old in enumerate(kept)}
        remap_held = {old: new for new, old in enumerate(held_out)}
        return Dataset(
            X_s=self.X_s[:, train_mask],
            labels_s=np.array([remap_kept[int(k)] for k in labels[train_mask]], dtype=np.int64),
            C_s=self.C_s[:, kept],
            C_u=self.C_s[:, held_out],
            seen_classes=tuple(self.seen_classes[k] for k in kept),
            unseen_classes=tuple(self.seen_classes[k] for k in held_out),
            X_test_unseen=self.X_s[:, test_mask],
            labels_test_unseen=np.array([remap_held[int(k)] for k in labels[test_mask]], dtype=np.int64),
            name=f"{self.name}-validation",
            source=self.source,
        ).validate()

    def summary(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "d": self.n_features,
            "m": self.n_semantic,
            "K": self.n_seen,
            "L": self.n_unseen,
            "n_s": self.n_samples,
            "test_unseen": 0 if self.X_test_unseen is None else int(self.X_test_unseen.shape[1]),
            "test_seen": 0 if self.X_test_seen is None else int(self.X_test_seen.shape[1]),
            "validation_classes": len(self.validation_classes),
        }


def load_dataset(manifest_path: PathLike) -> Dataset:
    """
    マニフェストからデータセットを読み込み、不変条件を確認する

    Args:
        manifest_path: マニフェストファイルのパス

    Returns:
        Dataset: 検証済みデータセット
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError("manifest not found", path=str(manifest_path))
    entries = {k: (v or "").strip() for k, v in dotenv_values(manifest_path).items()}
    missing = [key for key in REQUIRED_KEYS if not entries.get(key)]
    if missing:
        raise DataError(f"manifest is missing keys: {missing}", path=str(manifest_path))
    unknown = sorted(set(entries) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        logger.warning(f"マニフェストに未知のキーがあります: {unknown}")

    base = manifest_path.parent

    def resolve(key: str) -> Optional[Path]:
        value = entries.get(key)
        return (base / value) if value else None

    seen = read_registry(resolve("seen_classes"))
    unseen = read_registry(resolve("unseen_classes"))
    dataset = Dataset(
        X_s=read_matrix(resolve("features")),
        labels_s=read_labels(resolve("labels"), seen),
        C_s=read_matrix(resolve("semantics_seen")),
        C_u=read_matrix(resolve("semantics_unseen")),
        seen_classes=tuple(seen),
        unseen_classes=tuple(unseen),
        name=entries.get("name") or manifest_path.parent.name,
        source=str(manifest_path),
    )
    if resolve("test_unseen_features") or resolve("test_unseen_labels"):
        dataset.X_test_unseen = _optional_matrix(resolve("test_unseen_features"), manifest_path, "test_unseen_features")
        dataset.labels_test_unseen = _optional_labels(resolve("test_unseen_labels"), unseen, manifest_path, "test_unseen_labels")
    if resolve("test_seen_features") or resolve("test_seen_labels"):
        dataset.X_test_seen = _optional_matrix(resolve("test_seen_features"), manifest_path, "test_seen_features")
        dataset.labels_test_seen = _optional_labels(resolve("test_seen_labels"), seen, manifest_path, "test_seen_labels")
    if resolve("validation_classes"):
        dataset.validation_classes = tuple(read_registry(resolve("validation_classes")))

    dataset.validate()
    logger.info(f"データセットを読み込みました: {dataset.summary()}")
    return dataset


def _optional_matrix(path: Optional[Path], manifest_path: Path, key: str) -> np.ndarray:
    if path is None:
        raise DataError(f"{key} is required together with its pair", path=str(manifest_path), location=key)
    return read_matrix(path)


def _optional_labels(path: Optional[Path], registry: Sequence[str], manifest_path: Path, key: str) -> np.ndarray:
    if path is None:
        raise DataError(f"{key} is required together with its pair", path=str(manifest_path), location=key)
    return read_labels(path, registry)


def save_dataset(dataset: Dataset, directory: PathLike, binary: bool = False) -> Path:
    """
    データセットをマニフェスト形式で保存する

    Args:
        dataset: 保存するデータセット
        directory: 出力ディレクトリ
        binary: 行列をバイナリ形式（.bin）で保存するか

    Returns:
        Path: マニフェストのパス
    """
    dataset.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = ".bin" if binary else ".txt"

    entries = {"name": dataset.name}

    def put_matrix(key: str, matrix: np.ndarray) -> None:
        write_matrix(directory / f"{key}{ext}", matrix)
        entries[key] = f"{key}{ext}"

    def put_labels(key: str, ids: np.ndarray, registry: Sequence[str]) -> None:
        write_labels(directory / f"{key}.txt", ids, registry)
        entries[key] = f"{key}.txt"

    def put_registry(key: str, names: Sequence[str]) -> None:
        write_registry(directory / f"{key}.txt", names)
        entries[key] = f"{key}.txt"

    put_matrix("features", dataset.X_s)
    put_labels("labels", dataset.labels_s, dataset.seen_classes)
    put_matrix("semantics_seen", dataset.C_s)
    put_matrix("semantics_unseen", dataset.C_u)
    put_registry("seen_classes", dataset.seen_classes)
    put_registry("unseen_classes", dataset.unseen_classes)
    if dataset.has_unseen_test:
        put_matrix("test_unseen_features", dataset.X_test_unseen)
        put_labels("test_unseen_labels", dataset.labels_test_unseen, dataset.unseen_classes)
    if dataset.has_seen_test:
        put_matrix("test_seen_features", dataset.X_test_seen)
        put_labels("test_seen_labels", dataset.labels_test_seen, dataset.seen_classes)
    if dataset.validation_classes:
        put_registry("validation_classes", dataset.validation_classes)

    manifest_path = directory / MANIFEST_NAME
    manifest_path.write_text("".join(f"{key}={value}\n" for key, value in entries.items()), encoding="utf-8")
    logger.info(f"データセットを保存しました: {manifest_path}")
    return manifest_path
