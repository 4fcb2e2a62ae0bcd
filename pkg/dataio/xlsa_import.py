"""
公開ベンチマーク分割（res101.mat / att_splits.mat）の取り込み

res101.mat:     features（2048 × N の画像特徴）, labels（1始まりのクラス番号）
att_splits.mat: att（属性 × クラス）, allclasses_names,
                trainval_loc / val_loc / test_seen_loc / test_unseen_loc（1始まりのサンプル番号）

見えるクラス = trainval_loc のクラス、検証クラス = val_loc のクラス、
見えないクラス = test_unseen_loc のクラス、見えるクラスのテスト = test_seen_loc。
特徴量の前処理は公開分割のものをそのまま使う。
"""
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy.io import loadmat

from common.errors import DataError
from dataio.dataset import Dataset, save_dataset
from dataio.matrix_io import PathLike

# ログ設定
logger = logging.getLogger(__name__)

FEATURE_FILE = "res101.mat"
SPLIT_FILE = "att_splits.mat"
SPLIT_KEYS = ("att", "trainval_loc", "test_seen_loc", "test_unseen_loc")


def _load_mat(path: Path) -> dict:
    if not path.is_file():
        raise DataError("archive not found", path=str(path))
    try:
        return loadmat(str(path))
    except (ValueError, NotImplementedError, OSError) as e:
        raise DataError(f"cannot read MATLAB archive: {e}", path=str(path)) from None


def _cell_strings(cell) -> List[str]:
    """MATLABのセル配列から文字列のリストを取り出す"""
    names = []
    for item in np.asarray(cell, dtype=object).ravel():
        while isinstance(item, np.ndarray):
            item = item.ravel()[0] if item.size else ""
        names.append(str(item).strip())
    return names


def _locations(splits: dict, key: str, n_samples: int, path: Path) -> np.ndarray:
    loc = np.asarray(splits[key]).ravel().astype(np.int64) - 1
    if loc.size and (loc.min() < 0 or loc.max() >= n_samples):
        raise DataError(f"{key} refers to samples outside the feature archive", path=str(path), location=key)
    return loc


def import_xlsa(archive_dir: PathLike, name: Optional[str] = None) -> Dataset:
    """
    公開分割のディレクトリからデータセットを作る

    Args:
        archive_dir: res101.mat と att_splits.mat を含むディレクトリ
        name: データセット名（省略時はディレクトリ名）

    Returns:
        Dataset: 検証済みデータセット
    """
    archive_dir = Path(archive_dir)
    feature_path = archive_dir / FEATURE_FILE
    split_path = archive_dir / SPLIT_FILE
    logger.info(f"公開分割を読み込みます: {archive_dir}")
    res = _load_mat(feature_path)
    splits = _load_mat(split_path)
    for key in ("features", "labels"):
        if key not in res:
            raise DataError(f"feature archive has no '{key}'", path=str(feature_path))
    missing = [key for key in SPLIT_KEYS if key not in splits]
    if missing:
        raise DataError(f"split archive is missing {missing}", path=str(split_path))

    labels = np.asarray(res["labels"]).ravel().astype(np.int64) - 1
    features = np.asarray(res["features"], dtype=np.float64)
    if features.shape[1] != labels.size and features.shape[0] == labels.size:
        features = features.T
    if features.shape[1] != labels.size:
        raise DataError(f"{features.shape[1]} feature columns for {labels.size} labels", path=str(feature_path))

    att = np.asarray(splits["att"], dtype=np.float64)
    n_classes = att.shape[1]
    if "allclasses_names" in splits:
        all_names = _cell_strings(splits["allclasses_names"])
    else:
        all_names = [f"class_{c:03d}" for c in range(n_classes)]
    if len(all_names) != n_classes:
        raise DataError("class names do not match attribute columns", path=str(split_path))

    n_samples = labels.size
    trainval = _locations(splits, "trainval_loc", n_samples, split_path)
    test_seen = _locations(splits, "test_seen_loc", n_samples, split_path)
    test_unseen = _locations(splits, "test_unseen_loc", n_samples, split_path)

    seen_ids = np.unique(labels[trainval])
    unseen_ids = np.unique(labels[test_unseen])
    if np.intersect1d(seen_ids, unseen_ids).size:
        raise DataError("trainval and test_unseen classes overlap", path=str(split_path))
    seen_index = {int(c): k for k, c in enumerate(seen_ids)}
    unseen_index = {int(c): l for l, c in enumerate(unseen_ids)}
    seen_names = tuple(all_names[int(c)] for c in seen_ids)
    unseen_names = tuple(all_names[int(c)] for c in unseen_ids)

    validation = ()
    if "val_loc" in splits:
        val_ids = np.unique(labels[_locations(splits, "val_loc", n_samples, split_path)])
        validation = tuple(all_names[int(c)] for c in val_ids if int(c) in seen_index)

    dataset = Dataset(
        X_s=features[:, trainval],
        labels_s=np.array([seen_index[int(c)] for c in labels[trainval]], dtype=np.int64),
        C_s=att[:, seen_ids],
        C_u=att[:, unseen_ids],
        seen_classes=seen_names,
        unseen_classes=unseen_names,
        X_test_unseen=features[:, test_unseen],
        labels_test_unseen=np.array([unseen_index[int(c)] for c in labels[test_unseen]], dtype=np.int64),
        X_test_seen=features[:, test_seen],
        labels_test_seen=np.array([seen_index[int(c)] for c in labels[test_seen]], dtype=np.int64),
        validation_classes=validation,
        name=name or archive_dir.name,
        source=str(split_path),
    ).validate()
    logger.info(f"公開分割を変換しました: {dataset.summary()}")
    return dataset


def convert_xlsa(archive_dir: PathLike, output_dir: PathLike, name: Optional[str] = None,
                 binary: bool = True) -> Path:
    """公開分割をマニフェスト形式に変換して保存する"""
    return save_dataset(import_xlsa(archive_dir, name), output_dir, binary=binary)
