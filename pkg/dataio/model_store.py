"""
学習済みモデルの保存と読み込み
モデルディレクトリは model.json と各行列のバイナリファイルからなる
"""
import json
import logging
from pathlib import Path

from cdl.model import CdlModel, Hyperparams, TrainingTrace, Variant
from common.errors import DataError
from dataio.matrix_io import PathLike, read_matrix, write_matrix

# ログ設定
logger = logging.getLogger(__name__)

MODEL_FILE = "model.json"
FORMAT_VERSION = 1


def save_model(model: CdlModel, directory: PathLike) -> Path:
    """
    モデルをディレクトリに保存する

    Args:
        model: 保存するモデル
        directory: 出力ディレクトリ

    Returns:
        Path: model.json のパス
    """
    model.check_consistency()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, matrix in model.matrices().items():
        files[name] = f"{name}.bin"
        write_matrix(directory / files[name], matrix)

    meta = {
        "format_version": FORMAT_VERSION,
        "variant": model.variant.value,
        "hyperparams": model.hyperparams.to_dict(),
        "seen_classes": list(model.seen_classes),
        "unseen_classes": list(model.unseen_classes),
        "matrices": files,
        "trace": model.trace.to_dict(),
    }
    path = directory / MODEL_FILE
    path.write_text(json.dumps(meta, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"モデルを保存しました: {directory}")
    return path


def load_model(directory: PathLike) -> CdlModel:
    """
    保存済みモデルを読み込む

    Args:
        directory: モデルディレクトリ（または model.json のパス）

    Returns:
        CdlModel: 読み込んだモデル
    """
    path = Path(directory)
    if path.is_dir():
        path = path / MODEL_FILE
    if not path.is_file():
        raise DataError("model file not found", path=str(path))
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"model file is not valid JSON: {e.msg}", path=str(path), location=f"line {e.lineno}") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataError("unsupported model format version", path=str(path), version=meta.get("format_version"))

    files = meta.get("matrices", {})
    missing = [name for name in CdlModel.MATRIX_FIELDS if name not in files]
    if missing:
        raise DataError(f"model file lists no matrices for {missing}", path=str(path))
    matrices = {name: read_matrix(path.parent / files[name]) for name in CdlModel.MATRIX_FIELDS}

    model = CdlModel(
        **matrices,
        hyperparams=Hyperparams.from_dict(meta["hyperparams"]),
        variant=Variant.parse(meta.get("variant", Variant.CDL.value)),
        trace=TrainingTrace.from_dict(meta.get("trace") or {}),
        seen_classes=tuple(meta.get("seen_classes", ())),
        unseen_classes=tuple(meta.get("unseen_classes", ())),
    )
    model.check_consistency()
    logger.info(f"モデルを読み込みました: {path.parent} ({model.variant.value}, K={model.n_seen}, L={model.n_unseen})")
    return model
