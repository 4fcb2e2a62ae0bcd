"""
評価レポートの書き出しと読み込み

出力ディレクトリの構成:
    report.json   評価結果・学習の要約・ハッシュ
    trace.csv     反復ごとの損失（iteration 0 は初期値）
    matrices/     指定された行列（テキスト行列形式）
    heatmaps/     指定された行列のPNG
"""
import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

import config
from cdl.model import IterationRecord, LossTerms, TrainingTrace
from cdl.optimizer import STEP_NAMES
from common.errors import DataError
from dataio.heatmap import HeatmapRenderer
from dataio.matrix_io import PathLike, read_matrix, write_matrix
from recognition.metrics import EvalReport

# ログ設定
logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TRACE_FILE = "trace.csv"
MATRIX_DIR = "matrices"
HEATMAP_DIR = "heatmaps"
TRACE_COLUMNS = ("iteration", "total", "l_s", "l_u", "l_p") + STEP_NAMES


@dataclass
class ExportedRun:
    """書き出し済みレポートの読み込み結果"""
    path: Path
    report: EvalReport
    training: Dict[str, object]
    trace: TrainingTrace
    extra: Dict[str, object] = field(default_factory=dict)
    content_sha256: str = ""
    generated_at: Optional[str] = None

    def matrix_names(self) -> List[str]:
        directory = self.path / MATRIX_DIR
        return sorted(p.stem for p in directory.glob("*.txt")) if directory.is_dir() else []

    def matrix(self, name: str) -> np.ndarray:
        return read_matrix(self.path / MATRIX_DIR / f"{name}.txt")

    def heatmap_path(self, name: str) -> Optional[Path]:
        path = self.path / HEATMAP_DIR / f"{name}.png"
        return path if path.is_file() else None


def training_summary(trace: TrainingTrace) -> Dict[str, object]:
    return {
        "iterations_run": trace.iterations_run,
        "converged": trace.converged,
        "initial_total": trace.initial.total if trace.initial else None,
        "final_total": trace.final_total,
    }


def content_hash(content: Dict[str, object]) -> str:
    """生成時刻を含まない内容の正規化JSONに対するSHA-256"""
    canonical = json.dumps(content, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def export_report(report: EvalReport,
                  trace: TrainingTrace,
                  path: PathLike,
                  matrices: Optional[Dict[str, np.ndarray]] = None,
                  heatmaps: bool = False,
                  extra: Optional[Dict[str, object]] = None,
                  timestamps: bool = config.REPORT_TIMESTAMPS) -> Path:
    """
    評価レポートと損失の履歴を書き出す

    Args:
        report: 評価レポート
        trace: 学習履歴
        path: 出力ディレクトリ
        matrices: 書き出す行列（名前 -> 行列）
        heatmaps: 行列のヒートマップPNGも書き出すか
        extra: report.json に追加する項目（構造分析など）
        timestamps: 生成時刻を記録するか（ハッシュには含めない）

    Returns:
        Path: report.json のパス
    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)

    content = {
        "report": report.to_dict(),
        "training": training_summary(trace),
        "extra": extra or {},
    }
    payload = dict(content)
    payload["content_sha256"] = content_hash(content)
    if timestamps:
        payload["generated_at"] = datetime.now().isoformat(timespec="seconds")

    report_path = directory / REPORT_FILE
    report_path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_trace_csv(trace, directory / TRACE_FILE)

    if matrices:
        renderer = HeatmapRenderer() if heatmaps else None
        for name, matrix in sorted(matrices.items()):
            write_matrix(directory / MATRIX_DIR / f"{name}.txt", matrix)
            if renderer is not None:
                renderer.save(matrix, directory / HEATMAP_DIR / f"{name}.png")

    logger.info(f"レポートを書き出しました: {report_path}")
    return report_path


def load_report(path: PathLike) -> ExportedRun:
    """
    書き出し済みレポートを読み込む

    Args:
        path: 出力ディレクトリ（または report.json のパス）
    """
    report_path = Path(path)
    if report_path.is_dir():
        report_path = report_path / REPORT_FILE
    if not report_path.is_file():
        raise DataError("report file not found", path=str(report_path))
    try:
        payload = json.loads(report_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"report is not valid JSON: {e.msg}", path=str(report_path), location=f"line {e.lineno}") from None

    trace_path = report_path.parent / TRACE_FILE
    trace = read_trace_csv(trace_path) if trace_path.is_file() else TrainingTrace()
    trace.converged = bool(payload.get("training", {}).get("converged", False))
    return ExportedRun(
        path=report_path.parent,
        report=EvalReport.from_dict(payload["report"]),
        training=payload.get("training", {}),
        trace=trace,
        extra=payload.get("extra", {}),
        content_sha256=payload.get("content_sha256", ""),
        generated_at=payload.get("generated_at"),
    )


def write_trace_csv(trace: TrainingTrace, path: PathLike) -> Path:
    """損失の履歴をCSVに書き出す（値は repr で書くため読み戻すと一致する）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        if trace.initial is not None:
            writer.writerow([0] + [repr(float(v)) for v in (trace.initial.total, trace.initial.l_s,
                                                           trace.initial.l_u, trace.initial.l_p)]
                            + [""] * len(STEP_NAMES))
        for record in trace.records:
            steps = [repr(float(record.step_losses[s])) if s in record.step_losses else "" for s in STEP_NAMES]
            writer.writerow([record.iteration, repr(float(record.total)), repr(float(record.l_s)),
                             repr(float(record.l_u)), repr(float(record.l_p))] + steps)
    return path


def read_trace_csv(path: PathLike) -> TrainingTrace:
    """trace.csv を読み込む（収束したかどうかは含まれない）"""
    path = Path(path)
    trace = TrainingTrace()
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in TRACE_COLUMNS[:5] if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"trace is missing columns {missing}", path=str(path), location="line 1")
        for line_number, row in enumerate(reader, start=2):
            try:
                iteration = int(row["iteration"])
                terms = [float(row[c]) for c in ("total", "l_s", "l_u", "l_p")]
            except ValueError:
                raise DataError("invalid trace row", path=str(path), location=f"line {line_number}") from None
            if iteration == 0:
                trace.initial = LossTerms(*terms)
                continue
            steps = {s: float(row[s]) for s in STEP_NAMES if row.get(s)}
            trace.records.append(IterationRecord(iteration, *terms, step_losses=steps))
    return trace
