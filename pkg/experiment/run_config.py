"""
実行設定
config.py の既定値 < コマンドラインの指定 < --config のJSONファイル の順に上書きする
"""
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import config
from cdl.model import Hyperparams, Variant
from common.errors import ConfigError
from recognition.metrics import GZSL, ZSL
from recognition.recognizer import SpaceSelection

# ログ設定
logger = logging.getLogger(__name__)

ALL_SPACES = "all"
HYPERPARAM_KEYS = tuple(f.name for f in dataclasses.fields(Hyperparams))


def parse_selections(value) -> List[SpaceSelection]:
    """'all'、'v,a,va' のようなカンマ区切り、またはリストを空間の組のリストにする"""
    if isinstance(value, str):
        if value.strip().lower() == ALL_SPACES:
            return SpaceSelection.all()
        value = [part for part in value.split(",") if part.strip()]
    selections = [item if isinstance(item, SpaceSelection) else SpaceSelection.parse(item) for item in value]
    if not selections:
        raise ConfigError("no space selection given")
    unique = []
    for selection in selections:
        if selection not in unique:
            unique.append(selection)
    return unique


@dataclass
class RunConfig:
    """
    1回の実行の設定

    Attributes:
        dataset: データセットのマニフェスト
        hyperparams: ハイパーパラメータ
        variant: サブモデル
        spaces: 評価する空間の組
        mode: zsl または gzsl
        seed: 乱数シード
        output_dir: 出力ディレクトリ
        model_dir: 評価するモデル（省略時は output_dir/model）
        selection: グリッドサーチで順位付けに使う空間の組
        normalize: 特徴量を列ごとにL2正規化するか
    """
    dataset: Optional[str] = None
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    variant: Variant = Variant.CDL
    spaces: List[SpaceSelection] = field(default_factory=SpaceSelection.all)
    mode: str = ZSL
    seed: int = config.DEFAULT_SEED
    output_dir: str = config.DEFAULT_OUTPUT_DIR
    model_dir: Optional[str] = None
    selection: SpaceSelection = field(default_factory=lambda: SpaceSelection.parse(config.SELECTION_SPACES))
    normalize: bool = config.NORMALIZE_FEATURES
    export_matrices: bool = False
    heatmaps: bool = False
    timestamps: bool = config.REPORT_TIMESTAMPS
    workers: int = config.MAX_PARALLEL_WORKERS
    strict: bool = True

    def validate(self) -> "RunConfig":
        self.hyperparams.validate()
        if self.mode not in (ZSL, GZSL):
            raise ConfigError(f"unknown mode '{self.mode}'", choices=[ZSL, GZSL])
        if self.workers < 1:
            raise ConfigError("workers must be at least 1", workers=self.workers)
        if not self.spaces:
            raise ConfigError("no space selection given")
        return self

    @property
    def resolved_model_dir(self) -> Path:
        return Path(self.model_dir) if self.model_dir else Path(self.output_dir) / "model"

    def require_dataset(self) -> str:
        if not self.dataset:
            raise ConfigError("a dataset manifest is required (--dataset)")
        return self.dataset

    def check_dataset(self, dataset) -> None:
        """評価モードに必要なテスト分割があるか確認する"""
        if not dataset.has_unseen_test:
            raise ConfigError("evaluation needs an unseen-class test split", dataset=dataset.name)
        if self.mode == GZSL and not dataset.has_seen_test:
            raise ConfigError("gzsl mode requires a seen-class test split", dataset=dataset.name)

    def apply(self, overrides: Dict[str, object]) -> "RunConfig":
        """
        辞書の値で上書きする

        ハイパーパラメータは "hyperparams" の下にまとめても、トップレベルに直接書いてもよい。
        """
        overrides = dict(overrides)
        hp_changes = dict(overrides.pop("hyperparams", {}) or {})
        for key in HYPERPARAM_KEYS:
            if key in overrides:
                hp_changes[key] = overrides.pop(key)
        unknown_hp = sorted(set(hp_changes) - set(HYPERPARAM_KEYS))
        if unknown_hp:
            raise ConfigError(f"unknown hyperparameters: {unknown_hp}")

        fields = {f.name for f in dataclasses.fields(self)} - {"hyperparams"}
        unknown = sorted(set(overrides) - fields)
        if unknown:
            raise ConfigError(f"unknown run config keys: {unknown}")

        changes = {}
        for key, value in overrides.items():
            if key == "variant":
                value = Variant.parse(value)
            elif key == "spaces":
                value = parse_selections(value)
            elif key == "selection":
                value = SpaceSelection.parse(value)
            elif key == "mode":
                value = str(value).lower()
            changes[key] = value
        if hp_changes:
            changes["hyperparams"] = self.hyperparams.replace(**hp_changes)
        return dataclasses.replace(self, **changes).validate()

    def apply_file(self, path: str) -> "RunConfig":
        """JSONの設定ファイルで上書きする"""
        path = Path(path)
        if not path.is_file():
            raise ConfigError("run config file not found", path=str(path))
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"run config is not valid JSON: {e.msg}", path=str(path), line=e.lineno) from None
        if not isinstance(data, dict):
            raise ConfigError("run config must be a JSON object", path=str(path))
        logger.info(f"設定ファイルを適用します: {path}")
        return self.apply(data)

    def to_dict(self) -> Dict[str, object]:
        return {
            "dataset": self.dataset,
            "hyperparams": self.hyperparams.to_dict(),
            "variant": self.variant.value,
            "spaces": [s.label for s in self.spaces],
            "mode": self.mode,
            "seed": self.seed,
            "selection": self.selection.label,
            "normalize": self.normalize,
        }
