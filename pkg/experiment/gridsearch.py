"""
ハイパーパラメータのグリッドサーチ

検証クラスを疑似的な見えないクラスとして残りの見えるクラスで学習し、
検証クラスでのクラス平均top-1正解率で (λ, α, β, γ) を順位付けする。
"""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import config
from cdl.model import Hyperparams, Variant
from cdl.optimizer import fit
from common.errors import ConfigError, SolverError
from experiment.evaluation import evaluate_zsl
from recognition.recognizer import SpaceSelection

# ログ設定
logger = logging.getLogger(__name__)

GRID_PARAMS = ("lam", "alpha", "beta", "gamma")


@dataclass(frozen=True)
class GridPoint:
    index: int
    lam: float
    alpha: float
    beta: float
    gamma: float

    def hyperparams(self, base: Hyperparams) -> Hyperparams:
        return base.replace(lam=self.lam, alpha=self.alpha, beta=self.beta, gamma=self.gamma)


@dataclass
class GridRow:
    """グリッドの1点の結果（失敗した点は accuracy が None）"""
    point: GridPoint
    accuracy: Optional[float]
    iterations: int = 0
    converged: bool = False
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "index": self.point.index,
            "lam": self.point.lam,
            "alpha": self.point.alpha,
            "beta": self.point.beta,
            "gamma": self.point.gamma,
            "accuracy": self.accuracy,
            "iterations": self.iterations,
            "converged": self.converged,
            "error": self.error,
        }


def parse_grid_spec(spec: Optional[str]) -> Dict[str, List[float]]:
    """
    "lam=0.1,1;beta=1" の形式を解釈する

    指定しなかったパラメータは config.HYPERPARAM_GRID の全範囲を使う。
    """
    grid = {name: list(config.HYPERPARAM_GRID) for name in GRID_PARAMS}
    if not spec:
        return grid
    for part in spec.split(";"):
        if not part.strip():
            continue
        name, sep, values = part.partition("=")
        name = name.strip()
        if not sep or name not in GRID_PARAMS:
            raise ConfigError(f"invalid grid entry '{part.strip()}'", choices=list(GRID_PARAMS))
        try:
            parsed = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"invalid grid values for {name}: '{values}'") from None
        if not parsed:
            raise ConfigError(f"grid for {name} is empty")
        grid[name] = parsed
    return grid


def grid_points(grid: Dict[str, Sequence[float]]) -> List[GridPoint]:
    """λ, α, β, γ の直積（λ が最も外側のループ）"""
    return [GridPoint(index, *values)
            for index, values in enumerate(itertools.product(*(grid[name] for name in GRID_PARAMS)))]


def evaluate_point(split, base: Hyperparams, variant: Variant, point: GridPoint,
                   selection: SpaceSelection, seed: int) -> GridRow:
    """検証分割で1点を学習・評価する（ワーカープロセスで実行される）"""
    hp = point.hyperparams(base)
    try:
        model = fit(split, hp, variant=variant, rng_seed=seed)
    except SolverError as e:
        logger.warning(f"グリッド点 {point.index} の学習に失敗しました: {e}")
        return GridRow(point=point, accuracy=None, error=str(e))
    accuracy = evaluate_zsl(model, split, [selection]).results[0].accuracy
    return GridRow(point=point, accuracy=accuracy, iterations=model.trace.iterations_run,
                   converged=model.trace.converged)


def rank_rows(rows: Sequence[GridRow]) -> List[GridRow]:
    """正解率の高い順、同点はグリッド上の順番（失敗した点は最後）"""
    return sorted(rows, key=lambda r: (r.accuracy is None, -(r.accuracy or 0.0), r.point.index))


def run_grid_search(dataset, base: Hyperparams, points: Sequence[GridPoint],
                    variant: Variant = Variant.CDL,
                    selection: Optional[SpaceSelection] = None,
                    seed: int = config.DEFAULT_SEED,
                    workers: int = config.MAX_PARALLEL_WORKERS) -> List[GridRow]:
    """
    グリッドサーチを実行する

    Args:
        dataset: 検証クラスを定義したデータセット
        base: グリッド外のハイパーパラメータ
        points: 評価するグリッド点
        variant: サブモデル
        selection: 順位付けに使う空間の組
        seed: 乱数シード
        workers: 並列ワーカー数（1なら逐次実行）

    Returns:
        List[GridRow]: 順位付けした結果
    """
    if not points:
        raise ConfigError("grid is empty")
    selection = selection or SpaceSelection.parse(config.SELECTION_SPACES)
    split = dataset.validation_split()
    logger.info(f"グリッドサーチを開始します: {len(points)}点, 検証クラス {split.n_unseen}, ワーカー {workers}")

    if workers <= 1:
        rows = [evaluate_point(split, base, variant, point, selection, seed) for point in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(evaluate_point, split, base, variant, point, selection, seed)
                       for point in points]
            # 結果は投入順に集めるため並列数によらず同じ表になる
            rows = [future.result() for future in futures]

    ranked = rank_rows(rows)
    best = ranked[0]
    if best.accuracy is None:
        raise SolverError("every grid point failed")
    logger.info(f"最良の点: λ={best.point.lam}, α={best.point.alpha}, β={best.point.beta}, "
                f"γ={best.point.gamma}（検証正解率 {best.accuracy:.4f}）")
    return ranked
