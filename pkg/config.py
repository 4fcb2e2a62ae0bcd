"""
設定ファイル
.env および環境変数から読み込む（python-dotenv）
"""
import os

from dotenv import load_dotenv

# .envがあれば環境変数に展開する（既存の環境変数は上書きしない）
load_dotenv()


def _env_float(key: str, default: float) -> float:
    return float(os.getenv(key, default))


def _env_int(key: str, default: int) -> int:
    return int(os.getenv(key, default))


def _env_bool(key: str, default: bool) -> bool:
    value = os.getenv(key)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


# 出力設定
DEFAULT_OUTPUT_DIR = os.getenv("CDL_OUTPUT_DIR", "runs")
REPORT_TIMESTAMPS = _env_bool("CDL_REPORT_TIMESTAMPS", True)

# ハイパーパラメータ既定値（λ, α, β, γ）
DEFAULT_LAMBDA = _env_float("CDL_LAMBDA", 1.0)
DEFAULT_ALPHA = _env_float("CDL_ALPHA", 0.1)
DEFAULT_BETA = _env_float("CDL_BETA", 1.0)
DEFAULT_GAMMA = _env_float("CDL_GAMMA", 0.01)

# 交互最適化の設定
MAX_ITERS = _env_int("CDL_MAX_ITERS", 100)
REL_TOL = _env_float("CDL_REL_TOL", 1e-7)
RIDGE_EPS = _env_float("CDL_RIDGE_EPS", 1e-10)
MONOTONE_SLACK = _env_float("CDL_MONOTONE_SLACK", 1e-8)

# 辞書更新（列ごとのブロック座標降下）
DICTIONARY_TOL = _env_float("CDL_DICTIONARY_TOL", 1e-9)
DICTIONARY_MAX_SWEEPS = _env_int("CDL_DICTIONARY_MAX_SWEEPS", 50)

# グリッドサーチ
HYPERPARAM_GRID = [0.001, 0.01, 0.1, 1.0, 10.0]
MAX_PARALLEL_WORKERS = _env_int("CDL_MAX_PARALLEL_WORKERS", 1)

# 評価設定
SELECTION_SPACES = os.getenv("CDL_SELECTION_SPACES", "va")
NORMALIZE_FEATURES = _env_bool("CDL_NORMALIZE_FEATURES", False)
DEFAULT_SEED = _env_int("CDL_SEED", 0)

# ログ設定
LOG_LEVEL = os.getenv("CDL_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_EVERY = _env_int("CDL_LOG_EVERY", 10)
