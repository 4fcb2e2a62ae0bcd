"""
例外クラス
CLIの終了コードと対応づけた構造化エラー
"""
from typing import Any, Dict, Optional


class CdlError(Exception):
    """
    全エラーの基底クラス

    Attributes:
        exit_code: CLIが返す終了コード
        details: エラー箇所などの構造化情報
    """

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = {k: v for k, v in details.items() if v is not None}

    def __str__(self) -> str:
        if not self.details:
            return self.message
        context = ", ".join(f"{key}={value}" for key, value in self.details.items())
        return f"{self.message} ({context})"


class ConfigError(CdlError, ValueError):
    """ハイパーパラメータ・実行設定の不正"""

    exit_code = 2


class NotFittedError(CdlError, RuntimeError):
    """学習済みでないモデルで認識しようとした"""

    exit_code = 2


class DataError(CdlError, ValueError):
    """データセット・マニフェスト・行列ファイルの不正"""

    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, location: Optional[str] = None, **details: Any):
        super().__init__(message, path=path, location=location, **details)
        self.path = path
        self.location = location


class DimensionError(DataError):
    """行列の次元が合わない（問題のある組を名前で示す）"""

    def __init__(self, message: str, pair: Optional[str] = None, **details: Any):
        super().__init__(message, pair=pair, **details)
        self.pair = pair


class MonotonicityError(CdlError, AssertionError):
    """交互最適化で損失が増加した（実装不具合の兆候）"""

    exit_code = 4


class SolverError(CdlError, ArithmeticError):
    """線形方程式が解けない"""

    exit_code = 5
