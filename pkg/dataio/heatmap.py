"""
行列のヒートマップ画像の作成
プロトタイプ行列や類似度行列をPNGとして書き出す
"""
import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw

from dataio.matrix_io import PathLike

# ログ設定
logger = logging.getLogger(__name__)


class HeatmapRenderer:
    """
    行列をヒートマップ画像に変換するクラス

    0を白とし、正の値を赤、負の値を青へ線形に補間する。
    """

    def __init__(self,
                 positive_color: str = "#FF6B6B",  # 赤
                 negative_color: str = "#45B7D1",  # 青
                 cell_size: int = 8,
                 max_side: int = 2048):
        """
        初期化

        Args:
            positive_color: 最大値の色
            negative_color: 最小値の色
            cell_size: 1要素あたりのピクセル数
            max_side: 画像の一辺の上限（超える場合はセルを縮める）
        """
        self.positive = np.array(self._hex_to_rgb(positive_color), dtype=np.float64)
        self.negative = np.array(self._hex_to_rgb(negative_color), dtype=np.float64)
        self.cell_size = cell_size
        self.max_side = max_side

    def render(self, matrix: np.ndarray, scale: Optional[float] = None) -> Image.Image:
        """
        行列を画像にする

        Args:
            matrix: 2次元配列
            scale: 色の飽和する絶対値（省略時は行列の最大絶対値）

        Returns:
            PIL.Image: RGB画像
        """
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if scale is None:
            scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
        t = np.clip(matrix / scale, -1.0, 1.0) if scale > 0 else np.zeros_like(matrix)

        white = np.full(3, 255.0)
        pos = t[..., None].clip(min=0.0)
        neg = (-t[..., None]).clip(min=0.0)
        rgb = white + pos * (self.positive - white) + neg * (self.negative - white)
        image = Image.fromarray(np.rint(rgb).astype(np.uint8), mode="RGB")

        rows, cols = matrix.shape
        cell = max(1, min(self.cell_size, self.max_side // max(rows, cols)))
        image = image.resize((cols * cell, rows * cell), resample=Image.NEAREST)
        if cell >= 4:
            self._draw_border(image)
        return image

    def save(self, matrix: np.ndarray, path: PathLike, scale: Optional[float] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.render(matrix, scale).save(path, format="PNG")
        logger.debug(f"ヒートマップを保存しました: {path}")
        return path

    def _draw_border(self, image: Image.Image) -> None:
        draw = ImageDraw.Draw(image)
        width, height = image.size
        draw.rectangle([(0, 0), (width - 1, height - 1)], outline=(120, 120, 120))

    def _hex_to_rgb(self, hex_color: str) -> Tuple[int, int, int]:
        """
        16進数カラーをRGBに変換

        Args:
            hex_color: 16進数カラー文字列 (例: "#FF6B6B")
        """
        hex_color = hex_color.lstrip('#')
        if len(hex_color) != 6:
            return (255, 0, 0)  # デフォルトは赤
        return (int(hex_color[0:2], 16), int(hex_color[2:4], 16), int(hex_color[4:6], 16))
