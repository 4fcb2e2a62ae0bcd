"""
Data I/O
データセット・モデル・レポートの読み書きと合成データの生成
"""
