"""
Coupled Dictionary Learning
クラスプロトタイプの学習（初期化と交互最適化）
"""
