"""
Common Components
学習・認識・入出力で共通に使用するコンポーネント
"""
