"""
Recognition
視覚・整列・意味空間での最近傍プロトタイプ認識と評価指標
"""
