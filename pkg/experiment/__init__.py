"""
Experiment
学習・評価・グリッドサーチ・アブレーションの実行
"""
