"""
CDL ゼロショット認識 コマンドラインツール

使い方:
    python cli.py synth --output data/planted
    python cli.py train --dataset data/planted/manifest.txt --output runs/planted
    python cli.py eval --dataset data/planted/manifest.txt --output runs/planted --mode zsl
"""
import argparse
import json
import logging
import sys
from typing import Dict, List, Optional

import config
from cdl.model import Variant
from common.errors import CdlError
from experiment.commands import (
    SynthParams,
    cmd_ablate,
    cmd_eval,
    cmd_gridsearch,
    cmd_import_xlsa,
    cmd_synth,
    cmd_train,
    cmd_validate_data,
)
from experiment.run_config import RunConfig

logger = logging.getLogger("cdl")

# コマンドライン引数名 -> RunConfig / Hyperparams のキー
RUN_FLAGS = {
    "dataset": "dataset",
    "output": "output_dir",
    "model": "model_dir",
    "variant": "variant",
    "spaces": "spaces",
    "mode": "mode",
    "seed": "seed",
    "selection": "selection",
    "workers": "workers",
    "lam": "lam",
    "alpha": "alpha",
    "beta": "beta",
    "gamma": "gamma",
    "n_b": "n_b",
    "max_iters": "max_iters",
    "rel_tol": "rel_tol",
    "ridge_eps": "ridge_eps",
}


def _add_run_arguments(parser: argparse.ArgumentParser, dataset_help: str = "データセットのマニフェスト") -> None:
    parser.add_argument("--dataset", help=dataset_help)
    parser.add_argument("--config", help="JSONの実行設定（コマンドラインの指定を上書きする）")
    parser.add_argument("--output", help=f"出力ディレクトリ（既定: {config.DEFAULT_OUTPUT_DIR}）")
    parser.add_argument("--model", help="モデルディレクトリ（既定: <output>/model）")
    parser.add_argument("--variant", choices=[v.value for v in Variant], help="サブモデル")
    parser.add_argument("--spaces", help="評価する空間の組（all または v,a,s,va など）")
    parser.add_argument("--mode", choices=["zsl", "gzsl"], help="評価モード")
    parser.add_argument("--seed", type=int, help="乱数シード")
    parser.add_argument("--selection", help=f"順位付けに使う空間の組（既定: {config.SELECTION_SPACES}）")
    parser.add_argument("--workers", type=int, help="グリッドサーチの並列ワーカー数")
    parser.add_argument("--lambda", dest="lam", type=float, help="λ（視覚と意味のバランス）")
    parser.add_argument("--alpha", type=float, help="α（ドメイン適応項の重み）")
    parser.add_argument("--beta", type=float, help="β（プロトタイプ学習項の重み）")
    parser.add_argument("--gamma", type=float, help="γ（テスト時の符号化のリッジ係数）")
    parser.add_argument("--n-b", dest="n_b", type=int, help="辞書の基底数（既定: 見えるクラス数）")
    parser.add_argument("--max-iters", dest="max_iters", type=int, help="最大反復回数")
    parser.add_argument("--rel-tol", dest="rel_tol", type=float, help="収束判定の相対閾値")
    parser.add_argument("--ridge-eps", dest="ridge_eps", type=float, help="正規方程式のリッジ項")
    parser.add_argument("--normalize", action="store_true", default=None, help="特徴量を列ごとにL2正規化する")
    parser.add_argument("--export-matrices", action="store_true", default=None, help="行列を書き出す")
    parser.add_argument("--heatmaps", action="store_true", default=None, help="行列のヒートマップPNGを書き出す")
    parser.add_argument("--no-timestamps", action="store_true", help="レポートに生成時刻を記録しない")
    parser.add_argument("--no-strict", action="store_true", help="損失の増加を例外にせず警告にする")


def _add_synth_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d", type=int, default=20, help="視覚特徴の次元")
    parser.add_argument("--m", type=int, default=12, help="意味ベクトルの次元")
    parser.add_argument("--K", type=int, default=8, help="見えるクラス数")
    parser.add_argument("--L", type=int, default=4, help="見えないクラス数")
    parser.add_argument("--samples-per-class", type=int, default=10, help="クラスごとの学習サンプル数")
    parser.add_argument("--noise", type=float, default=0.0, help="サンプル雑音の標準偏差")
    parser.add_argument("--semantic-noise", type=float, default=0.0, help="意味ベクトルの雑音")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdl", description="結合辞書学習によるゼロショット認識")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_arguments(sub.add_parser("train", help="学習してモデルを保存する"))
    _add_run_arguments(sub.add_parser("eval", help="保存済みモデルを評価する"))

    grid = sub.add_parser("gridsearch", help="検証分割でハイパーパラメータを探索する")
    _add_run_arguments(grid)
    grid.add_argument("--grid", help='探索範囲（例: "lam=0.1,1;beta=1"、省略したパラメータは既定の5点）')

    ablate = sub.add_parser("ablate", help="サブモデルを比較する")
    _add_run_arguments(ablate, dataset_help="データセットのマニフェスト（省略時は合成データ）")
    _add_synth_arguments(ablate)
    ablate.add_argument("--seeds", type=int, default=10, help="合成データのシード数")

    synth = sub.add_parser("synth", help="合成データを生成する")
    _add_synth_arguments(synth)
    synth.add_argument("--output", required=True, help="出力ディレクトリ")
    synth.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="乱数シード")
    synth.add_argument("--test-samples-per-class", type=int, help="クラスごとのテストサンプル数")
    synth.add_argument("--n-validation", type=int, help="検証クラス数")
    synth.add_argument("--binary", action="store_true", help="行列をバイナリ形式で保存する")

    validate = sub.add_parser("validate-data", help="データセットを検証する")
    validate.add_argument("--dataset", required=True, help="データセットのマニフェスト")
    validate.add_argument("--mode", choices=["zsl", "gzsl"], default="zsl", help="想定する評価モード")

    xlsa = sub.add_parser("import-xlsa", help="公開分割（res101.mat / att_splits.mat）を変換する")
    xlsa.add_argument("archive", help="res101.mat と att_splits.mat を含むディレクトリ")
    xlsa.add_argument("--output", required=True, help="出力ディレクトリ")
    xlsa.add_argument("--name", help="データセット名")
    xlsa.add_argument("--text", action="store_true", help="行列をテキスト形式で保存する")
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """既定値 < コマンドライン < 設定ファイル の順で実行設定を作る"""
    overrides: Dict[str, object] = {}
    for flag, key in RUN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for flag, key in (("normalize", "normalize"), ("export_matrices", "export_matrices"), ("heatmaps", "heatmaps")):
        if getattr(args, flag, None):
            overrides[key] = True
    if getattr(args, "no_timestamps", False):
        overrides["timestamps"] = False
    if getattr(args, "no_strict", False):
        overrides["strict"] = False

    cfg = RunConfig().apply(overrides)
    if getattr(args, "config", None):
        cfg = cfg.apply_file(args.config)
    return cfg


def _synth_params(args: argparse.Namespace, output: str) -> SynthParams:
    return SynthParams(
        output=output, d=args.d, m=args.m, K=args.K, L=args.L,
        samples_per_class=args.samples_per_class, noise=args.noise, semantic_noise=args.semantic_noise,
        test_samples_per_class=getattr(args, "test_samples_per_class", None),
        n_validation=getattr(args, "n_validation", None),
        seed=config.DEFAULT_SEED if getattr(args, "seed", None) is None else args.seed,
        binary=getattr(args, "binary", False),
    )


def run(args: argparse.Namespace) -> None:
    """サブコマンドを実行し、結果の場所を標準出力に書く"""
    if args.command == "synth":
        print(cmd_synth(_synth_params(args, args.output)))
    elif args.command == "import-xlsa":
        print(cmd_import_xlsa(args.archive, args.output, name=args.name, binary=not args.text))
    elif args.command == "validate-data":
        cfg = RunConfig(dataset=args.dataset, mode=args.mode)
        print(json.dumps(cmd_validate_data(cfg), ensure_ascii=False, sort_keys=True))
    else:
        cfg = run_config_from_args(args)
        if args.command == "train":
            print(cmd_train(cfg))
        elif args.command == "eval":
            print(cmd_eval(cfg))
        elif args.command == "gridsearch":
            print(cmd_gridsearch(cfg, args.grid))
        elif args.command == "ablate":
            seeds = list(range(cfg.seed, cfg.seed + args.seeds))
            print(cmd_ablate(cfg, seeds, _synth_params(args, cfg.output_dir)))


def main(argv: Optional[List[str]] = None) -> int:
    """
    エントリーポイント

    Returns:
        int: 終了コード（0 成功、2 設定、3 データ、4 単調性、5 ソルバー、1 その他）
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
    try:
        run(args)
    except CdlError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception:
        logger.exception("予期しないエラーが発生しました")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
