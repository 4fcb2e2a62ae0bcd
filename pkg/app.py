"""
CDL 実行結果ビューア
Streamlitアプリケーション（書き出し済みレポートの閲覧のみ）
"""
from pathlib import Path
from typing import List

import streamlit as st

import config
from common.errors import CdlError
from dataio.report import REPORT_FILE, ExportedRun, load_report


def find_runs(root: str) -> List[Path]:
    """
    ルート以下の report.json を含むディレクトリを探す

    Args:
        root: 検索するディレクトリ

    Returns:
        List[Path]: レポートのあるディレクトリ（名前順）
    """
    base = Path(root)
    if not base.is_dir():
        return []
    return sorted(path.parent for path in base.rglob(REPORT_FILE))


def display_summary(run: ExportedRun):
    """評価の概要を表示"""
    report = run.report
    best = report.best()
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("モード", report.mode.upper())
    with col2:
        st.metric("サブモデル", report.variant)
    with col3:
        st.metric("反復回数", run.training.get("iterations_run", 0))
    with col4:
        label = "最良の正解率" if report.mode == "zsl" else "最良の H"
        st.metric(f"{label}（{best.spaces}）", f"{best.score * 100:.1f}%")

    with st.expander("ハイパーパラメータ"):
        st.json(report.hyperparams)


def display_results(run: ExportedRun):
    """空間の組ごとの結果とクラス別の内訳を表示"""
    st.subheader("📊 空間の組ごとの結果")
    st.dataframe(run.report.rows(), use_container_width=True)

    labels = [result.spaces for result in run.report.results]
    selected = st.selectbox("クラス別の内訳を表示する組", labels)
    result = run.report.result(selected)
    col1, col2 = st.columns(2)
    with col1:
        st.markdown("**見えないクラス**")
        st.dataframe([{"class": k, "accuracy": v} for k, v in sorted(result.per_class.items())],
                     use_container_width=True)
    if result.per_class_seen:
        with col2:
            st.markdown("**見えるクラス**")
            st.dataframe([{"class": k, "accuracy": v} for k, v in sorted(result.per_class_seen.items())],
                         use_container_width=True)


def display_trace(run: ExportedRun):
    """損失の推移を表示"""
    st.subheader("📉 損失の推移")
    trace = run.trace
    if not trace.records:
        st.info("交互最適化は行われていません（初期化のみ）。")
        return
    st.line_chart({
        "total": [r.total for r in trace.records],
        "L_s": [r.l_s for r in trace.records],
        "L_u": [r.l_u for r in trace.records],
        "L_p": [r.l_p for r in trace.records],
    })
    st.caption(f"収束: {'はい' if trace.converged else 'いいえ'} / 最終損失 {trace.final_total:.6e}")


def display_structure(run: ExportedRun):
    """クラス構造のずれと行列のヒートマップを表示"""
    structure = run.extra.get("structure")
    if structure:
        st.subheader("🧭 クラス構造のずれ")
        col1, col2, col3, col4 = st.columns(4)
        with col1:
            st.metric("整列前 ‖S(P_s) − S(C_s)‖/K", f"{structure['gap_before']:.4f}")
        with col2:
            st.metric("視覚 ↔ 共有コード ‖S(P_s) − S(Z_s)‖/K", f"{structure.get('gap_visual', float('nan')):.4f}")
        with col3:
            st.metric("意味 ↔ 共有コード ‖S(C_s) − S(Z_s)‖/K", f"{structure.get('gap_semantic', float('nan')):.4f}")
        with col4:
            st.metric("整列後（大きい方）", f"{structure['gap_after']:.4f}",
                      delta=f"{structure['gap_after'] - structure['gap_before']:.4f}", delta_color="inverse")

    names = run.matrix_names()
    if not names:
        return
    st.subheader("🗺️ 行列")
    cols_per_row = 3
    images = [(name, run.heatmap_path(name)) for name in names if run.heatmap_path(name)]
    for i in range(0, len(images), cols_per_row):
        cols = st.columns(cols_per_row)
        for col, (name, path) in zip(cols, images[i:i + cols_per_row]):
            with col:
                st.image(str(path), caption=name, use_column_width=True)
    if not images:
        st.write("、".join(names))


def main():
    """
    メイン関数
    """
    st.set_page_config(
        page_title="CDL 実行結果ビューア",
        page_icon="🧩",
        layout="wide"
    )
    st.title("🧩 CDL 実行結果ビューア")

    root = st.sidebar.text_input("実行結果のディレクトリ", value=config.DEFAULT_OUTPUT_DIR)
    runs = find_runs(root)
    if not runs:
        st.warning(f"'{root}' にレポート（{REPORT_FILE}）が見つかりません。cli.py eval で書き出してください。")
        st.stop()

    selected = st.sidebar.selectbox("レポート", runs, format_func=lambda p: str(p.relative_to(root)))
    try:
        run = load_report(selected)
    except CdlError as e:
        st.error(f"レポートの読み込みに失敗しました: {e}")
        st.stop()

    st.caption(f"{run.report.dataset} / sha256 {run.content_sha256[:12]}"
               + (f" / {run.generated_at}" if run.generated_at else ""))
    display_summary(run)
    tab1, tab2, tab3 = st.tabs(["結果", "損失", "構造"])
    with tab1:
        display_results(run)
    with tab2:
        display_trace(run)
    with tab3:
        display_structure(run)


if __name__ == "__main__":
    main()
