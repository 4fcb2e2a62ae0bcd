"""
交互最適化
初期化後、6つのブロック更新を損失が収束するまで繰り返す
"""
import dataclasses
import logging
from typing import Callable, List, Optional, Tuple

import config
from cdl.initializer import initialize, semantic_code
from cdl.model import CdlModel, Hyperparams, IterationRecord, LossTerms, TrainingTrace, Variant, loss_terms
from common.errors import DimensionError, MonotonicityError
from common.linalg_solvers import solve_dictionary, solve_joint_code, solve_prototype
from common.matrix import frobenius_sq

# ログ設定
logger = logging.getLogger(__name__)

STEP_NAMES = (
    "seen_prototypes",
    "seen_codes",
    "visual_dictionary",
    "semantic_dictionary",
    "unseen_codes",
    "unseen_prototypes",
)


def effective_hyperparams(hp: Hyperparams, variant: Variant) -> Hyperparams:
    """適応項を使わないサブモデルでは α = 0 として学習する"""
    if not variant.uses_adaptation:
        return hp.replace(alpha=0.0)
    return hp


class CoupledDictionaryLearner:
    """
    結合辞書学習の交互最適化を行うクラス
    """

    def __init__(self,
                 dataset,
                 hp: Hyperparams,
                 variant: Variant = Variant.CDL,
                 rng_seed: int = 0,
                 monotone_slack: float = config.MONOTONE_SLACK,
                 strict: bool = True):
        """
        初期化

        Args:
            dataset: 学習用データセット
            hp: ハイパーパラメータ
            variant: サブモデル
            rng_seed: 初期化の乱数シード
            monotone_slack: 損失増加を許容する相対誤差
            strict: 許容を超える損失増加を例外にするか（Falseなら警告のみ）
        """
        self.dataset = dataset
        self.variant = variant
        self.hp = effective_hyperparams(hp.validate(), variant)
        self.rng_seed = rng_seed
        self.monotone_slack = monotone_slack
        self.strict = strict

        self.X_s = dataset.X_s
        self.H = dataset.H
        self.C_s = dataset.C_s
        self.C_u = dataset.C_u

    def fit(self, initial_model: Optional[CdlModel] = None) -> CdlModel:
        """
        モデルを学習する

        Args:
            initial_model: 指定した場合は初期化の代わりにこのモデルから再開する

        Returns:
            CdlModel: 学習済みモデル
        """
        if initial_model is None:
            model = initialize(self.dataset, self.hp, self.rng_seed)
        else:
            model = self._check_initial(initial_model)

        if not self.variant.optimizes:
            logger.info("NA: 構造の整列を行わず初期化結果を返します")
            return dataclasses.replace(model, variant=self.variant, hyperparams=self.hp)

        self._load(model)
        trace = TrainingTrace(initial=self._terms())
        previous = trace.initial.total
        logger.info(f"{self.variant.value}: 交互最適化を開始します（初期損失 {previous:.6e}）")

        for iteration in range(1, self.hp.max_iters + 1):
            current = previous
            step_losses = {}
            for name, step in self._steps():
                extra_slack = step()
                terms = self._terms()
                self._check_monotone(name, iteration, current, terms.total, extra_slack)
                step_losses[name] = terms.total
                current = terms.total

            trace.records.append(IterationRecord(
                iteration=iteration, total=terms.total, l_s=terms.l_s, l_u=terms.l_u, l_p=terms.l_p,
                step_losses=step_losses,
            ))
            if iteration % config.LOG_EVERY == 0:
                logger.info(f"反復 {iteration}: 損失 {current:.6e}")
            logger.debug(f"反復 {iteration}: {step_losses}")

            if previous <= 0.0 or previous - current < self.hp.rel_tol * previous:
                trace.converged = True
                break
            previous = current

        if trace.converged:
            logger.info(f"{trace.iterations_run}回の反復で収束しました（損失 {trace.final_total:.6e}）")
        else:
            logger.info(f"最大反復回数 {self.hp.max_iters} に達しました（損失 {trace.final_total:.6e}）")

        if not self.variant.uses_adaptation:
            # 適応項なしでは Z_u, P_u が学習されないため、収束後の辞書から求め直す
            self.Z_u = semantic_code(self.D_2, self.C_u, self.hp.ridge_eps)
            self.P_u = self.D_1 @ self.Z_u

        return CdlModel(
            P_s=self.P_s, P_u=self.P_u, D_1=self.D_1, D_2=self.D_2, Z_s=self.Z_s, Z_u=self.Z_u,
            C_s=self.C_s.copy(), C_u=self.C_u.copy(),
            hyperparams=self.hp, variant=self.variant, trace=trace,
            seen_classes=tuple(self.dataset.seen_classes),
            unseen_classes=tuple(self.dataset.unseen_classes),
        )

    def _check_initial(self, model: CdlModel) -> CdlModel:
        model = dataclasses.replace(model, **{k: v.copy() for k, v in model.matrices().items()})
        model.check_consistency()
        if model.P_s.shape[0] != self.dataset.n_features or model.n_seen != self.dataset.n_seen:
            raise DimensionError("initial model does not match the dataset", pair="initial_model/X_s")
        if model.C_s.shape != self.C_s.shape or model.C_u.shape != self.C_u.shape:
            raise DimensionError("initial model semantics do not match the dataset", pair="initial_model/C")
        return model

    def _load(self, model: CdlModel) -> None:
        self.P_s = model.P_s.copy()
        self.P_u = model.P_u.copy()
        self.D_1 = model.D_1.copy()
        self.D_2 = model.D_2.copy()
        self.Z_s = model.Z_s.copy()
        self.Z_u = model.Z_u.copy()

    def _terms(self) -> LossTerms:
        return loss_terms(self.P_s, self.P_u, self.D_1, self.D_2, self.Z_s, self.Z_u,
                          self.C_s, self.C_u, self.X_s, self.H, self.hp)

    def _steps(self) -> List[Tuple[str, Callable[[], float]]]:
        updates = {
            "seen_prototypes": self.update_seen_prototypes,
            "seen_codes": self.update_seen_codes,
            "visual_dictionary": self.update_visual_dictionary,
            "semantic_dictionary": self.update_semantic_dictionary,
            "unseen_codes": self.update_unseen_codes,
            "unseen_prototypes": self.update_unseen_prototypes,
        }
        skipped = set()
        if not self.variant.learns_prototypes:
            skipped.add("seen_prototypes")
        if not self.variant.uses_adaptation:
            skipped.update(("unseen_codes", "unseen_prototypes"))
        return [(name, updates[name]) for name in STEP_NAMES if name not in skipped]

    def _check_monotone(self, step: str, iteration: int, before: float, after: float, extra_slack: float) -> None:
        allowed = before + self.monotone_slack * max(abs(before), 1.0) + extra_slack
        if after <= allowed:
            return
        message = f"loss increased in step '{step}'"
        if self.strict:
            raise MonotonicityError(message, iteration=iteration, before=before, after=after)
        logger.warning(f"反復 {iteration} のステップ {step} で損失が増加しました: {before:.6e} -> {after:.6e}")

    # 各ステップは目的関数を変えうるリッジ項の上限（許容する増加量）を返す

    def update_seen_prototypes(self) -> float:
        """(1) D_1, Z_s を固定して P_s を更新"""
        self.P_s = solve_prototype(self.D_1 @ self.Z_s, self.X_s, self.H, self.hp.beta)
        return 0.0

    def update_seen_codes(self) -> float:
        """(2) P_s, D_1, D_2 を固定して Z_s を更新"""
        extra = self.hp.ridge_eps * frobenius_sq(self.Z_s)
        self.Z_s = solve_joint_code(self.D_1, self.D_2, self.P_s, self.C_s, self.hp.lam, self.hp.ridge_eps)
        return extra

    def update_visual_dictionary(self) -> float:
        """(3) P_s, P_u, Z_s, Z_u を固定して D_1 を更新"""
        self.D_1 = solve_dictionary(
            [(self.P_s, self.Z_s, 1.0), (self.P_u, self.Z_u, self.hp.alpha)],
            initial=self.D_1, tol=self.hp.dictionary_tol, max_sweeps=self.hp.dictionary_max_sweeps,
        ).dictionary
        return 0.0

    def update_semantic_dictionary(self) -> float:
        """(4) Z_s, Z_u を固定して D_2 を更新"""
        self.D_2 = solve_dictionary(
            [(self.C_s, self.Z_s, 1.0), (self.C_u, self.Z_u, self.hp.alpha)],
            initial=self.D_2, tol=self.hp.dictionary_tol, max_sweeps=self.hp.dictionary_max_sweeps,
        ).dictionary
        return 0.0

    def update_unseen_codes(self) -> float:
        """(5) P_u, D_1, D_2 を固定して Z_u を更新"""
        extra = self.hp.alpha * self.hp.ridge_eps * frobenius_sq(self.Z_u)
        self.Z_u = solve_joint_code(self.D_1, self.D_2, self.P_u, self.C_u, self.hp.lam, self.hp.ridge_eps)
        return extra

    def update_unseen_prototypes(self) -> float:
        """(6) D_1, Z_u を固定して P_u = D_1·Z_u"""
        self.P_u = self.D_1 @ self.Z_u
        return 0.0


def fit(dataset, hp: Hyperparams, variant: Variant = Variant.CDL, rng_seed: int = 0,
        initial_model: Optional[CdlModel] = None) -> CdlModel:
    """初期化と交互最適化をまとめて実行する"""
    learner = CoupledDictionaryLearner(dataset, hp, variant=variant, rng_seed=rng_seed)
    return learner.fit(initial_model=initial_model)
