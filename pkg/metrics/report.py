import logging
from dataclasses import asdict, dataclass
from typing import Optional

from django.conf import settings

from data.sets import SplitDataset
from hybrid.model import HybridModel
from qunlearn.exceptions import ConfigError
from train.loop import evaluate_loss
from .mia import mia_score
from .scores import ProbTable, accuracy, agreement, divergences, macro_f1, state_distance, uqi

logger = logging.getLogger(__name__)

# CSV columns a report contributes, in table order
REPORT_COLUMNS = (
    'acc_retain', 'acc_test', 'f1_test', 'acc_forget', 'uqi', 'agree_test', 'mia',
    'kl_retain', 'js_retain', 'kl_test', 'js_test', 'fidelity_mean',
)


@dataclass(frozen=True)
class MetricsReport:
    """
    One table row. ``mia`` is None for full-class scenarios.
    """
    acc_retain: float
    acc_test: float
    f1_test: float
    acc_forget: float
    uqi: float
    agree_test: float
    mia: Optional[float]
    kl_retain: float
    js_retain: float
    kl_test: float
    js_test: float
    fidelity_mean: float
    trace_mean: float
    utility_gap: float
    utility_ok: bool

    def as_row(self) -> dict:
        return {column: getattr(self, column) for column in REPORT_COLUMNS}

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(original: HybridModel, unlearned: HybridModel, oracle: HybridModel, splits: SplitDataset,
             seed: int = 0, epsilon: Optional[float] = None) -> MetricsReport:
    """
    Score an unlearned model against the trained model and the retrain oracle.

    Args:
        original: Model trained on the full training set
        unlearned: Output of an unlearning method
        oracle: Model retrained on the retain set only
        splits: Retain, forget and test sets
        seed: Seed of the membership-inference calibration halves
        epsilon: Allowed retain-loss increase for ``utility_ok``

    Returns:
        MetricsReport: every column, divergences taken as KL(unlearned || oracle)

    Raises:
        ConfigError: the models do not share an architecture
    """
    if not original.spec == unlearned.spec == oracle.spec:
        raise ConfigError('original, unlearned and oracle models must share one architecture')
    epsilon = settings.UTILITY_EPSILON if epsilon is None else epsilon
    retain, forget, test = splits.retain, splits.forget, splits.test

    acc_retain = accuracy(unlearned, retain)
    acc_forget = accuracy(unlearned, forget)
    quality = uqi(forget_original=accuracy(original, forget), forget_unlearned=acc_forget,
                  forget_oracle=accuracy(oracle, forget), retain_original=accuracy(original, retain),
                  retain_unlearned=acc_retain)

    unlearned_test, oracle_test = ProbTable.of(unlearned, test), ProbTable.of(oracle, test)
    kl_retain, js_retain = divergences(ProbTable.of(unlearned, retain), ProbTable.of(oracle, retain))
    kl_test, js_test = divergences(unlearned_test, oracle_test)
    fidelity_mean, trace_mean = state_distance(unlearned, oracle, test)
    mia = None if splits.spec.is_full_class else mia_score(unlearned, forget, test, retain, seed)
    gap = evaluate_loss(unlearned, retain) - evaluate_loss(original, splits.train)

    return MetricsReport(
        acc_retain=acc_retain,
        acc_test=accuracy(unlearned, test),
        f1_test=macro_f1(unlearned, test),
        acc_forget=acc_forget,
        uqi=quality,
        agree_test=agreement(unlearned_test, oracle_test),
        mia=mia,
        kl_retain=kl_retain,
        js_retain=js_retain,
        kl_test=kl_test,
        js_test=js_test,
        fidelity_mean=fidelity_mean,
        trace_mean=trace_mean,
        utility_gap=gap,
        utility_ok=bool(gap <= epsilon),
    )
