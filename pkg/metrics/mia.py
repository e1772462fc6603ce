"""Loss-threshold membership inference."""
import logging

import numpy as np

from data.sets import LabeledSet
from diffcore.ops import PROB_CLAMP
from hybrid.model import HybridModel, predict
from qunlearn.exceptions import InvalidInputError
from qunlearn.streams import stream

logger = logging.getLogger(__name__)


def sample_losses(model: HybridModel, labeled: LabeledSet) -> np.ndarray:
    probs = predict(model, labeled.inputs)
    return -np.log(np.maximum(probs[np.arange(len(labeled)), labeled.labels], PROB_CLAMP))


def _member_rate(losses: np.ndarray, threshold: float) -> float:
    # a loss equal to the threshold counts as half a member
    return float(np.mean(losses < threshold) + 0.5 * np.mean(losses == threshold))


def _rates(sorted_losses: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    below = np.searchsorted(sorted_losses, thresholds, side='left')
    upto = np.searchsorted(sorted_losses, thresholds, side='right')
    return (below + 0.5 * (upto - below)) / sorted_losses.size


class LossThresholdAttack:
    """
    Predicts "member" for samples whose loss falls below the threshold.

    ``tpr`` and ``fpr`` are the member rates of the calibration members and
    non-members at the threshold. They turn the hard decision into a member
    posterior for each side of the threshold, under equal priors.
    """

    def __init__(self, threshold: float, tpr: float = 1.0, fpr: float = 0.0):
        self.threshold = threshold
        self.tpr = tpr
        self.fpr = fpr

    @classmethod
    def calibrate(cls, member_losses: np.ndarray, nonmember_losses: np.ndarray) -> 'LossThresholdAttack':
        """
        Pick the threshold with the best balanced accuracy.

        Candidates are the midpoints between consecutive unique losses plus
        infinity; ties keep the smallest threshold.
        """
        member_losses = np.sort(np.asarray(member_losses, dtype=np.float64))
        nonmember_losses = np.sort(np.asarray(nonmember_losses, dtype=np.float64))
        if not member_losses.size or not nonmember_losses.size:
            raise InvalidInputError('calibration needs members and non-members')
        pooled = np.unique(np.concatenate([member_losses, nonmember_losses]))
        candidates = np.append(0.5 * (pooled[:-1] + pooled[1:]), np.inf)
        tpr = _rates(member_losses, candidates)
        fpr = _rates(nonmember_losses, candidates)
        best = int(np.argmax(0.5 * (tpr + 1.0 - fpr)))
        return cls(float(candidates[best]), float(tpr[best]), float(fpr[best]))

    @property
    def advantage(self) -> float:
        return self.tpr - self.fpr

    def side_posteriors(self) -> tuple:
        """Member posterior below and above the threshold; 0.5 where a side holds no calibration mass."""
        hit = self.tpr + self.fpr
        miss = 2.0 - hit
        below = self.tpr / hit if hit > 0 else 0.5
        above = (1.0 - self.tpr) / miss if miss > 0 else 0.5
        return below, above

    def member_rate(self, losses: np.ndarray) -> float:
        return _member_rate(np.asarray(losses, dtype=np.float64), self.threshold)

    def membership_score(self, losses: np.ndarray) -> float:
        """Mean member posterior over ``losses``; exactly 0.5 when the attack has no advantage."""
        losses = np.asarray(losses, dtype=np.float64)
        below, above = self.side_posteriors()
        posterior = np.where(losses < self.threshold, below,
                             np.where(losses > self.threshold, above, 0.5 * (below + above)))
        return float(np.mean(posterior))


def mia_from_losses(forget_losses, member_losses, nonmember_losses) -> float:
    if not np.size(forget_losses):
        raise InvalidInputError('membership score of an empty forget set is undefined')
    return LossThresholdAttack.calibrate(member_losses, nonmember_losses).membership_score(forget_losses)


def _half(labeled: LabeledSet, seed: int, label: str) -> LabeledSet:
    order = stream(seed, 'mia', label).permutation(len(labeled))
    return labeled.take(order[:max(1, len(labeled) // 2)])


def mia_score(model: HybridModel, forget: LabeledSet, test: LabeledSet, retain: LabeledSet, seed: int = 0) -> float:
    """
    Mean member posterior the attack assigns to the forget samples; lower is better.

    The threshold is calibrated on seeded halves of the retain set (members)
    and the test set (non-members).

    Raises:
        InvalidInputError: any of the three sets is empty
    """
    if not len(forget) or not len(test) or not len(retain):
        raise InvalidInputError('membership inference needs non-empty forget, test and retain sets')
    attack = LossThresholdAttack.calibrate(sample_losses(model, _half(retain, seed, 'members')),
                                           sample_losses(model, _half(test, seed, 'nonmembers')))
    forget_losses = sample_losses(model, forget)
    score = attack.membership_score(forget_losses)
    logger.debug(f"MIA threshold {attack.threshold:.4f}, advantage {attack.advantage:.4f}, "
                 f"forget member rate {attack.member_rate(forget_losses):.4f}, score {score:.4f}")
    return score
