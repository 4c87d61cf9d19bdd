"""
Core services for the evaluation app.

All measurements are read-only over the network and the evaluation rows.
Natural-mode quantities use the un-overridden forward pass; forced mode
clamps every ghost placement at inference.
"""
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from apps.core.exceptions import InvalidConfigError, InvalidInputError
from apps.ghost.dtos import ActivationProfile, GhostSpec
from apps.ghost.services import band_hits, detect_hits, hit_fractions, make_override
from apps.nn.dtos import Network
from apps.nn.services import predict
from .dtos import IMPOSTER, EvaluationSuite, MetricsRecord
from .schemas import DecisionConfig

logger = logging.getLogger(__name__)

ATTACK_MODES = ('natural', 'forced')


def _features(rows) -> np.ndarray:
    features = np.asarray(getattr(rows, 'features', rows), dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InvalidInputError("evaluation set is empty")
    return features


def osi_decide(scores, cfg: DecisionConfig):
    """
    Open-set decision for one row or a batch of score rows.

    Returns the argmax class when the max score is >= theta, else IMPOSTER.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        return int(osi_decide(scores.reshape(1, -1), cfg)[0])
    labels = np.argmax(scores, axis=1)
    return np.where(scores.max(axis=1) >= cfg.theta, labels, IMPOSTER)


def _decisions(net: Network, features: np.ndarray, cfg: Optional[DecisionConfig], override=None) -> np.ndarray:
    prediction = predict(net, features, override)
    if cfg is None:
        return prediction.labels
    return osi_decide(prediction.scores, cfg)


def benign_accuracy(net: Network, test) -> float:
    """Closed-set accuracy over the enrolled rows of the test set."""
    enrolled = test.enrolled_rows()
    if len(enrolled) == 0:
        raise InvalidInputError("test set has no enrolled rows")
    return float(np.mean(predict(net, enrolled.features).labels == enrolled.labels))


def trigger_rate(net: Network, spec: GhostSpec, rows) -> float:
    """Fraction of rows whose natural activations hit every band at once."""
    hits = detect_hits(net, _features(rows), spec)
    return float(np.all(hits, axis=1).mean())


def attack_success(
    net: Network,
    spec: GhostSpec,
    rows,
    mode: str,
    target_label: int,
    cfg: Optional[DecisionConfig] = None,
) -> Optional[float]:
    """
    Fraction of triggered (natural) or clamped (forced) rows decided as target_label.

    With cfg the decision is the open-set one, so a score below theta fails.
    Natural mode returns None when no row triggers.
    """
    if mode not in ATTACK_MODES:
        raise InvalidConfigError(f"unknown attack mode {mode!r}", field="mode")
    features = _features(rows)
    if mode == 'natural':
        triggered = np.all(detect_hits(net, features, spec), axis=1)
        if not triggered.any():
            return None
        decisions = _decisions(net, features[triggered], cfg)
    else:
        decisions = _decisions(net, features, cfg, make_override(spec))
    return float(np.mean(decisions == target_label))


def osi_error_rates(net: Network, test, osi_set, cfg: DecisionConfig) -> Tuple[float, float]:
    """(false accepts over OSI rows, false rejects over enrolled test rows)."""
    osi_features = _features(osi_set)
    enrolled = test.enrolled_rows()
    if len(enrolled) == 0:
        raise InvalidInputError("test set has no enrolled rows")
    far = float(np.mean(_decisions(net, osi_features, cfg) != IMPOSTER))
    frr = float(np.mean(_decisions(net, enrolled.features, cfg) == IMPOSTER))
    return far, frr


def independence_gap(profile: ActivationProfile, spec: GhostSpec) -> float:
    """|joint hit fraction - product of marginal hit fractions| on the profile sample."""
    if spec.n < 2:
        return 0.0
    marginals, joint = hit_fractions(band_hits(profile.values, spec))
    return abs(joint - math.prod(float(m) for m in marginals))


# =============================================================================
# Per-round evaluation
# =============================================================================

def evaluate_round(suite: EvaluationSuite, round_index: int, net: Network) -> MetricsRecord:
    tr = asr_natural = asr_forced = None
    if suite.spec is not None:
        tr = trigger_rate(net, suite.spec, suite.test)
        asr_natural = attack_success(net, suite.spec, suite.test, 'natural', suite.target_label)
        asr_forced = attack_success(net, suite.spec, suite.test, 'forced', suite.target_label)
    far, frr = osi_error_rates(net, suite.test, suite.osi_set, suite.decision)
    return MetricsRecord(
        round=round_index,
        ba=benign_accuracy(net, suite.test),
        tr=tr,
        asr_natural=asr_natural,
        asr_forced=asr_forced,
        osi_far=far,
        osi_frr=frr,
    )


def make_round_evaluator(suite: EvaluationSuite) -> Callable[[int, Network], MetricsRecord]:
    """Round hook for run_federation that evaluates and logs one MetricsRecord."""
    def evaluator(round_index: int, net: Network) -> MetricsRecord:
        record = evaluate_round(suite, round_index, net)
        logger.info(
            f"round={record.round} ba={record.ba:.4f} tr={record.tr} "
            f"asr_natural={record.asr_natural} asr_forced={record.asr_forced} "
            f"far={record.osi_far:.4f} frr={record.osi_frr:.4f}"
        )
        return record
    return evaluator
