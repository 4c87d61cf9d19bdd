"""
Core services for the ghost app.

Ghost-neuron selection, activation profiling, trigger calibration, the clamp
override, the attack-round schedule, label remapping and the trigger
probability model.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from apps.core.exceptions import CalibrationError, InvalidConfigError, InvalidInputError
from apps.nn.dtos import Network
from apps.nn.services import forward
from .dtos import ActivationOverride, ActivationProfile, GhostSpec, Placement, PredictedRates
from .schemas import BlocksLayout, ContiguousLayout, LayeredLayout, RandomLayout

logger = logging.getLogger(__name__)


# =============================================================================
# Placement selection
# =============================================================================

def _layer_widths(net_shape: Union[Network, Sequence[int]]) -> List[int]:
    if isinstance(net_shape, Network):
        return net_shape.hidden_widths
    return [int(w) for w in net_shape]


def _check_placement(placement: Placement, widths: Sequence[int]) -> None:
    layer, neuron = placement
    if not 0 <= layer < len(widths):
        raise InvalidConfigError(
            f"layer {layer} is not a hidden layer (network has {len(widths)})",
            field="ghost.layout",
        )
    if not 0 <= neuron < widths[layer]:
        raise InvalidConfigError(
            f"neuron {neuron} outside hidden layer {layer} of width {widths[layer]}",
            field="ghost.layout",
        )


def split_evenly(n: int, parts: int) -> List[int]:
    """Split n into parts counts; later parts absorb the remainder (50/3 -> 16, 17, 17)."""
    base, remainder = divmod(n, parts)
    return [base + (1 if i >= parts - remainder else 0) for i in range(parts)]


def select_placements(layout, net_shape: Union[Network, Sequence[int]]) -> List[Placement]:
    """
    Resolve a layout into distinct placements in a deterministic order.

    net_shape is a Network or the list of hidden-layer widths.
    """
    widths = _layer_widths(net_shape)

    if isinstance(layout, ContiguousLayout):
        placements = [Placement(layout.layer, layout.start + i) for i in range(layout.n)]
    elif isinstance(layout, BlocksLayout):
        placements = [
            Placement(layer, neuron)
            for layer, start, end in layout.blocks
            for neuron in range(start, end + 1)
        ]
    elif isinstance(layout, LayeredLayout):
        placements = []
        for layer, count in zip(layout.layers, split_evenly(layout.n, len(layout.layers))):
            placements.extend(Placement(layer, i) for i in range(count))
    elif isinstance(layout, RandomLayout):
        for layer in layout.layers:
            _check_placement(Placement(layer, 0), widths)
        pool = [Placement(layer, i) for layer in sorted(set(layout.layers)) for i in range(widths[layer])]
        if layout.n > len(pool):
            raise InvalidConfigError(
                f"cannot draw {layout.n} neurons from {len(pool)} candidates", field="ghost.layout.n"
            )
        rng = np.random.default_rng(layout.seed)
        chosen = rng.choice(len(pool), size=layout.n, replace=False)
        placements = sorted(pool[i] for i in chosen)
    else:
        raise InvalidConfigError(f"unknown layout {layout!r}", field="ghost.layout")

    for placement in placements:
        _check_placement(placement, widths)
    if len(set(placements)) != len(placements):
        raise InvalidConfigError("layout produces duplicate placements", field="ghost.layout")
    return placements


# =============================================================================
# Profiling and calibration
# =============================================================================

def _features(dataset) -> np.ndarray:
    return np.asarray(getattr(dataset, 'features', dataset), dtype=np.float64)


def activations_at(net: Network, features: np.ndarray, placements: Sequence[Placement]) -> np.ndarray:
    """Un-overridden activation values, one column per placement."""
    _check_all(net, placements)
    _, trace = forward(net, features)
    columns = [trace.post_activations[p.layer_index][:, p.neuron_index] for p in placements]
    if not columns:
        return np.zeros((features.shape[0], 0))
    return np.stack(columns, axis=1)


def _check_all(net: Network, placements: Sequence[Placement]) -> None:
    widths = net.hidden_widths
    for placement in placements:
        _check_placement(Placement(*placement), widths)


def profile_activations(net: Network, dataset, placements: Sequence[Placement]) -> ActivationProfile:
    """Record one value per (sample, placement) from a clean forward pass."""
    features = _features(dataset)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InvalidInputError("cannot profile activations on an empty dataset")
    placements = tuple(Placement(*p) for p in placements)
    values = activations_at(net, features, placements)
    logger.debug(f"Profiled {len(placements)} placements on {features.shape[0]} rows")
    return ActivationProfile(placements=placements, values=values)


BAND_STRATEGIES = ('mode', 'upper')


def _calibrate_one(values: np.ndarray, per_target: float, strategy: str = 'mode') -> Tuple[float, float, float]:
    """
    Band whose empirical mass is near per_target, built over the non-zero values.

    Candidate bands span round(per_target * N) consecutive non-zero order
    statistics. Exact zeros are the resting value of a rectified neuron, so a
    band may not sit on them and V_s is never 0 for a ReLU placement. Ties can
    widen the actual hit count (a point mass), so only windows whose real hit
    fraction stays within [0.5x, 2x] of per_target are eligible.

    strategy 'mode' takes the narrowest eligible window and V_s as the median
    of its values; 'upper' takes the highest eligible window and V_s as its top,
    the most extreme natural value the placement reaches.
    Returns (low, high, V_s).
    """
    if strategy not in BAND_STRATEGIES:
        raise InvalidConfigError(f"unknown band strategy {strategy!r}", field="ghost.band_strategy")
    s = np.sort(values)
    count = s.size
    if per_target >= 1.0:
        return float(s[0]), float(s[-1]), float((s[0] + s[-1]) / 2.0)

    width = int(round(per_target * count))
    if width < 1:
        raise CalibrationError(
            f"per-neuron target {per_target:.6g} is finer than 1/{count} samples",
            achievable=(1.0 / count, 1.0),
        )
    active = s[s != 0.0]
    if active.size == 0:
        raise CalibrationError("placement is zero on every profiled row", achievable=(0.0, 0.0))
    if active[0] == active[-1]:
        fraction = active.size / count
        raise CalibrationError(
            f"placement is constant at {active[0]:.6g} on every active row",
            achievable=(fraction, fraction),
        )

    span = min(width, active.size)
    starts = np.arange(active.size - span + 1)
    lows = active[starts]
    highs = active[starts + span - 1]
    hits = np.searchsorted(s, highs, side='right') - np.searchsorted(s, lows, side='left')
    fractions = hits / count
    in_range = (fractions >= 0.5 * per_target) & (fractions <= 2.0 * per_target)
    if span > 1:
        in_range &= highs > lows
    eligible = np.flatnonzero(in_range)
    if eligible.size == 0:
        raise CalibrationError(
            f"no band reaches per-neuron target {per_target:.6g}",
            achievable=(float(fractions.min()), float(fractions.max())),
        )

    if strategy == 'upper':
        best = eligible[-1]
    else:
        best = eligible[np.argmin(highs[eligible] - lows[eligible])]
    low, high = float(lows[best]), float(highs[best])
    if strategy == 'upper':
        return low, high, high
    in_band = active[np.searchsorted(active, low, side='left'):np.searchsorted(active, high, side='right')]
    return low, high, float(in_band[(in_band.size - 1) // 2])


def calibrate_trigger(
    profile: ActivationProfile, target_prob: float, layout=None, strategy: str = 'mode',
) -> GhostSpec:
    """
    Choose V_s and a detection band per placement.

    The joint target is split as target_prob ** (1/n) per placement, which
    assumes independent placements.
    """
    if not 0.0 < target_prob <= 1.0:
        raise InvalidConfigError(f"target probability {target_prob} not in (0, 1]", field="ghost.target_prob")
    if profile.sample_count == 0 or not profile.placements:
        raise InvalidInputError("cannot calibrate on an empty profile")

    per_target = target_prob ** (1.0 / len(profile.placements))
    bands, clamp_values = [], []
    for i, placement in enumerate(profile.placements):
        low, high, v_s = _calibrate_one(profile.values[:, i], per_target, strategy)
        bands.append((low, high))
        clamp_values.append(v_s)
        logger.debug(f"Calibrated {tuple(placement)}: V_s={v_s:.6g} band=[{low:.6g}, {high:.6g}]")

    spec = GhostSpec(
        placements=profile.placements,
        clamp_values=tuple(clamp_values),
        bands=tuple(bands),
        layout=layout,
        target_prob=target_prob,
    )
    logger.info(f"Calibrated {spec.n} ghost neurons for target {target_prob:.6g} (per neuron {per_target:.6g})")
    return spec


def _is_usable(values: np.ndarray, per_target: float) -> bool:
    if per_target >= 1.0:
        return True
    active = values[values != 0.0]
    return active.size >= 0.5 * per_target * values.size and active.min() < active.max()


def replace_inactive(
    net: Network, dataset, placements: Sequence[Placement], target_prob: float,
) -> List[Placement]:
    """
    Swap each placement that cannot carry a band for the nearest usable neuron
    of the same hidden layer (lower index on ties).

    A neuron is unusable when it is constant or non-zero on too few rows to
    reach the per-neuron share of target_prob.
    """
    placements = [Placement(*p) for p in placements]
    _check_all(net, placements)
    features = _features(dataset)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InvalidInputError("cannot profile activations on an empty dataset")
    if not placements:
        return placements

    per_target = target_prob ** (1.0 / len(placements))
    _, trace = forward(net, features)
    usable = {}
    taken = set(placements)
    result = []
    for placement in placements:
        layer = placement.layer_index
        if layer not in usable:
            values = trace.post_activations[layer]
            usable[layer] = [_is_usable(values[:, j], per_target) for j in range(values.shape[1])]
        if usable[layer][placement.neuron_index]:
            result.append(placement)
            continue
        candidates = [
            j for j in sorted(range(len(usable[layer])), key=lambda j: (abs(j - placement.neuron_index), j))
            if usable[layer][j] and Placement(layer, j) not in taken
        ]
        if not candidates:
            raise CalibrationError(f"no usable neuron left in hidden layer {layer}", achievable=(0.0, 0.0))
        substitute = Placement(layer, candidates[0])
        taken.add(substitute)
        result.append(substitute)
        logger.warning(f"Ghost neuron {tuple(placement)} is inactive or constant; using {tuple(substitute)}")
    return result


def fixed_trigger(placements: Sequence[Placement], v_s: float, half_width: float, layout=None) -> GhostSpec:
    """Shared V_s with band [V_s - half_width, V_s + half_width] for every placement."""
    if half_width < 0:
        raise InvalidConfigError("half_width must be >= 0", field="ghost.half_width")
    placements = tuple(Placement(*p) for p in placements)
    return GhostSpec(
        placements=placements,
        clamp_values=tuple(float(v_s) for _ in placements),
        bands=tuple((v_s - half_width, v_s + half_width) for _ in placements),
        layout=layout,
    )


# =============================================================================
# Trigger application and detection
# =============================================================================

def make_override(spec: GhostSpec) -> ActivationOverride:
    return ActivationOverride({
        (p.layer_index, p.neuron_index): v for p, v in zip(spec.placements, spec.clamp_values)
    })


def band_hits(values: np.ndarray, spec: GhostSpec) -> np.ndarray:
    """Boolean matrix: values[row, i] inside the band of placement i."""
    if not spec.placements:
        return np.ones((values.shape[0], 0), dtype=bool)
    lows = np.array([low for low, _ in spec.bands])
    highs = np.array([high for _, high in spec.bands])
    return (values >= lows) & (values <= highs)


def detect_hits(net: Network, dataset, spec: GhostSpec) -> np.ndarray:
    """Band hits of natural (un-overridden) activations, one row per input."""
    return band_hits(activations_at(net, _features(dataset), spec.placements), spec)


def hit_fractions(hits: np.ndarray) -> Tuple[np.ndarray, float]:
    """Per-placement marginal hit fractions and the joint (all placements) hit fraction."""
    if hits.shape[0] == 0:
        raise InvalidInputError("no rows to measure hit fractions on")
    return hits.mean(axis=0), float(np.all(hits, axis=1).mean())


# =============================================================================
# Attack schedule and labels
# =============================================================================

def is_attack_round(round_index: int, n_attack: int) -> bool:
    """True once every n_attack rounds (rounds n_attack-1, 2*n_attack-1, ...); n_attack=0 never attacks."""
    return n_attack > 0 and (round_index + 1) % n_attack == 0


def relabel_batch(labels, target_label: int, n_classes: int) -> np.ndarray:
    if not 0 <= target_label < n_classes:
        raise InvalidConfigError(
            f"target label {target_label} outside {n_classes} classes", field="round.target_label"
        )
    return np.full(len(labels), target_label, dtype=np.int64)


# =============================================================================
# Probability model
# =============================================================================

def predicted_rates(
    per_placement_probs: Sequence[float],
    p_act: float = 1.0,
    placements: Optional[Sequence[Placement]] = None,
) -> PredictedRates:
    """
    P_acc = (product of per-placement hit probabilities) * P_act; eff = 1 - P_acc.

    A single placement with P_act = 1 reduces to P_acc = P_Ghost; grouping the
    product by layer does not change its value.
    """
    probs = tuple(float(p) for p in per_placement_probs)
    for p in probs + (float(p_act),):
        if not 0.0 <= p <= 1.0:
            raise InvalidConfigError(f"probability {p} not in [0, 1]")
    layer_counts = {}
    for placement in placements or ():
        layer = Placement(*placement).layer_index
        layer_counts[layer] = layer_counts.get(layer, 0) + 1
    p_acc = math.prod(probs) * float(p_act)
    return PredictedRates(
        per_placement=probs,
        layer_counts=layer_counts,
        p_act=float(p_act),
        p_acc=p_acc,
        eff=1.0 - p_acc,
    )
