"""
Core services for the experiments app.

Config loading and the single-run pipeline:

    data -> split -> partition -> init -> warm-up rounds -> profile -> calibrate
         -> attacked rounds with per-round evaluation -> metrics.csv, summary.json, ghost_spec.json

Seeds: the split, the partition, the initial weights and the client pool each
draw from their own stream of the master seed; the dataset itself is fixed by
data.synth.seed so every master seed sees the same speakers.
"""
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings
from pydantic import ValidationError

from apps.core.exceptions import ConfigNotFoundError, InvalidConfigError
from apps.core.schemas import as_config_error
from apps.core.seeding import Stream, derive_seed
from apps.evaluation.dtos import EvaluationSuite, MetricsRecord
from apps.evaluation.metrics_service import rounds_to_threshold, write_atomic, write_metrics
from apps.evaluation.services import attack_success, independence_gap, make_round_evaluator, trigger_rate
from apps.fedsim.dtos import ClientState
from apps.fedsim.services import build_client_pool, run_federation
from apps.ghost.document_service import read_spec, write_spec
from apps.ghost.dtos import ActivationProfile, GhostSpec
from apps.ghost.services import (
    band_hits, calibrate_trigger, fixed_trigger, hit_fractions, predicted_rates, profile_activations,
    replace_inactive, select_placements,
)
from apps.nn.dtos import Network
from apps.nn.services import init_network
from apps.speakers.dtos import SpeakerDataset
from apps.speakers.file_service import read_dataset
from apps.speakers.schemas import PartitionPlan
from apps.speakers.services import generate_synthetic, partition_clients, split_train_test_osi
from .models import RunKind, RunStatus
from .run_ledger import close_run, open_run
from .schemas import ExperimentConfig

logger = logging.getLogger(__name__)

ASR_THRESHOLD = 0.9


@dataclass
class TriggerSetup:
    spec: GhostSpec
    profile: ActivationProfile


@dataclass
class RunResult:
    output_dir: Path
    records: List[MetricsRecord]
    summary: Dict[str, Any]
    spec: Optional[GhostSpec]
    network: Network


# =============================================================================
# Config
# =============================================================================

def check_consistency(config: ExperimentConfig) -> ExperimentConfig:
    """Cross-section checks a single pydantic model cannot express."""
    dims = config.model.dims
    if config.data.path is None:
        if dims[0] != config.data.synth.dim:
            raise InvalidConfigError(
                f"input width {dims[0]} does not match data.synth.dim {config.data.synth.dim}", field="model.dims"
            )
        if dims[-1] != config.data.synth.enrolled_classes:
            raise InvalidConfigError(
                f"output width {dims[-1]} does not match {config.data.synth.enrolled_classes} enrolled classes",
                field="model.dims",
            )
    if config.round.target_label >= dims[-1]:
        raise InvalidConfigError(f"target label outside {dims[-1]} classes", field="round.target_label")
    if config.ghost is not None and config.ghost.spec_path is None:
        select_placements(config.ghost.layout, dims[1:-1])
    return config


def parse_experiment_config(document: Any) -> ExperimentConfig:
    try:
        config = ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise as_config_error(e)
    return check_consistency(config)


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigNotFoundError(f"config file {path} does not exist")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"{path} is not valid JSON: {e}")
    return parse_experiment_config(document)


def with_overrides(config: ExperimentConfig, seed: Optional[int] = None, output: Optional[str] = None) -> ExperimentConfig:
    """Apply the --seed/--out command-line overrides."""
    document = config.model_dump(mode='json')
    if seed is not None:
        document['seed'] = seed
    if output is not None:
        document['output'] = str(output)
    return parse_experiment_config(document)


def resolve_output_dir(config: ExperimentConfig, default_name: str) -> Path:
    if config.output:
        return Path(config.output)
    return Path(settings.RESULTS_DIR) / default_name


# =============================================================================
# Pipeline stages
# =============================================================================

def load_dataset(config: ExperimentConfig) -> SpeakerDataset:
    if config.data.path is None:
        return generate_synthetic(config.data.synth)
    ds = read_dataset(config.data.path)
    dims = config.model.dims
    if dims[0] != ds.dim or dims[-1] != ds.n_classes:
        raise InvalidConfigError(
            f"dims {dims} do not fit dataset with d={ds.dim} and {ds.n_classes} classes", field="model.dims"
        )
    return ds


def prepare_data(config: ExperimentConfig) -> Tuple[SpeakerDataset, SpeakerDataset, SpeakerDataset]:
    return split_train_test_osi(
        load_dataset(config),
        train_frac=config.data.train_frac,
        osi_frac=config.data.osi_frac,
        seed=derive_seed(config.seed, Stream.SPLIT),
    )


def prepare_pool(config: ExperimentConfig, train: SpeakerDataset) -> List[ClientState]:
    plan = PartitionPlan(
        scheme=config.data.partition.scheme,
        alpha=config.data.partition.alpha,
        n_clients=config.round.pool_size,
        seed=derive_seed(config.seed, Stream.PARTITION),
    )
    return build_client_pool(train, partition_clients(train, plan), config.round, config.seed)


def initial_network(config: ExperimentConfig) -> Network:
    return init_network(
        config.model.dims, seed=derive_seed(config.seed, Stream.INIT), hidden_activation=config.model.hidden_activation,
    )


def warm_up(config: ExperimentConfig, pool: List[ClientState], net: Network) -> Network:
    """Clean pre-training rounds before the trigger is profiled."""
    if config.round.warmup_rounds == 0:
        return net
    logger.info(f"Warm-up: {config.round.warmup_rounds} clean rounds")
    net, _ = run_federation(
        config.round, pool, net, ghost=None, master_seed=config.seed,
        start_round=0, n_rounds=config.round.warmup_rounds,
    )
    return net


def profile_rows(config: ExperimentConfig, train: SpeakerDataset, pool: List[ClientState]) -> np.ndarray:
    if config.ghost.profile_source == 'adversary_shards':
        shards = [c.shard.features for c in pool if c.is_adversary]
        if shards:
            return np.concatenate(shards)
        logger.warning("No adversarial clients in the pool; profiling on the full train set")
    return train.features


def prepare_trigger(
    config: ExperimentConfig, net: Network, train: SpeakerDataset, pool: List[ClientState],
) -> TriggerSetup:
    """Profile the ghost placements on the warmed-up model and build the GhostSpec."""
    ghost = config.ghost
    if ghost.spec_path is not None:
        spec = read_spec(ghost.spec_path)
        return TriggerSetup(spec=spec, profile=profile_activations(net, profile_rows(config, train, pool), spec.placements))

    placements = select_placements(ghost.layout, net)
    rows = profile_rows(config, train, pool)
    if ghost.mode == 'fixed':
        spec = fixed_trigger(placements, ghost.v_s, ghost.half_width, layout=ghost.layout)
        return TriggerSetup(spec=spec, profile=profile_activations(net, rows, placements))

    if ghost.skip_inactive:
        placements = replace_inactive(net, rows, placements, ghost.target_prob)
    profile = profile_activations(net, rows, placements)
    spec = calibrate_trigger(profile, ghost.target_prob, layout=ghost.layout, strategy=ghost.band_strategy)
    return TriggerSetup(spec=spec, profile=profile)


def calibration_report(setup: TriggerSetup, net: Network, test: SpeakerDataset) -> Dict[str, Any]:
    marginals, joint = hit_fractions(band_hits(setup.profile.values, setup.spec))
    return {
        'placements': [list(p) for p in setup.spec.placements],
        'v_s': list(setup.spec.clamp_values),
        'band': [list(b) for b in setup.spec.bands],
        'target_prob': setup.spec.target_prob,
        'profile_rows': setup.profile.sample_count,
        'profile_hit_fraction': [float(m) for m in marginals],
        'profile_joint_hit_fraction': joint,
        'test_trigger_rate': trigger_rate(net, setup.spec, test),
    }


def _dump_json(data: Dict[str, Any]) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


# =============================================================================
# Entry points
# =============================================================================

def run_experiment(
    config: ExperimentConfig,
    output_dir=None,
    kind: str = RunKind.RUN,
) -> RunResult:
    """Execute one seeded run and write its metrics, summary and ghost spec."""
    out = Path(output_dir) if output_dir is not None else resolve_output_dir(config, f"run-seed{config.seed}")
    run_id = open_run(kind=kind, config=config.model_dump(mode='json'), master_seed=config.seed, output_dir=str(out))
    logger.info(f"Starting run seed={config.seed} rounds={config.round.total_rounds} output={out}")
    try:
        result = _execute(config, out)
    except Exception as e:
        close_run(run_id, RunStatus.FAILED, error=str(e))
        raise
    close_run(run_id, RunStatus.COMPLETED, final_metrics=result.summary.get('final') or {})
    logger.info(f"Run seed={config.seed} finished: {result.summary.get('final')}")
    return result


def _execute(config: ExperimentConfig, out: Path) -> RunResult:
    train, test, osi_set = prepare_data(config)
    pool = prepare_pool(config, train)
    net = warm_up(config, pool, initial_network(config))

    setup = prepare_trigger(config, net, train, pool) if config.ghost is not None else None
    spec = setup.spec if setup else None
    calibration = calibration_report(setup, net, test) if setup else None

    suite = EvaluationSuite(
        test=test, osi_set=osi_set, spec=spec, target_label=config.round.target_label, decision=config.decision,
    )
    net, records = run_federation(
        config.round, pool, net, ghost=spec, hooks=[make_round_evaluator(suite)],
        master_seed=config.seed, start_round=config.round.warmup_rounds,
    )

    summary = build_summary(config, records, net, suite, setup, calibration)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(records, out / 'metrics.csv')
    write_atomic(out / 'summary.json', _dump_json(summary))
    if spec is not None:
        write_spec(spec, out / 'ghost_spec.json', seed=config.seed)
    return RunResult(output_dir=out, records=records, summary=summary, spec=spec, network=net)


def build_summary(
    config: ExperimentConfig,
    records: List[MetricsRecord],
    net: Network,
    suite: EvaluationSuite,
    setup: Optional[TriggerSetup],
    calibration: Optional[Dict[str, Any]],
) -> Dict[str, Any]:
    final = asdict(records[-1]) if records else None
    summary: Dict[str, Any] = {
        'seed': config.seed,
        'total_rounds': config.round.total_rounds,
        'warmup_rounds': config.round.warmup_rounds,
        'aggregator': config.round.aggregator.rule,
        'final': final,
        'rounds_to_asr_0.9': rounds_to_threshold(records, ASR_THRESHOLD),
        'calibration': calibration,
        'asr_forced_osi': None,
        'predicted_rates': None,
        'independence_gap': None,
    }
    if setup is not None:
        spec = setup.spec
        summary['asr_forced_osi'] = attack_success(
            net, spec, suite.osi_set, 'forced', suite.target_label, suite.decision,
        )
        p_act = final['asr_forced'] if final and final['asr_forced'] is not None else 1.0
        rates = predicted_rates(calibration['profile_hit_fraction'], p_act=p_act, placements=spec.placements)
        summary['predicted_rates'] = {
            'per_placement': list(rates.per_placement),
            'layer_counts': {str(k): v for k, v in sorted(rates.layer_counts.items())},
            'p_act': rates.p_act,
            'p_acc': rates.p_acc,
            'eff': rates.eff,
        }
        summary['independence_gap'] = independence_gap(setup.profile, spec)
    return summary


def calibrate(config: ExperimentConfig, output_dir=None) -> Dict[str, Any]:
    """Profile and calibrate on the warmed-up model only; writes ghost_spec.json and calibration.json."""
    if config.ghost is None:
        raise InvalidConfigError("calibration needs a ghost section", field="ghost")
    out = Path(output_dir) if output_dir is not None else resolve_output_dir(config, f"calibrate-seed{config.seed}")
    run_id = open_run(kind=RunKind.CALIBRATE, config=config.model_dump(mode='json'), master_seed=config.seed, output_dir=str(out))
    try:
        train, test, _ = prepare_data(config)
        pool = prepare_pool(config, train)
        net = warm_up(config, pool, initial_network(config))
        setup = prepare_trigger(config, net, train, pool)
        report = calibration_report(setup, net, test)
        report['independence_gap'] = independence_gap(setup.profile, setup.spec)
        out.mkdir(parents=True, exist_ok=True)
        write_spec(setup.spec, out / 'ghost_spec.json', seed=config.seed)
        write_atomic(out / 'calibration.json', _dump_json(report))
    except Exception as e:
        close_run(run_id, RunStatus.FAILED, error=str(e))
        raise
    close_run(run_id, RunStatus.COMPLETED, final_metrics={'test_trigger_rate': report['test_trigger_rate']})
    logger.info(f"Calibrated {setup.spec.n} placements; test trigger rate {report['test_trigger_rate']:.6g}")
    return report
