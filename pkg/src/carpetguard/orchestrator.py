"""Run configuration, dataset persistence and the monitoring control loop."""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .classifier import ModelConfig
from .detector import RAGDetector
from .embedding import EmbeddingProviderConfig
from .evaluation import (
    MetricsReport,
    confusion,
    emit_report,
    metrics,
    read_run_log,
    roc_auc,
    write_run_log,
)
from .fabric_sim import (
    BENIGN_FRACTION,
    Fabric,
    ScenarioConfig,
    TopologyConfig,
    TrafficSample,
    default_scenarios,
    generate_dataset,
    single_attack_scenario,
)
from .mitigation import Action, MitigationConfig, MitigationTable
from .representation import render_json
from .retrieval import load_indices, save_indices, split_dataset
from .telemetry import InterfaceFeatures, compute_features, features_matrix, window_delta

logger = logging.getLogger(__name__)

CONFIG_SECTION = "carpetguard"


@dataclass(frozen=True)
class RunConfig:
    monitor_interval_s: float = 10.0
    k: int = 3
    representation: str = "json"
    split_ratio: float = 0.8
    seed: int = 0
    # embedding provider
    embed_kind: str = "hash"
    embed_dim: int = 384
    embed_seed: int = 0
    embed_endpoint: str = ""
    embed_model: str = "paraphrase-MiniLM-L6-v2"
    embed_normalize: bool = False
    # classifier
    classifier: str = "oracle"
    llm_endpoint: str = ""
    llm_model: str = "gemma-4-31b-it"
    llm_temperature: float = 0.0
    llm_max_tokens: int = 4
    llm_timeout_s: float = 60.0
    llm_retries: int = 2
    max_in_flight: int = 1
    # mitigation
    block_duration_s: float = 40.0
    mitigation: bool = True
    # dataset / simulation
    target_records: int = 2000
    benign_fraction: float = BENIGN_FRACTION
    dataset_mode: str = "mixed"
    intensity: float = 100_000
    sim_duration_s: float = 300.0
    attack_start_s: float = 60.0
    attack_end_s: float = 0.0  # 0 means "until the end of the run"
    realtime_factor: float = 0.0  # >0 sleeps interval/factor wall seconds per window
    # paths
    dataset_path: str = "data/dataset.jsonl"
    index_dir: str = "data/index"
    report_path: str = "data/report.txt"
    run_log_path: str = "data/run_log.csv"

    def __post_init__(self):
        if not self.monitor_interval_s > 0:
            raise ValueError("monitor_interval_s must be positive")
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.classifier not in ("oracle", "remote"):
            raise ValueError("classifier must be 'oracle' or 'remote'")
        if self.dataset_mode not in ("mixed", "benign"):
            raise ValueError("dataset_mode must be 'mixed' or 'benign'")

    def embedding_config(self) -> EmbeddingProviderConfig:
        return EmbeddingProviderConfig(
            kind=self.embed_kind, dim=self.embed_dim, seed=self.embed_seed,
            endpoint=self.embed_endpoint, model=self.embed_model, normalize=self.embed_normalize,
        )

    def model_config(self) -> ModelConfig | None:
        if self.classifier != "remote":
            return None
        return ModelConfig(
            endpoint=self.llm_endpoint, model=self.llm_model, temperature=self.llm_temperature,
            max_tokens=self.llm_max_tokens, timeout_s=self.llm_timeout_s, retries=self.llm_retries,
        )

    def mitigation_config(self) -> MitigationConfig:
        return MitigationConfig(self.block_duration_s, self.monitor_interval_s)


def _coerce(annotation, raw: str):
    if annotation in ("bool", bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if annotation in ("int", int):
        return int(raw)
    if annotation in ("float", float):
        return float(raw)
    return raw.strip()


def load_config(path=None, **overrides) -> RunConfig:
    """Read a flat ``key = value`` file; a ``[carpetguard]`` header is optional."""
    values = {}
    types = {f.name: f.type for f in fields(RunConfig)}
    if path is not None:
        text = Path(path).read_text()
        if not text.lstrip().startswith("["):
            text = f"[{CONFIG_SECTION}]\n" + text
        parser = configparser.ConfigParser()
        parser.read_string(text)
        for key, raw in parser[CONFIG_SECTION].items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _coerce(types[key], raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


# -- dataset persistence -------------------------------------------------------


def sample_to_record(s: TrafficSample) -> dict:
    return {"features": s.features.to_dict(), "label": s.label, **s.metadata()}


def record_to_sample(row: dict) -> TrafficSample:
    if row["label"] not in (0, 1):
        raise ValueError(f"invalid label {row['label']!r}")
    return TrafficSample(
        features=InterfaceFeatures.from_dict(row["features"]),
        label=int(row["label"]),
        scenario=row.get("scenario", ""),
        switch=int(row.get("switch", 0)),
        port=row.get("port", ""),
        window=int(row.get("window", 0)),
        elapsed_s=float(row.get("elapsed_s", 0.0)),
    )


def write_dataset(samples, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_record(s)) + "\n")


def read_dataset(path) -> list:
    samples = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                samples.append(record_to_sample(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{n}: bad dataset record: {exc}") from exc
    return samples


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- commands ------------------------------------------------------------------


def _class_summary(samples) -> dict:
    summary = {"records": len(samples), "benign": 0, "attack": 0, "per_scenario": {}}
    for s in samples:
        summary["attack" if s.label else "benign"] += 1
        per = summary["per_scenario"].setdefault(s.scenario, {"benign": 0, "attack": 0})
        per["attack" if s.label else "benign"] += 1
    return summary


def cmd_generate_dataset(cfg: RunConfig, topology: TopologyConfig = TopologyConfig()) -> dict:
    if cfg.dataset_mode == "benign":
        windows = math.ceil(cfg.target_records / len(topology.host_ports)) + 1
        scenarios = [ScenarioConfig(windows * cfg.monitor_interval_s, cfg.seed, "benign")]
        samples = generate_dataset(topology, scenarios, cfg.seed, target_records=cfg.target_records,
                                   benign_fraction=1.0, interval_s=cfg.monitor_interval_s)
    else:
        scenarios = default_scenarios(cfg.seed, cfg.target_records, benign_fraction=cfg.benign_fraction,
                                      topology=topology, interval_s=cfg.monitor_interval_s)
        samples = generate_dataset(topology, scenarios, cfg.seed, target_records=cfg.target_records,
                                   benign_fraction=cfg.benign_fraction, interval_s=cfg.monitor_interval_s)
    write_dataset(samples, cfg.dataset_path)
    summary = _class_summary(samples)
    summary["path"] = str(cfg.dataset_path)
    return summary


def _make_detector(cfg: RunConfig) -> RAGDetector:
    return RAGDetector(
        representation=cfg.representation, k=cfg.k, embedding=cfg.embedding_config(),
        classifier=cfg.classifier, model_config=cfg.model_config(), max_in_flight=cfg.max_in_flight,
    )


def cmd_build_index(cfg: RunConfig) -> dict:
    """Split the dataset, index the retrieval side and persist both halves."""
    if not Path(cfg.dataset_path).exists():
        raise FileNotFoundError(f"dataset not found: {cfg.dataset_path}")
    samples = read_dataset(cfg.dataset_path)
    # ids are dataset line positions, so they stay stable across rebuilds
    indexed = list(enumerate(samples))
    retrieval, test = split_dataset(indexed, cfg.split_ratio, cfg.seed,
                                    labels=[s.label for s in samples], k=cfg.k)
    det = _make_detector(cfg)
    det.fit(features_matrix(s.features for _, s in retrieval), [s.label for _, s in retrieval],
            ids=[i for i, _ in retrieval], metadata=[s.metadata() for _, s in retrieval])
    index_dir = Path(cfg.index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    write_dataset([s for _, s in sorted(test, key=lambda p: p[0])], index_dir / "test.jsonl")
    extra = {
        "dataset_sha256": _file_digest(cfg.dataset_path),
        "split_ratio": cfg.split_ratio,
        "split_seed": cfg.seed,
        "test_count": len(test),
        "test_class_counts": {
            "0": sum(1 for _, s in test if s.label == 0),
            "1": sum(1 for _, s in test if s.label == 1),
        },
        "embedding": asdict(cfg.embedding_config()),
    }
    return save_indices(index_dir, det.benign_index_, det.attack_index_,
                        provider_fingerprint=cfg.embedding_config().fingerprint(),
                        kind=det.kind_.value, extra=extra)


def load_detector(cfg: RunConfig) -> RAGDetector:
    benign, attack, _ = load_indices(cfg.index_dir, provider_fingerprint=cfg.embedding_config().fingerprint(),
                                     kind=cfg.representation)
    return RAGDetector.from_indices(
        benign, attack, representation=cfg.representation, k=cfg.k, embedding=cfg.embedding_config(),
        classifier=cfg.classifier, model_config=cfg.model_config(), max_in_flight=cfg.max_in_flight,
    )


def cmd_evaluate(cfg: RunConfig) -> MetricsReport:
    det = load_detector(cfg)
    test = read_dataset(Path(cfg.index_dir) / "test.jsonl")
    if not test:
        raise ValueError("test split is empty")
    results = det.classify(features_matrix(s.features for s in test))
    kept = [(r, s.label) for r, s in zip(results, test) if r is not None]
    if not kept:
        raise ValueError("no test window could be classified")
    preds = [r.label for r, _ in kept]
    truths = [t for _, t in kept]
    report = metrics(confusion(preds, truths))
    report.n_unclassified = len(test) - len(kept)
    report.mean_request_latency_s = float(np.mean([r.latency_s for r, _ in kept]))
    if len(set(truths)) == 2:
        if cfg.classifier == "oracle":
            report.auc = roc_auc([r.score for r, _ in kept], truths)
            report.auc_kind = "oracle-margin"
        else:
            # binary replies only: two-point ROC
            report.auc = roc_auc(preds, truths)
            report.auc_kind = "binary-degenerate"
    report.extra = {"representation": cfg.representation, "classifier": cfg.classifier,
                    "test_records": len(test)}
    Path(cfg.report_path).parent.mkdir(parents=True, exist_ok=True)
    emit_report(report, cfg.report_path)
    return report


@dataclass
class SimulationResult:
    rows: list
    fabric: Fabric
    installs: list = field(default_factory=list)  # (port, time)
    removals: list = field(default_factory=list)
    classified: list = field(default_factory=list)  # (port, time)
    delivered_while_blocked: dict = field(default_factory=dict)


def features_digest(f: InterfaceFeatures) -> str:
    return hashlib.sha256(render_json(f).text.encode()).hexdigest()[:16]


def run_simulation(cfg: RunConfig, detector: RAGDetector, scenario: ScenarioConfig,
                   topology: TopologyConfig = TopologyConfig()) -> SimulationResult:
    """Poll, classify, mitigate and recover every monitoring interval."""
    fabric = Fabric(topology, scenario)
    ports = topology.host_ports
    port_host = {topology.port_of(h): h for h in topology.hosts}
    table = MitigationTable(ports, cfg.mitigation_config())
    prev = {p: fabric.poll_counters(p) for p in ports}
    fabric.snapshot()
    result = SimulationResult([], fabric)
    interval = cfg.monitor_interval_s

    def delivered_from(host):
        return sum(v for (a, _), v in fabric.attack_delivered.items() if a == host)

    while fabric.now + interval <= scenario.duration_s + 1e-9:
        t0 = fabric.now
        blocked_before = {p: delivered_from(port_host[p]) for p in ports if table.is_blocked(p)}
        fabric.advance(interval)
        now = fabric.now
        for p, before in blocked_before.items():
            result.delivered_while_blocked[p] = (
                result.delivered_while_blocked.get(p, 0) + delivered_from(port_host[p]) - before
            )
        snap = fabric.snapshot()
        monitored = table.monitored_ports()
        feats = []
        for p in monitored:
            curr = snap.counters[p]
            feats.append(compute_features(window_delta(prev[p], curr)))
            prev[p] = curr
        outcomes = detector.classify(features_matrix(feats)) if feats else []
        for p, f, res in zip(monitored, feats, outcomes):
            action = Action.NONE
            if res is not None:
                result.classified.append((p, now))
                if cfg.mitigation:
                    action = table.classify(p, res.label, now)
                    if action is Action.INSTALL_DROP:
                        fabric.install_drop(p)
                        result.installs.append((p, now))
            result.rows.append({
                "timestamp": now, "port": p, "features_digest": features_digest(f),
                "prediction": "" if res is None else res.label,
                "truth": fabric.ground_truth(p, t0, now),
                "latency_s": "" if res is None else res.latency_s,
                "packet_in_count": snap.packet_in_count,
                "load_proxy": snap.controller_load_proxy,
                "action": "Unclassified" if res is None else action.value,
            })
        for p, action in table.tick_all(now):
            fabric.remove_drop(p)
            # drop-window traffic must not leak into the first post-recovery sample
            prev[p] = fabric.poll_counters(p)
            result.removals.append((p, now))
            result.rows.append({
                "timestamp": now, "port": p, "features_digest": "", "prediction": "",
                "truth": fabric.ground_truth(p, t0, now), "latency_s": "",
                "packet_in_count": snap.packet_in_count, "load_proxy": snap.controller_load_proxy,
                "action": action.value,
            })
        if cfg.realtime_factor > 0:
            time.sleep(interval / cfg.realtime_factor)
    return result


def simulation_scenario(cfg: RunConfig) -> ScenarioConfig:
    end = cfg.attack_end_s if cfg.attack_end_s > 0 else None
    return single_attack_scenario(cfg.intensity, seed=cfg.seed, duration_s=cfg.sim_duration_s,
                                  attack_start_s=cfg.attack_start_s, attack_end_s=end)


def cmd_run_sim(cfg: RunConfig) -> SimulationResult:
    result = run_simulation(cfg, load_detector(cfg), simulation_scenario(cfg))
    Path(cfg.run_log_path).parent.mkdir(parents=True, exist_ok=True)
    write_run_log(result.rows, cfg.run_log_path)
    return result


def _window_series(rows):
    """One (timestamp, packet_in, load) entry per monitoring window."""
    series = {}
    for r in rows:
        series.setdefault(r["timestamp"], (r["packet_in_count"], r["load_proxy"]))
    return sorted((t, pin, load) for t, (pin, load) in series.items())


def _mean(values):
    return float(np.mean(values)) if values else None


def cmd_report(paths: dict) -> dict:
    """Aggregate Packet-In and load proxies per operating condition.

    ``paths`` maps a condition name (``attack_free``, ``no_mitigation``,
    ``mitigation``, or any other label) to a run-log CSV.
    """
    summary = {}
    logs = {}
    for condition, path in paths.items():
        if not Path(path).exists():
            raise FileNotFoundError(f"run log not found: {path}")
        rows = read_run_log(path)
        logs[condition] = rows
        series = _window_series(rows)
        installs = [r for r in rows if r["action"] == Action.INSTALL_DROP.value]
        summary[f"{condition}.windows"] = len(series)
        summary[f"{condition}.packet_in_mean"] = _mean([s[1] for s in series])
        summary[f"{condition}.packet_in_max"] = max((s[1] for s in series), default=None)
        summary[f"{condition}.load_proxy_mean"] = _mean([s[2] for s in series])
        summary[f"{condition}.install_drop"] = len(installs)
        summary[f"{condition}.remove_drop"] = sum(1 for r in rows if r["action"] == Action.REMOVE_DROP.value)
        summary[f"{condition}.first_detection_s"] = min((r["timestamp"] for r in installs), default=None)
    if "mitigation" in logs and "no_mitigation" in logs:
        detected = summary["mitigation.first_detection_s"]
        if detected is not None:
            for condition in ("mitigation", "no_mitigation"):
                after = [s for s in _window_series(logs[condition]) if s[0] > detected]
                summary[f"{condition}.post_detection_packet_in_mean"] = _mean([s[1] for s in after])
                summary[f"{condition}.post_detection_load_proxy_mean"] = _mean([s[2] for s in after])
    return summary


__all__ = [
    "RunConfig",
    "SimulationResult",
    "cmd_build_index",
    "cmd_evaluate",
    "cmd_generate_dataset",
    "cmd_report",
    "cmd_run_sim",
    "load_config",
    "load_detector",
    "read_dataset",
    "run_simulation",
    "simulation_scenario",
    "write_dataset",
]
