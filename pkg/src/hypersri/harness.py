"""Evaluation reports, the random baseline, and the lambda ablation sweep.

Protocols are realized as label granularity: P1 scores predictions against
population-level per-video labels, P2 against per-demographic-group label
tables (the per-video prediction is compared with every group's label).
Reports are fully deterministic: metadata carries the seed, a config hash,
and input file hashes, but no timestamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidSpec, ValidationError
from .metrics import accuracy, confusion_matrix, macro_f1
from .signals import CLASS_PROPORTIONS, Indicator
from .synth import SynthSpec, gen_model_task, load_model_task
from .training import (
    INDICATORS,
    TaskData,
    TrainConfig,
    load_checkpoint,
    predict,
    train_stage1,
    train_stage2,
)
from .utils import canonical_json, config_hash, file_sha256, rng_for

DEFAULT_LAMBDAS = (0.0, 0.05, 0.1, 0.2, 0.5)


@dataclass
class EvalReport:
    protocol: str
    per_indicator: dict[str, dict]  # indicator -> {accuracy, macro_f1, confusion, n}
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return canonical_json(
            {
                "protocol": self.protocol,
                "per_indicator": self.per_indicator,
                "metadata": self.metadata,
            }
        ) + "\n"

    def summary_lines(self) -> list[str]:
        # printed at 2 decimals; the stored report keeps full precision
        lines = []
        for name, entry in self.per_indicator.items():
            lines.append(
                f"{self.protocol} {name}: acc {100 * entry['accuracy']:.2f} "
                f"f1 {100 * entry['macro_f1']:.2f} (n={entry['n']})"
            )
        return lines


def _indicator_entry(preds: np.ndarray, labels: np.ndarray, n_classes: int) -> dict:
    return {
        "accuracy": accuracy(preds, labels),
        "macro_f1": macro_f1(preds, labels),
        "confusion": confusion_matrix(preds, labels, n_classes).tolist(),
        "n": int(len(labels)),
    }


def random_baseline(task_spec: dict | None = None, trials: int = 1,
                    n_questions: int = 100_000, seed: int = 0) -> EvalReport:
    """Uniform-random predictions against labels drawn from the reference
    class proportions; metrics averaged over `trials`."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if task_spec is None:
        task_spec = {ind.value: list(CLASS_PROPORTIONS[ind]) for ind in Indicator}
    per_indicator = {}
    for name, props in task_spec.items():
        props = np.asarray(props, dtype=np.float64)
        props = props / props.sum()
        k = len(props)
        accs, f1s = [], []
        confusion = np.zeros((k, k), dtype=np.int64)
        for trial in range(trials):
            rng = rng_for(seed, "random-baseline", name, trial)
            labels = rng.choice(k, size=n_questions, p=props)
            preds = rng.integers(0, k, size=n_questions)
            accs.append(accuracy(preds, labels))
            f1s.append(macro_f1(preds, labels))
            confusion += confusion_matrix(preds, labels, k)
        per_indicator[name] = {
            "accuracy": float(np.mean(accs)),
            "macro_f1": float(np.mean(f1s)),
            "confusion": confusion.tolist(),
            "n": int(n_questions * trials),
        }
    return EvalReport(
        protocol="p2",
        per_indicator=per_indicator,
        metadata={
            "kind": "random-baseline",
            "seed": seed,
            "trials": trials,
            "config_hash": config_hash(task_spec),
            "version": __version__,
        },
    )


def evaluate_task(params, data: TaskData, k_list, protocol: str) -> dict[str, dict]:
    """Score held-out predictions under P1 (per-video) or P2 (per-group) labels."""
    protocol = protocol.lower()
    if protocol not in ("p1", "p2"):
        raise ValidationError(f"unknown protocol {protocol!r}")
    held = data.subset(data.held_ids)
    preds = predict(params, held, k_list)
    n_classes = {"engagement": 2, "emotion": 3, "emr": 3}
    out = {}
    if protocol == "p1":
        for name in INDICATORS:
            labels = np.array([ex.labels[name] for ex in held])
            out[name] = _indicator_entry(preds[name], labels, n_classes[name])
    else:
        if not data.group_labels:
            raise InvalidSpec("task has no per-group label tables for protocol p2")
        for name in INDICATORS:
            rep_preds, labels = [], []
            for gid in sorted(data.group_labels):
                table = data.group_labels[gid]
                for i, ex in enumerate(held):
                    rep_preds.append(int(preds[name][i]))
                    labels.append(int(table[ex.video_id][name]))
            out[name] = _indicator_entry(
                np.array(rep_preds), np.array(labels), n_classes[name]
            )
    return out


def evaluate_checkpoint(ckpt_path, task_dir, protocol: str) -> EvalReport:
    params, manifest = load_checkpoint(ckpt_path)
    data, dims, _ = load_model_task(task_dir)
    cfg = manifest.get("train_config", {})
    k_list = tuple(cfg.get("k_list", (3, 4, 5)))
    per_indicator = evaluate_task(params, data, k_list, protocol)
    task_dir = Path(task_dir)
    return EvalReport(
        protocol=protocol.lower(),
        per_indicator=per_indicator,
        metadata={
            "kind": "checkpoint-eval",
            "seed": int(manifest.get("seed", 0)),
            "stage": int(manifest.get("stage", 0)),
            "config_hash": config_hash(cfg),
            "inputs": {
                "checkpoint": file_sha256(ckpt_path),
                "task": file_sha256(task_dir / "task.json"),
                "features": file_sha256(task_dir / "features.bin"),
            },
            "version": __version__,
        },
    )


# ---------------------------------------------------------------------------
# Lambda ablation


@dataclass
class AblationRow:
    lam: float
    metrics: dict[str, dict[str, float]]  # indicator -> {acc, f1}


def lambda_ablation(cfg: TrainConfig, data: TaskData, dims,
                    lambdas=DEFAULT_LAMBDAS, protocol: str = "p2") -> list[AblationRow]:
    """Train end-to-end once per lambda on identical seeds and data.

    Stage 1 does not depend on lambda, so it runs once and each lambda run
    fine-tunes a copy of the warmed parameters.
    """
    from dataclasses import replace

    from .model import init_params

    params0 = init_params(dims, cfg.seed)
    warmed, _ = train_stage1(params0, data, cfg)
    rows = []
    for lam in lambdas:
        cfg_l = replace(cfg, lam=float(lam))
        tuned, _ = train_stage2(warmed.copy(), data, cfg_l)
        per_indicator = evaluate_task(tuned, data, cfg.k_list, protocol)
        rows.append(
            AblationRow(
                lam=float(lam),
                metrics={
                    name: {
                        "acc": per_indicator[name]["accuracy"],
                        "f1": per_indicator[name]["macro_f1"],
                    }
                    for name in INDICATORS
                },
            )
        )
    return rows


ABLATION_HEADER = ["lambda", "engagement_acc", "engagement_f1",
                   "emotion_acc", "emotion_f1", "emr_acc", "emr_f1"]


def ablation_to_csv(rows: list[AblationRow]) -> str:
    lines = [",".join(ABLATION_HEADER)]
    for row in rows:
        cells = [repr(row.lam)]
        for name in INDICATORS:
            cells.append(repr(row.metrics[name]["acc"]))
            cells.append(repr(row.metrics[name]["f1"]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def ablation_summary(rows: list[AblationRow]) -> str:
    lines = ["lambda  " + "  ".join(f"{n}-acc {n}-f1" for n in INDICATORS)]
    for row in rows:
        cells = [f"{row.lam:<6g}"]
        for name in INDICATORS:
            cells.append(f"{100 * row.metrics[name]['acc']:.2f}")
            cells.append(f"{100 * row.metrics[name]['f1']:.2f}")
        lines.append("  ".join(cells))
    return "\n".join(lines)
