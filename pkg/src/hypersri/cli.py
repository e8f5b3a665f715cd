"""Command-line surface binding the pipeline together.

Exit codes: 0 success, 1 validation error (bad arguments or inputs),
2 runtime error. The SRI_SEED environment variable overrides every
config-provided seed. Reruns with identical inputs and seed produce
byte-identical outputs.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .aggregation import (
    emit_records,
    group_by_demographics,
    load_profiles_csv,
    load_records_jsonl,
    save_records_jsonl,
    windows_from_json,
    AggregatedSri,
    CohortData,
)
from .errors import FormatError, RuntimeFailure, ValidationError
from .harness import (
    DEFAULT_LAMBDAS,
    ablation_summary,
    ablation_to_csv,
    evaluate_checkpoint,
    lambda_ablation,
)
from .hypergraph import build_knn_hypergraph, hypergraph_to_json
from .model import init_params
from .scenes import adaptive_detect, make_storyboard, read_frames_bin, storyboard_to_json
from .signals import (
    Indicator,
    classify,
    load_eeg_csv,
    load_gaze_csv,
    emotion_series,
    engagement_series,
    compute_emr,
)
from .synth import SynthSpec, generate_to_dir, load_model_task
from .tensorio import read_tensor_file
from .training import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_stage1,
    train_stage2,
)
from .utils import canonical_json, write_text


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _seed_override(seed: int) -> int:
    env = os.environ.get("SRI_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"SRI_SEED must be an integer, got {env!r}") from None


@click.group()
def cli():
    """Indicator pipeline: synthetic data, scene detection, aggregation,
    hypergraph training, and evaluation."""


@cli.group()
def synth():
    """Synthetic data generation."""


@synth.command("gen")
@click.argument("spec_path", metavar="SPEC_JSON")
@click.argument("outdir")
def synth_gen(spec_path, outdir):
    """Generate all sections of SPEC_JSON into OUTDIR."""
    spec = SynthSpec.from_json_file(spec_path)
    spec.seed = _seed_override(spec.seed)
    generate_to_dir(spec, outdir)
    click.echo(f"wrote synthetic data to {outdir}")


@cli.group()
def sri():
    """Indicator computation and aggregation."""


@sri.command("compute")
@click.option("--eeg", "eeg_path", required=True, help="EEG CSV (t,a1..b3)")
@click.option("--gaze", "gaze_path", required=True, help="gaze CSV (t,on_screen)")
@click.option("--scenes", "scenes_path", required=True, help="scene windows JSON")
@click.option("--out", "out_path", required=True, help="output JSON Lines")
@click.option("--participant", default=None, help="participant id stamped on records")
@click.option("--engagement-threshold", default=1.0, show_default=True)
def sri_compute(eeg_path, gaze_path, scenes_path, out_path, participant, engagement_threshold):
    """Per-scene participant-level indicator values for one stream pair."""
    eeg = load_eeg_csv(eeg_path)
    gaze = load_gaze_csv(gaze_path)
    video_id, windows = windows_from_json(scenes_path)
    pid = participant if participant is not None else Path(eeg_path).stem
    en = engagement_series(eeg)
    em = emotion_series(eeg)
    lines = []
    for w in sorted(windows, key=lambda w: w.scene_index):
        lo = np.searchsorted(eeg.t, w.t1, side="left")
        hi = np.searchsorted(eeg.t, w.t2, side="left")
        if hi == lo:
            raise ValidationError(
                f"no EEG samples in scene {w.scene_index} [{w.t1}, {w.t2})"
            )
        values = {
            Indicator.ENGAGEMENT: float(en[lo:hi].mean()),
            Indicator.EMOTION: float(em[lo:hi].mean()),
            Indicator.EMR: compute_emr(gaze, (w.t1, w.t2)),
        }
        for indicator, value in values.items():
            label = classify(indicator, value, engagement_threshold)
            lines.append(canonical_json({
                "participant_id": pid,
                "video_id": video_id,
                "scene_index": w.scene_index,
                "t1": w.t1,
                "t2": w.t2,
                "indicator": indicator.value,
                "value": value,
                "label": label.label,
                "class_name": label.name,
            }))
    write_text(out_path, "\n".join(lines) + "\n")
    click.echo(f"wrote {len(lines)} records to {out_path}")


@sri.command("aggregate")
@click.option("--profiles", "profiles_path", required=True, help="profiles CSV")
@click.option("--records", "records_path", required=True,
              help="participant-level JSONL from `sri compute`")
@click.option("--out", "out_path", required=True, help="aggregated JSON Lines")
@click.option("--engagement-threshold", default=1.0, show_default=True)
def sri_aggregate(profiles_path, records_path, out_path, engagement_threshold):
    """Group participants demographically and aggregate their records."""
    from .signals import CLASS_NAMES, SriClass

    profiles = load_profiles_csv(profiles_path)
    grouping = group_by_demographics(profiles)
    by_participant: dict[str, str] = {}
    for g in grouping.groups:
        for pid in g.participant_ids:
            by_participant[pid] = g.group_id

    rows = []
    with open(records_path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{records_path}:{lineno}: {exc}") from exc

    # cell -> group -> participant -> list of values
    cells: dict[tuple, dict[str, dict[str, list[float]]]] = {}
    for r in rows:
        try:
            pid = r["participant_id"]
            key = (r["video_id"], int(r["scene_index"]), Indicator(r["indicator"]))
            value = float(r["value"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{records_path}: bad record {r!r}") from exc
        gid = by_participant.get(pid)
        if gid is None:
            continue  # unassigned participants do not aggregate
        cells.setdefault(key, {}).setdefault(gid, {}).setdefault(pid, []).append(value)

    group_sizes = {g.group_id: set(g.participant_ids) for g in grouping.groups}
    out_records = []
    for (video_id, scene_index, indicator) in sorted(cells, key=lambda k: (k[0], k[1], k[2].value)):
        per_group = cells[(video_id, scene_index, indicator)]
        for gid in sorted(per_group):
            members = per_group[gid]
            missing = group_sizes[gid] - set(members)
            if missing:
                from .errors import MissingParticipantData

                raise MissingParticipantData(
                    f"participant {sorted(missing)[0]} has no record for "
                    f"{video_id} scene {scene_index} {indicator.value}"
                )
            value = float(np.mean([np.mean(v) for _, v in sorted(members.items())]))
            label = classify(indicator, value, engagement_threshold)
            out_records.append(AggregatedSri(
                video_id=video_id, scene_index=scene_index, group_id=gid,
                indicator=indicator, value=value,
                class_label=SriClass(indicator, label.label,
                                     CLASS_NAMES[indicator][label.label]),
            ))
    save_records_jsonl(out_path, out_records)
    click.echo(f"wrote {len(out_records)} aggregated records to {out_path}")


@cli.group()
def fsvr():
    """Scene detection and storyboarding."""


@fsvr.command("detect")
@click.option("--frames", "frames_path", required=True, help="planar RGB binary")
@click.option("--meta", "meta_path", required=True, help="JSON sidecar {h,w,frame_count}")
@click.option("--out", "out_path", required=True, help="storyboard JSON")
@click.option("--adaptive-threshold", default=2.0, show_default=True)
@click.option("--min-scene-len", default=10, show_default=True)
@click.option("--window-width", default=2, show_default=True)
@click.option("--min-content-val", default=15.0, show_default=True)
def fsvr_detect(frames_path, meta_path, out_path, adaptive_threshold,
                min_scene_len, window_width, min_content_val):
    """Detect cuts, keyframe each scene, and pick the 8-frame summary."""
    frames, meta = read_frames_bin(frames_path, meta_path)
    scene_list = adaptive_detect(
        frames,
        adaptive_threshold=adaptive_threshold,
        min_scene_len=min_scene_len,
        window_width=window_width,
        min_content_val=min_content_val,
    )
    sb = make_storyboard(str(meta.get("video_id", Path(frames_path).stem)), scene_list)
    write_text(out_path, storyboard_to_json(sb))
    click.echo(f"{sb.video_id}: {len(sb.cuts)} scenes -> {out_path}")


@cli.group()
def hypergraph():
    """Hypergraph construction."""


@hypergraph.command("build")
@click.option("--features", "features_path", required=True,
              help="framed tensor file of vertex features")
@click.option("--k", "k_spec", default="3,4,5", show_default=True,
              help="comma-separated k values")
@click.option("--out", "out_path", required=True, help="hypergraph JSON")
def hypergraph_build(features_path, k_spec, out_path):
    """Build the k-NN hypergraph over stacked feature rows."""
    try:
        k_list = [int(k) for k in k_spec.split(",") if k]
    except ValueError:
        raise ValidationError(f"bad --k value {k_spec!r}") from None
    _, tensors = read_tensor_file(features_path)
    rows = [t.reshape(-1, t.shape[-1]) for t in tensors.values()]
    x = np.concatenate(rows, axis=0)
    g = build_knn_hypergraph(x, k_list)
    write_text(out_path, hypergraph_to_json(g))
    click.echo(f"{g.n_vertices} vertices, {g.n_edges} hyperedges -> {out_path}")


@cli.command("train")
@click.option("--config", "config_path", required=True, help="train config JSON")
@click.option("--stage", type=click.Choice(["1", "2", "all"]), default="all",
              show_default=True)
@click.option("--out", "out_path", required=True, help="checkpoint path")
@click.option("--init", "init_path", default=None,
              help="checkpoint to start from (required for --stage 2)")
def train_cmd(config_path, stage, out_path, init_path):
    """Run the two-stage trainer on a generated model task."""
    obj = _load_json(config_path)
    data_dir = obj.pop("data_dir", None)
    if data_dir is None:
        raise ValidationError(f"{config_path}: missing data_dir")
    dims_override = obj.pop("dims", None)
    cfg = TrainConfig.from_dict(obj)
    cfg.seed = _seed_override(cfg.seed)
    data, dims, _ = load_model_task(data_dir)
    if dims_override:
        from .model import ModelDims

        dims = ModelDims.from_dict(dims_override)

    metrics: dict = {"config": cfg.to_dict(), "data_dir": str(data_dir)}
    if stage in ("1", "all"):
        params = init_params(dims, cfg.seed)
        params, m1 = train_stage1(params, data, cfg)
        metrics["stage1"] = {
            "initial_loss": m1.initial_loss,
            "epoch_losses": m1.epoch_losses,
            "final_loss": m1.final_loss,
        }
        final_stage = 1
    else:
        if init_path is None:
            raise ValidationError("--stage 2 requires --init CHECKPOINT")
        params, manifest = load_checkpoint(init_path)
        if int(manifest.get("stage", 0)) < 1:
            raise ValidationError("--stage 2 requires a stage-1 checkpoint")
    if stage in ("2", "all"):
        params, m2 = train_stage2(params, data, cfg)
        metrics["stage2"] = {
            "initial_loss": m2.initial_loss,
            "epoch_losses": m2.epoch_losses,
            "final_loss": m2.final_loss,
            "held_accuracy": m2.held_accuracy,
        }
        final_stage = 2
    save_checkpoint(out_path, params, stage=final_stage, cfg=cfg)
    write_text(str(out_path) + ".metrics.json", canonical_json(metrics) + "\n")
    click.echo(f"stage {final_stage} checkpoint -> {out_path}")


@cli.command("eval")
@click.option("--ckpt", "ckpt_path", required=True)
@click.option("--data", "data_dir", required=True, help="model task directory")
@click.option("--protocol", type=click.Choice(["p1", "p2"]), required=True)
@click.option("--report", "report_path", required=True, help="report JSON")
def eval_cmd(ckpt_path, data_dir, protocol, report_path):
    """Evaluate a checkpoint on the held-out split."""
    report = evaluate_checkpoint(ckpt_path, data_dir, protocol)
    write_text(report_path, report.to_json())
    for line in report.summary_lines():
        click.echo(line)


@cli.group()
def ablate():
    """Ablation sweeps."""


@ablate.command("lambda")
@click.option("--config", "config_path", required=True, help="train config JSON")
@click.option("--out", "out_path", required=True, help="results CSV")
@click.option("--lambdas", "lambdas_spec", default=None,
              help="comma-separated lambda values (default 0,0.05,0.1,0.2,0.5)")
@click.option("--protocol", type=click.Choice(["p1", "p2"]), default="p2",
              show_default=True)
def ablate_lambda(config_path, out_path, lambdas_spec, protocol):
    """Sweep the loss-balance weight and tabulate held-out metrics."""
    obj = _load_json(config_path)
    data_dir = obj.pop("data_dir", None)
    if data_dir is None:
        raise ValidationError(f"{config_path}: missing data_dir")
    obj.pop("dims", None)
    cfg = TrainConfig.from_dict(obj)
    cfg.seed = _seed_override(cfg.seed)
    if lambdas_spec:
        try:
            lambdas = tuple(float(x) for x in lambdas_spec.split(","))
        except ValueError:
            raise ValidationError(f"bad --lambdas value {lambdas_spec!r}") from None
    else:
        lambdas = DEFAULT_LAMBDAS
    data, dims, _ = load_model_task(data_dir)
    rows = lambda_ablation(cfg, data, dims, lambdas=lambdas, protocol=protocol)
    write_text(out_path, ablation_to_csv(rows))
    click.echo(ablation_summary(rows))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except RuntimeFailure as exc:
        click.echo(f"runtime error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
