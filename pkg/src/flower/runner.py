"""Reproducible experiment driver: seeded runs, records, and sweeps.

Every run writes an atomic JSON record (config snapshot, build id, final
metrics, wall time) plus a per-step loss CSV. Failures still produce a
record, marked failed, before the error propagates to the CLI.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import Tensor, load_checkpoint, restore_parameters, save_checkpoint
from .config import ConfigError, ExperimentConfig
from .dsp import read_wav, sample_spec, distort, write_wav
from .guidance import GuidanceContext, inject
from .metrics import evaluate_directories
from .restoration import FlowMatchingRestorer, ScoreMatchingRestorer, make_toy_task

_TOY_TASKS = {
    "toy-fm": (FlowMatchingRestorer, "none"),
    "toy-score": (ScoreMatchingRestorer, "none"),
    "toy-flower-fm": (FlowMatchingRestorer, "gaussian"),
    "toy-flower-score": (ScoreMatchingRestorer, "gaussian"),
    "toy-flower-fm-timeadaptive": (FlowMatchingRestorer, "gaussian-time-adaptive"),
}


class RunFailure(RuntimeError):
    """A run aborted; a partial record marked failed was written."""


@dataclass
class RunRecord:
    task: str
    status: str
    config: dict
    build: dict
    metrics: dict
    wall_time_s: float
    artifacts: dict = field(default_factory=dict)
    sweep: dict | None = None
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def build_info() -> dict:
    return {
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "git": _git_hash(),
    }


def _git_hash() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True,
            timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def build_estimator(config: ExperimentConfig):
    if config.task not in _TOY_TASKS:
        raise ConfigError(f"{config.task!r} is not a trainable toy task")
    cls, guidance = _TOY_TASKS[config.task]
    return cls(
        guidance=guidance,
        hidden=config.hidden,
        time_embed_dim=config.time_embed_dim,
        flow_blocks=config.flow_blocks,
        flow_bins=config.flow_bins,
        flow_bound=config.flow_bound,
        flow_hidden=config.flow_hidden,
        detach_latent=config.detach_latent,
        learning_rate=config.learning_rate,
        n_train_steps=config.train_steps,
        batch_size=config.batch_size,
        sampler_steps=config.sampler_steps,
        sigma_min=config.sigma_min,
        sigma_lo=config.sigma_lo,
        sigma_hi=config.sigma_hi,
        resample_guidance=config.resample_guidance,
        random_state=config.seed,
    )


def toy_split(config: ExperimentConfig):
    x, y = make_toy_task(config.n_train + config.n_eval, config.seed,
                         kind=config.toy_kind, noise_std=config.observation_noise)
    n = config.n_train
    return (x[:n], y[:n]), (x[n:], y[n:])


def _write_losses(path: Path, history: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "l_unet", "l_nf", "total"])
        for step, (l_unet, l_nf, total) in enumerate(history):
            writer.writerow([step, f"{l_unet:.10g}", f"{l_nf:.10g}", f"{total:.10g}"])


def _write_trajectory(path: Path, trajectory: np.ndarray, n_steps: int) -> None:
    # first eval item only: columns step, t, state components
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        dim = trajectory.shape[-1]
        writer.writerow(["step", "t"] + [f"x{i}" for i in range(dim)])
        for step in range(trajectory.shape[0]):
            t = min(step / n_steps, 1.0)
            writer.writerow([step, f"{t:.6f}"]
                            + [f"{v:.10g}" for v in trajectory[step, 0]])


def _injection_zero_probe(estimator) -> bool:
    """Executable contract: time-adaptive injection at t=1 is the identity."""
    rng = np.random.default_rng(0)
    hidden = Tensor(rng.standard_normal((3, estimator.field_.site_dims[0])))
    ctx = GuidanceContext(
        z=rng.standard_normal((3, estimator.data_dim_)), mode="infer",
        projector=estimator.projector_, scaling="time-adaptive")
    out = inject(hidden, ctx, site=0, t=np.ones(3))
    return out is hidden


def _toy_metrics(config: ExperimentConfig, estimator, eval_split) -> dict:
    x_eval, y_eval = eval_split
    metrics = {"restoration_mse": estimator.restoration_error(y_eval, x_eval)}
    tail = estimator.loss_history_[-50:]
    metrics["final_l_unet"] = float(tail[:, 0].mean())
    metrics["final_l_nf"] = float(tail[:, 1].mean())
    metrics["final_total"] = float(tail[:, 2].mean())
    if estimator.flow_ is not None:
        z, _ = estimator.extract_latents(y_eval, x_eval, seed=config.seed)
        metrics["latent_abs_mean_max"] = float(np.abs(z.mean(axis=0)).max())
        metrics["latent_var_min"] = float(z.var(axis=0).min())
        metrics["latent_var_max"] = float(z.var(axis=0).max())
        metrics["guidance_zero_at_t1"] = _injection_zero_probe(estimator)
    return metrics


def _run_toy(config: ExperimentConfig, out_dir: Path, checkpoint: bool,
             artifacts: dict) -> dict:
    (x_train, y_train), eval_split = toy_split(config)
    estimator = build_estimator(config)
    estimator.fit(y_train, x_train)
    metrics = _toy_metrics(config, estimator, eval_split)
    losses_path = out_dir / "losses.csv"
    _write_losses(losses_path, estimator.loss_history_)
    artifacts["losses"] = str(losses_path)
    if checkpoint:
        ckpt = dict(estimator.named_parameters())
        ckpt["meta.obs_dim"] = np.array(float(estimator.n_features_in_))
        ckpt["meta.data_dim"] = np.array(float(estimator.data_dim_))
        ckpt_path = out_dir / "model.ckpt"
        save_checkpoint(ckpt_path, ckpt)
        artifacts["checkpoint"] = str(ckpt_path)
    if config.dump_trajectories and estimator._framework == "fm":
        x_eval, y_eval = eval_split
        _, trajectory = estimator.predict(y_eval, return_trajectory=True)
        traj_path = out_dir / "trajectory.csv"
        _write_trajectory(traj_path, trajectory, config.sampler_steps)
        artifacts["trajectory"] = str(traj_path)
    return metrics


def _run_distort(config: ExperimentConfig, out_dir: Path, io_paths: dict,
                 artifacts: dict) -> dict:
    in_dir = Path(io_paths["in_dir"])
    noise_dir = Path(io_paths["noise_dir"])
    clean_files = sorted(in_dir.glob("*.wav"))
    noise_files = sorted(noise_dir.glob("*.wav"))
    if not clean_files:
        raise ConfigError(f"no .wav files in {in_dir}")
    if not noise_files:
        raise ConfigError(f"no .wav files in {noise_dir}")
    manifest_path = out_dir / "manifest.jsonl"
    master = np.random.SeedSequence(config.seed)
    snrs = []
    with manifest_path.open("w") as fh:
        for child, clean_path in zip(master.spawn(len(clean_files)), clean_files):
            rng = np.random.default_rng(child)
            clean = read_wav(clean_path)
            if clean.sample_rate != 16000:
                raise ConfigError(
                    f"{clean_path}: sample rate {clean.sample_rate} is not 16000 "
                    "(resampling is out of scope)"
                )
            spec = sample_spec(rng, filter_order=config.filter_order)
            noise_path = noise_files[int(rng.integers(0, len(noise_files)))]
            noise = read_wav(noise_path)
            distorted, manifest = distort(clean, noise, spec)
            out_path = out_dir / clean_path.name
            write_wav(out_path, distorted, encoding=config.wav_encoding)
            manifest["input"] = str(clean_path)
            manifest["noise"] = str(noise_path)
            manifest["output"] = str(out_path)
            fh.write(json.dumps(manifest, sort_keys=True) + "\n")
            snrs.append(manifest["snr_db"])
    artifacts["manifest"] = str(manifest_path)
    return {"n_files": len(clean_files), "mean_snr_db": float(np.mean(snrs))}


def _run_evaluate(config: ExperimentConfig, out_dir: Path, io_paths: dict,
                  artifacts: dict) -> dict:
    report = evaluate_directories(io_paths["ref_dir"], io_paths["est_dir"])
    report_path = Path(io_paths.get("report_path") or out_dir / "report.csv")
    report.write_csv(report_path)
    artifacts["report"] = str(report_path)
    return {f"mean_{key}": value for key, value in report.means.items()}


def run(config: ExperimentConfig, out_dir, io_paths: dict | None = None,
        checkpoint: bool = False) -> RunRecord:
    """Execute the configured task, writing record.json and artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict = {}
    started = time.perf_counter()
    try:
        if config.task in _TOY_TASKS:
            metrics = _run_toy(config, out_dir, checkpoint, artifacts)
        elif config.task == "distort":
            metrics = _run_distort(config, out_dir, io_paths or {}, artifacts)
        elif config.task == "evaluate":
            metrics = _run_evaluate(config, out_dir, io_paths or {}, artifacts)
        else:
            raise ConfigError(f"unknown task {config.task!r}")
    except Exception as exc:
        record = RunRecord(
            task=config.task, status="failed", config=config.to_dict(),
            build=build_info(), metrics={}, wall_time_s=time.perf_counter() - started,
            artifacts=artifacts, error=f"{type(exc).__name__}: {exc}",
        )
        _atomic_write(out_dir / "record.json", record.to_json())
        if isinstance(exc, ConfigError):
            raise
        raise RunFailure(str(exc)) from exc
    record = RunRecord(
        task=config.task, status="ok", config=config.to_dict(), build=build_info(),
        metrics=metrics, wall_time_s=time.perf_counter() - started,
        artifacts=artifacts,
    )
    _atomic_write(out_dir / "record.json", record.to_json())
    return record


def sample_from_checkpoint(config: ExperimentConfig, checkpoint_path, out_dir) -> RunRecord:
    """Load a trained toy model and restore the seeded evaluation split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    artifacts: dict = {}
    try:
        state = load_checkpoint(checkpoint_path)
        estimator = build_estimator(config)
        estimator._initialize(int(state.pop("meta.obs_dim")),
                              int(state.pop("meta.data_dim")))
        restore_parameters(estimator.named_parameters(), state)
        _, (x_eval, y_eval) = toy_split(config)
        x_hat = estimator.predict(y_eval)
        metrics = {"restoration_mse": float(np.mean((x_hat - x_eval) ** 2))}
        samples_path = out_dir / "samples.csv"
        _write_samples(samples_path, y_eval, x_eval, x_hat)
        artifacts["samples"] = str(samples_path)
        if config.dump_trajectories and estimator._framework == "fm":
            _, trajectory = estimator.predict(y_eval, return_trajectory=True)
            traj_path = out_dir / "trajectory.csv"
            _write_trajectory(traj_path, trajectory, config.sampler_steps)
            artifacts["trajectory"] = str(traj_path)
        if estimator.flow_ is not None:
            z_path = out_dir / "guidance_z.csv"
            _write_guidance_z(z_path, estimator, y_eval.shape[0])
            artifacts["guidance_z"] = str(z_path)
    except Exception as exc:
        record = RunRecord(
            task=config.task, status="failed", config=config.to_dict(),
            build=build_info(), metrics={}, wall_time_s=time.perf_counter() - started,
            artifacts=artifacts, error=f"{type(exc).__name__}: {exc}",
        )
        _atomic_write(out_dir / "record.json", record.to_json())
        raise RunFailure(str(exc)) from exc
    record = RunRecord(
        task=config.task, status="ok", config=config.to_dict(), build=build_info(),
        metrics=metrics, wall_time_s=time.perf_counter() - started, artifacts=artifacts,
    )
    _atomic_write(out_dir / "record.json", record.to_json())
    return record


def _write_samples(path: Path, y, x, x_hat) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ([f"y{i}" for i in range(y.shape[1])]
                  + [f"x{i}" for i in range(x.shape[1])]
                  + [f"xhat{i}" for i in range(x_hat.shape[1])])
        writer.writerow(["index"] + header)
        for i in range(y.shape[0]):
            row = list(y[i]) + list(x[i]) + list(x_hat[i])
            writer.writerow([i] + [f"{v:.10g}" for v in row])


def _write_guidance_z(path: Path, estimator, n_items: int) -> None:
    config = estimator._sampler_config()
    ctx = estimator._inference_guidance(n_items, config)
    z = np.asarray(ctx.z)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z{i}" for i in range(z.shape[1])])
        for row in z:
            writer.writerow([f"{v:.10g}" for v in row])


def sweep(config: ExperimentConfig, param: str, values, out_dir,
          io_paths: dict | None = None) -> list:
    """One run per value of `param`; failures are recorded and skipped.

    All entries share the base seed unless the swept parameter is the
    seed itself (policy noted in each record).
    """
    if not hasattr(config, param):
        raise ConfigError(f"unknown config field {param!r}")
    current = getattr(config, param)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(f"sweep requires a numeric config field, {param!r} is "
                          f"{type(current).__name__}")
    out_dir = Path(out_dir)
    records = []
    for value in values:
        entry = dataclasses.replace(config)
        entry_dir = out_dir / f"{param}={value}"
        try:
            setattr(entry, param, type(current)(value))
            entry.validate()
            record = run(entry, entry_dir, io_paths=io_paths)
        except (RunFailure, ConfigError, ValueError) as exc:
            record = RunRecord(
                task=entry.task, status="failed", config=entry.to_dict(),
                build=build_info(), metrics={}, wall_time_s=0.0,
                error=str(exc),
            )
            entry_dir.mkdir(parents=True, exist_ok=True)
        record.sweep = {"param": param, "value": value,
                        "seed_policy": "swept" if param == "seed" else "shared-base-seed"}
        _atomic_write(entry_dir / "record.json", record.to_json())
        records.append(record)
    summary = _sweep_summary(param, records)
    _atomic_write(out_dir / "sweep_summary.json", json.dumps(summary, indent=2, sort_keys=True))
    return records


def _sweep_summary(param: str, records: list) -> dict:
    rows = []
    mses = []
    for record in records:
        mse = record.metrics.get("restoration_mse")
        rows.append({"value": record.sweep["value"], "status": record.status,
                     "restoration_mse": mse})
        if record.status == "ok" and mse is not None:
            mses.append(mse)
    summary = {"param": param, "runs": rows}
    if param == "seed" and len(mses) > 1:
        mses = np.asarray(mses)
        summary["metric_mean"] = float(mses.mean())
        summary["metric_standard_error"] = float(mses.std(ddof=1) / np.sqrt(len(mses)))
    return summary
