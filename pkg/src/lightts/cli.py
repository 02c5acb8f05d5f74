"""Experiment front-end.

Commands (`lightts <cmd> --config <path> ...`):

    train     fit one model, write checkpoint + history + report
    evaluate  score a checkpoint on the val or test split
    flops     analytic MAC/parameter table for all ablation variants
    sweep     train over several seeds and aggregate (mean/std) the metrics

Configs are TOML with [data], [model], [train], [eval] sections; every key
except data.path, data.T, data.L and data.mode has a default. Artifacts
land in `<out>/<name>-<seed>/` where <name> is the config file stem:
checkpoint.manifest, checkpoint.bin, history.csv, report.json. Reports are
JSON with sorted keys; every number a command prints is also in the
report. Exit codes: 0 ok, 2 config, 3 data, 4 numeric, 5 io.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import checkpoint, metrics, model, pipeline, sampling, train
from .errors import ConfigError, DataError, LightTSError

_SCALES = ("standardized", "raw")


@dataclass
class ExperimentConfig:
    name: str
    path: str
    T: int
    L: int
    mode: str
    split: str
    model_kw: dict      # C/F/Fp_ab/Fp_c/slope/ablation (N filled from data)
    train_cfg: train.TrainConfig
    mse_scale: str
    rse_scale: str


def _take(section: dict, key, default=None, required=False, kind=None):
    if key not in section:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    v = section.pop(key)
    if kind is bool:
        if not isinstance(v, bool):
            raise ConfigError(f"config key {key!r} must be a boolean, got {v!r}")
        return v
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {v!r}")
        return v
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {v!r}")
        return float(v)
    if kind is str:
        if not isinstance(v, str):
            raise ConfigError(f"config key {key!r} must be a string, got {v!r}")
        return v
    return v


def _no_leftovers(name, section):
    if section:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(section)}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None

    data = dict(raw.pop("data", {}))
    modl = dict(raw.pop("model", {}))
    trn = dict(raw.pop("train", {}))
    evl = dict(raw.pop("eval", {}))
    if raw:
        raise ConfigError(f"unknown config sections: {sorted(raw)}")

    csv_path = _take(data, "path", required=True, kind=str)
    T = _take(data, "T", required=True, kind=int)
    L = _take(data, "L", required=True, kind=int)
    mode = _take(data, "mode", required=True, kind=str)
    split = _take(data, "split", default="r622", kind=str)
    _no_leftovers("data", data)
    pipeline.SplitSpec.from_name(split)  # validate early

    C = _take(modl, "C", default=sampling.default_chunk_len(T), kind=int)
    F = _take(modl, "F", default=64, kind=int)
    Fp_ab = _take(modl, "Fp_ab", default=16, kind=int)
    Fp_c = _take(modl, "Fp_c", default=16, kind=int)
    slope = _take(modl, "slope", default=0.01, kind=float)
    variant = _take(modl, "ablation", default="full", kind=str)
    _no_leftovers("model", modl)
    if variant not in model.VARIANTS:
        raise ConfigError(f"model.ablation must be one of {model.VARIANTS}, got {variant!r}")
    ablation = frozenset() if variant == "full" else frozenset({variant})

    tc = train.TrainConfig(
        lr=_take(trn, "lr", default=1e-3, kind=float),
        beta1=_take(trn, "beta1", default=0.9, kind=float),
        beta2=_take(trn, "beta2", default=0.999, kind=float),
        eps_adam=_take(trn, "eps_adam", default=1e-8, kind=float),
        batch_size=_take(trn, "batch_size", default=32, kind=int),
        max_epochs=_take(trn, "max_epochs", default=100, kind=int),
        patience=_take(trn, "patience", default=10, kind=int),
        seed=_take(trn, "seed", default=0, kind=int),
        shuffle=_take(trn, "shuffle", default=True, kind=bool),
        clip_norm=_take(trn, "clip_norm", default=None, kind=float),
        max_steps=_take(trn, "max_steps", default=None, kind=int),
    )
    _no_leftovers("train", trn)

    mse_scale = _take(evl, "mse_scale", default="standardized", kind=str)
    rse_scale = _take(evl, "rse_scale", default="raw", kind=str)
    _no_leftovers("eval", evl)
    for s in (mse_scale, rse_scale):
        if s not in _SCALES:
            raise ConfigError(f"metric scale must be one of {_SCALES}, got {s!r}")

    return ExperimentConfig(
        name=path.stem,
        path=csv_path,
        T=T,
        L=L,
        mode=mode,
        split=split,
        model_kw=dict(C=C, F=F, Fp_ab=Fp_ab, Fp_c=Fp_c, slope=slope, ablation=ablation),
        train_cfg=tc,
        mse_scale=mse_scale,
        rse_scale=rse_scale,
    )


def config_echo(exp: ExperimentConfig, seed: int) -> dict:
    """Full provenance echo; feeding this back as TOML reproduces the run."""
    kw = exp.model_kw
    variant = next(iter(kw["ablation"]), "full")
    tc = exp.train_cfg
    trn = {
        "lr": tc.lr, "beta1": tc.beta1, "beta2": tc.beta2, "eps_adam": tc.eps_adam,
        "batch_size": tc.batch_size, "max_epochs": tc.max_epochs,
        "patience": tc.patience, "seed": seed, "shuffle": tc.shuffle,
    }
    if tc.clip_norm is not None:
        trn["clip_norm"] = tc.clip_norm
    if tc.max_steps is not None:
        trn["max_steps"] = tc.max_steps
    return {
        "data": {"path": exp.path, "T": exp.T, "L": exp.L,
                 "mode": exp.mode, "split": exp.split},
        "model": {"C": kw["C"], "F": kw["F"], "Fp_ab": kw["Fp_ab"],
                  "Fp_c": kw["Fp_c"], "slope": kw["slope"], "ablation": variant},
        "train": trn,
        "eval": {"mse_scale": exp.mse_scale, "rse_scale": exp.rse_scale},
    }


def config_to_toml(echo: dict) -> str:
    """Render a config echo back into a loadable TOML file."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        return json.dumps(v)  # quoted string

    out = []
    for section, keys in echo.items():
        out.append(f"[{section}]")
        for k, v in keys.items():
            out.append(f"{k} = {fmt(v)}")
        out.append("")
    return "\n".join(out)


@dataclass
class PreparedData:
    dataset: pipeline.Dataset
    scaler: pipeline.Scaler
    scaled: pipeline.Dataset
    ranges: tuple  # (train, val, test) row ranges
    fingerprint: dict


def prepare_data(exp: ExperimentConfig) -> PreparedData:
    ds = pipeline.load_csv(exp.path)
    spec = pipeline.SplitSpec.from_name(exp.split)
    ranges = pipeline.split(ds, spec, min_len=exp.T + exp.L)
    scaler = pipeline.fit_scaler(ds, ranges[0])
    scaled = pipeline.apply_scaler(ds, scaler)
    digest = hashlib.sha256(Path(exp.path).read_bytes()).hexdigest()
    fp = {"path": str(exp.path), "rows": ds.n_rows, "cols": ds.n_series, "sha256": digest}
    return PreparedData(ds, scaler, scaled, ranges, fp)


def build_model_config(exp: ExperimentConfig, n_series: int) -> model.LightTSConfig:
    return model.LightTSConfig(N=n_series, T=exp.T, L=exp.L, mode=exp.mode, **exp.model_kw)


def _windows(prep: PreparedData, exp: ExperimentConfig, which: int) -> pipeline.WindowBatch:
    return pipeline.make_windows(prep.scaled, prep.ranges[which], exp.T, exp.L, exp.mode)


def split_metrics(params, cfg, windows, scaler, mse_scale, rse_scale) -> dict:
    """Model and naive-baseline metrics on both scales, plus the headline
    selection the flags ask for."""
    forecasts = train.evaluate_forecasts(params, cfg, windows)
    naive = metrics.naive_repeat_last(windows.inputs, cfg.L, cfg.mode)
    out = {}
    for scale in _SCALES:
        if scale == "raw":
            y = pipeline.invert_scaler(windows.targets, scaler)
            f = pipeline.invert_scaler(forecasts, scaler)
            nv = pipeline.invert_scaler(naive, scaler)
        else:
            y, f, nv = windows.targets, forecasts, naive
        out[scale] = {
            "model": metrics.compute_metrics(y, f, scale).as_dict(),
            "naive": metrics.compute_metrics(y, nv, scale).as_dict(),
        }
    out["headline"] = {
        "mse": out[mse_scale]["model"]["mse"],
        "mae": out[mse_scale]["model"]["mae"],
        "rse": out[rse_scale]["model"]["rse"],
        "corr": out[rse_scale]["model"]["corr"],
    }
    return out


def _write_report(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def run_dir_for(exp: ExperimentConfig, seed: int, out) -> Path:
    return Path(out) / f"{exp.name}-{seed}"


def cmd_train(config_path, seed=None, out="runs") -> dict:
    t0 = time.perf_counter()
    exp = load_config(config_path)
    if seed is not None:
        exp.train_cfg = train.TrainConfig(
            **{**_train_cfg_dict(exp.train_cfg), "seed": seed}
        )
    seed = exp.train_cfg.seed

    prep = prepare_data(exp)
    cfg = build_model_config(exp, prep.dataset.n_series)
    train_w = _windows(prep, exp, 0)
    val_w = _windows(prep, exp, 1)
    test_w = _windows(prep, exp, 2)

    params = model.init_params(cfg, seed)
    result = train.train_loop(cfg, params, train_w, val_w, exp.train_cfg)
    best = result.best_params

    run_dir = run_dir_for(exp, seed, out)
    run_dir.mkdir(parents=True, exist_ok=True)
    checkpoint.save_checkpoint(
        run_dir / "checkpoint.manifest", run_dir / "checkpoint.bin", best
    )
    with open(run_dir / "history.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,train_mse,val_mse\n")
        for row in result.history:
            fh.write(f"{row.epoch},{row.train_mse!r},{row.val_mse!r}\n")

    report = {
        "command": "train",
        "name": exp.name,
        "seed": seed,
        "config": config_echo(exp, seed),
        "dataset": prep.fingerprint,
        "history_csv": "history.csv",
        "epochs_run": len(result.history),
        "optimizer_steps": result.steps,
        "best_epoch": result.best_epoch,
        "best_val_mse": result.best_val_mse,
        "stopped_early": result.stopped_early,
        "metrics": {
            "val": split_metrics(best, cfg, val_w, prep.scaler, exp.mse_scale, exp.rse_scale),
            "test": split_metrics(best, cfg, test_w, prep.scaler, exp.mse_scale, exp.rse_scale),
        },
        "model_mac_count": model.model_mac_count(cfg),
        "trainable_params": best.trainable_count(),
        "wall_seconds": {
            "total": time.perf_counter() - t0,
            "per_epoch_ms": [row.wall_ms for row in result.history],
        },
        "artifacts": sorted(p.name for p in run_dir.iterdir()) + ["report.json"],
    }
    _write_report(run_dir / "report.json", report)
    print(f"train {exp.name} seed={seed}: "
          f"best_epoch={result.best_epoch} "
          f"val_mse={result.best_val_mse!r} "
          f"test_mse={report['metrics']['test']['headline']['mse']!r}")
    print(f"artifacts: {run_dir}")
    return report


def _train_cfg_dict(tc: train.TrainConfig) -> dict:
    return {
        "lr": tc.lr, "beta1": tc.beta1, "beta2": tc.beta2, "eps_adam": tc.eps_adam,
        "batch_size": tc.batch_size, "max_epochs": tc.max_epochs,
        "patience": tc.patience, "seed": tc.seed, "shuffle": tc.shuffle,
        "clip_norm": tc.clip_norm, "max_steps": tc.max_steps,
    }


def cmd_evaluate(checkpoint_dir, config_path, split_name="test", out=None) -> dict:
    if split_name not in ("val", "test"):
        raise ConfigError(f"--split must be val or test, got {split_name!r}")
    exp = load_config(config_path)
    prep = prepare_data(exp)
    cfg = build_model_config(exp, prep.dataset.n_series)

    ck = Path(checkpoint_dir)
    manifest = ck / "checkpoint.manifest" if ck.is_dir() else ck
    blob = manifest.with_suffix(".bin")
    params = model.init_params(cfg, seed=0)
    checkpoint.restore_params(params, checkpoint.load_checkpoint(manifest, blob))

    which = 1 if split_name == "val" else 2
    windows = _windows(prep, exp, which)
    report = {
        "command": "evaluate",
        "name": exp.name,
        "split": split_name,
        "checkpoint": str(manifest),
        "config": config_echo(exp, exp.train_cfg.seed),
        "dataset": prep.fingerprint,
        "metrics": {
            split_name: split_metrics(
                params, cfg, windows, prep.scaler, exp.mse_scale, exp.rse_scale
            )
        },
        "model_mac_count": model.model_mac_count(cfg),
        "trainable_params": params.trainable_count(),
    }
    dest = Path(out) if out else (ck if ck.is_dir() else ck.parent)
    dest.mkdir(parents=True, exist_ok=True)
    _write_report(dest / f"eval_{split_name}_report.json", report)
    head = report["metrics"][split_name]["headline"]
    print(f"evaluate {exp.name} [{split_name}]: "
          + " ".join(f"{k}={v!r}" for k, v in head.items()))
    return report


def cmd_flops(config_path, out="runs") -> dict:
    exp = load_config(config_path)
    prep = prepare_data(exp)
    rows = {}
    for variant in model.VARIANTS:
        cfg = model.build_ablation(build_model_config(exp, prep.dataset.n_series), variant)
        rows[variant] = {
            "trainable_params": model.trainable_param_count(cfg),
            "model_mac_count": model.model_mac_count(cfg),
        }
    report = {
        "command": "flops",
        "name": exp.name,
        "config": config_echo(exp, exp.train_cfg.seed),
        "dataset": prep.fingerprint,
        "variants": rows,
    }
    dest = Path(out) / f"{exp.name}-flops"
    dest.mkdir(parents=True, exist_ok=True)
    _write_report(dest / "report.json", report)
    print(f"{'variant':<8} {'params':>12} {'macs':>14}")
    for variant, row in rows.items():
        print(f"{variant:<8} {row['trainable_params']:>12} {row['model_mac_count']:>14}")
    return report


def cmd_sweep_seeds(config_path, seeds, out="runs") -> dict:
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigError(f"sweep needs at least 2 seeds, got {seeds}")
    exp = load_config(config_path)
    sub_reports = []
    failures = []
    for s in seeds:
        try:
            sub_reports.append(cmd_train(config_path, seed=s, out=out))
        except LightTSError as e:
            failures.append({"seed": s, "class": e.cli_class, "message": str(e)})

    summary = {}
    if exp.mode == model.MULTI_STEP:
        tracked = ("mse", "mae")
    else:
        tracked = ("rse", "corr")
    if len(sub_reports) >= 2:
        for key in tracked:
            vals = [r["metrics"]["test"]["headline"][key] for r in sub_reports]
            agg = metrics.aggregate_seeds(vals)
            summary[f"test_{key}"] = agg.as_dict()

    report = {
        "command": "sweep",
        "name": exp.name,
        "seeds": seeds,
        "config": config_echo(exp, exp.train_cfg.seed),
        "runs": [
            {"seed": r["seed"], "report": f"{exp.name}-{r['seed']}/report.json",
             "test_headline": r["metrics"]["test"]["headline"]}
            for r in sub_reports
        ],
        "failures": failures,
        "summary": summary,
    }
    dest = Path(out) / f"{exp.name}-sweep"
    dest.mkdir(parents=True, exist_ok=True)
    _write_report(dest / "report.json", report)
    for key, agg in summary.items():
        print(f"{key}: mean={agg['mean']!r} std={agg['std']!r} ({len(seeds)} seeds)")
    if failures:
        raise DataError(f"{len(failures)} of {len(seeds)} seed runs failed; "
                        f"partial report at {dest / 'report.json'}")
    return report


def _parse_seeds(text: str):
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise ConfigError(f"--seeds must be comma-separated integers, got {text!r}") from None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lightts", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="runs")

    p = sub.add_parser("evaluate", help="score a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("val", "test"), default="test")
    p.add_argument("--out", default=None)

    p = sub.add_parser("flops", help="MAC/parameter table per ablation variant")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="runs")

    p = sub.add_parser("sweep", help="multi-seed robustness run")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--out", default="runs")

    args = ap.parse_args(argv)
    try:
        if args.cmd == "train":
            cmd_train(args.config, seed=args.seed, out=args.out)
        elif args.cmd == "evaluate":
            cmd_evaluate(args.checkpoint, args.config, args.split, out=args.out)
        elif args.cmd == "flops":
            cmd_flops(args.config, out=args.out)
        elif args.cmd == "sweep":
            cmd_sweep_seeds(args.config, _parse_seeds(args.seeds), out=args.out)
    except LightTSError as e:
        sys.stderr.write(f"{e.cli_class}: {_one_line(e)}\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(f"io: {_one_line(e)}\n")
        return 5
    return 0


def _one_line(e) -> str:
    return " ".join(str(e).split())


if __name__ == "__main__":
    sys.exit(main())
