"""Command-line pipeline: generate, train, evaluate, reproduce, plot.

Configuration comes from an optional plain key=value file plus flags; flags
win. All randomness flows from one root seed, recorded in every output
header. Output files are append-only: a rerun into the same directory never
overwrites an existing file and fails loudly instead.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import multiprocessing
import os
import sys
from pathlib import Path

from . import cells, evaluation, schedules, training
from .checkpoints import load_checkpoint, save_checkpoint
from .plotting import render_bh_svg
from .preisach import PreisachPlane
from .schedules import EXPERIMENTS, CURVE_NAMES, ExperimentSpec
from .trace import read_trace, write_trace
from .training import NumericError, TrainConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

ENV_OUT = "HYSTKIT_OUT"


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------- config


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    for raw in p.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line (expected key=value): {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_CONFIG_KEYS = {
    "experiment": str,
    "cell": str,
    "seed": int,
    "out": str,
    "state": str,
    "epochs": int,
    "hidden": int,
    "lr": float,
    "dt": float,
    "jobs": int,
    "grid_resolution": int,
    "h_sat": float,
    "b_sat": float,
    "coercivity_mean": float,
    "coercivity_width": float,
    "interaction_width": float,
    "b_max": float,
    "forc_origin1": float,
    "forc_origin2": float,
    "minor_max1": float,
    "minor_max2": float,
}


class RunConfig:
    """Merged settings of one invocation (config file < flags)."""

    def __init__(self, args: argparse.Namespace):
        file_values: dict = {}
        if args.config:
            raw = _parse_config_file(args.config)
            for key, value in raw.items():
                if key not in _CONFIG_KEYS:
                    raise ConfigError(f"unknown config key: {key}")
                try:
                    file_values[key] = _CONFIG_KEYS[key](value)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {value!r}") from exc

        def pick(name, default=None):
            flag = getattr(args, name, None)
            if flag is not None:
                return flag
            return file_values.get(name, default)

        self.experiment = pick("experiment")
        self.cell = pick("cell", "all")
        self.seed = int(pick("seed", 0))
        out = pick("out") or os.environ.get(ENV_OUT) or "runs"
        self.out = Path(out)
        self.state = pick("state", "cold")
        self.epochs = pick("epochs")
        self.hidden = pick("hidden")
        self.lr = pick("lr")
        self.dt = pick("dt")
        self.jobs = int(pick("jobs", 1))
        self.plane_kwargs = {
            k: file_values[k]
            for k in (
                "grid_resolution", "h_sat", "b_sat",
                "coercivity_mean", "coercivity_width", "interaction_width",
            )
            if k in file_values
        }
        self.custom_spec = None
        if "b_max" in file_values:
            try:
                self.custom_spec = ExperimentSpec(
                    b_max=file_values["b_max"],
                    forc_origins=(file_values["forc_origin1"], file_values["forc_origin2"]),
                    minor_maxima=(file_values["minor_max1"], file_values["minor_max2"]),
                )
            except KeyError as exc:
                raise ConfigError(f"custom experiment needs {exc} in the config file")
            except ValueError as exc:
                raise ConfigError(str(exc))

        if self.state not in ("cold", "warm"):
            raise ConfigError(f"state must be cold or warm, got {self.state!r}")
        if self.cell != "all" and self.cell not in cells.CELL_KINDS:
            raise ConfigError(f"cell must be one of {cells.CELL_KINDS} or all")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def experiments(self, default_all: bool = False) -> list[tuple[str, ExperimentSpec]]:
        """(label, spec) pairs selected by --experiment / custom config."""
        if self.custom_spec is not None:
            return [("custom", self.custom_spec)]
        if self.experiment is None:
            ids = list(EXPERIMENTS) if default_all else [1]
        else:
            ids = [self.experiment]
        return [(f"exp{k}", EXPERIMENTS[k]) for k in ids]

    def cell_kinds(self) -> list[str]:
        return list(cells.CELL_KINDS) if self.cell == "all" else [self.cell]

    def train_config(self) -> TrainConfig:
        kwargs = {"seed": self.seed}
        if self.epochs is not None:
            kwargs["epochs"] = self.epochs
        if self.hidden is not None:
            kwargs["m"] = self.hidden
        if self.lr is not None:
            kwargs["lr"] = self.lr
        if self.dt is not None:
            kwargs["dt"] = self.dt
        try:
            return TrainConfig(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc))

    def meta(self, label: str) -> dict:
        return {"seed": self.seed, "experiment": label}


# ------------------------------------------------------------------- helpers


def _fresh_path(path: Path) -> Path:
    if path.exists():
        raise ConfigError(f"refusing to overwrite existing output: {path}")
    return path


def _trace_path(out: Path, label: str, curve: str) -> Path:
    return out / f"{label}_{curve}.csv"


def _checkpoint_path(out: Path, label: str, kind: str) -> Path:
    return out / f"{label}_{kind}_checkpoint.txt"


def _ensure_traces(cfg: RunConfig, label: str, spec: ExperimentSpec) -> dict:
    """Load the experiment's traces, generating them first when absent."""
    paths = {curve: _trace_path(cfg.out, label, curve) for curve in CURVE_NAMES}
    if not all(p.is_file() for p in paths.values()):
        missing = [c for c, p in paths.items() if not p.is_file()]
        if len(missing) != len(paths):
            raise ConfigError(
                f"partial trace set for {label} in {cfg.out} (missing {missing}); "
                "generate into a fresh directory"
            )
        _generate_one(cfg, label, spec)
    return {curve: read_trace(p) for curve, p in paths.items()}


def _generate_one(cfg: RunConfig, label: str, spec: ExperimentSpec) -> None:
    plane = PreisachPlane(**cfg.plane_kwargs)
    traces = schedules.generate_experiment_traces(spec, plane)
    for curve, trace in traces.items():
        path = _fresh_path(_trace_path(cfg.out, label, curve))
        write_trace(path, trace, meta={**cfg.meta(label), "curve": curve})
        print(f"wrote {path} ({len(trace)} samples)")


def _train_one(task) -> tuple[str, object]:
    kind, trace, tc = task
    return kind, training.train(kind, trace, tc)


def _train_cells(cfg: RunConfig, label: str, major_trace) -> dict[str, tuple]:
    tc = cfg.train_config()
    kinds = cfg.cell_kinds()
    tasks = [(kind, major_trace, tc) for kind in kinds]
    if cfg.jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(min(cfg.jobs, len(tasks))) as pool:
            reports = dict(pool.map(_train_one, tasks))
    else:
        reports = dict(map(_train_one, tasks))

    models = {}
    for kind in kinds:
        report = reports[kind]
        ckpt = _fresh_path(_checkpoint_path(cfg.out, label, kind))
        save_checkpoint(ckpt, report.params, report.norm, cfg.seed)
        loss_path = _fresh_path(cfg.out / f"{label}_{kind}_loss.csv")
        training.write_loss_history(loss_path, report.losses, meta=cfg.meta(label))
        print(
            f"trained {kind} on {label}: final loss {report.losses[-1]:.3e} "
            f"({report.wall_time:.1f}s)" if len(report.losses) else
            f"trained {kind} on {label}: 0 epochs"
        )
        models[kind] = (report.params, report.norm)
    return models


def _evaluate_models(cfg: RunConfig, label: str, traces: dict, models: dict) -> list:
    rows, results = evaluation.evaluate_models(traces, models, state_mode=cfg.state)
    suffix = "" if cfg.state == "cold" else "_warm"
    metrics_path = _fresh_path(cfg.out / f"{label}_metrics{suffix}.csv")
    evaluation.write_metrics(metrics_path, rows, meta={**cfg.meta(label), "state": cfg.state})
    for (curve, kind), res in results.items():
        path = _fresh_path(cfg.out / f"{label}_{curve}_{kind}_rollout{suffix}.csv")
        evaluation.write_rollout(path, res, meta={**cfg.meta(label), "state": cfg.state})
    print(f"wrote {metrics_path}")
    return rows


def _print_summary(label: str, rows: list) -> None:
    print(f"\n{label}: closed-loop metrics (state and units: physical tesla)")
    header = f"{'curve':8s} {'cell':8s} {'rel_l2':>10s} {'expl_var':>10s} {'max_err':>10s} {'mae':>10s}"
    print(header)
    for r in rows:
        ev = "undef" if r.explained_variance is None else f"{r.explained_variance:10.4f}"
        print(
            f"{r.curve:8s} {r.cell:8s} {r.rel_l2:10.4f} {ev:>10s} "
            f"{r.max_error:10.4f} {r.mean_abs_error:10.4f}"
        )


# ---------------------------------------------------------------- subcommands


def cmd_generate(cfg: RunConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    for label, spec in cfg.experiments():
        _generate_one(cfg, label, spec)
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    for label, spec in cfg.experiments():
        traces = _ensure_traces(cfg, label, spec)
        _train_cells(cfg, label, traces["major"])
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    for label, spec in cfg.experiments():
        traces = _ensure_traces(cfg, label, spec)
        models = {}
        for kind in cfg.cell_kinds():
            ckpt = _checkpoint_path(cfg.out, label, kind)
            if not ckpt.is_file():
                raise ConfigError(f"missing checkpoint {ckpt}; run train first")
            params, norm, _ = load_checkpoint(ckpt)
            models[kind] = (params, norm)
        rows = _evaluate_models(cfg, label, traces, models)
        _print_summary(label, rows)
    return EXIT_OK


def cmd_reproduce(cfg: RunConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    for label, spec in cfg.experiments(default_all=True):
        traces = _ensure_traces(cfg, label, spec)
        models = _train_cells(cfg, label, traces["major"])
        rows = _evaluate_models(cfg, label, traces, models)
        _print_summary(label, rows)
    return EXIT_OK


def cmd_plot(cfg: RunConfig, trajectory: str) -> int:
    path = Path(trajectory)
    if not path.is_file():
        raise ConfigError(f"trajectory file not found: {path}")
    res = evaluation.read_rollout(path)
    curves = []
    label = path.name.split("_")[0]
    major_path = path.parent / f"{label}_major.csv"
    if major_path.is_file():
        major = read_trace(major_path)
        curves.append(("training loop", major.h, major.b))
    curves.append(("ground truth", res.h, res.b_true))
    curves.append(("prediction", res.h, res.b_pred))
    svg = render_bh_svg(curves, title=path.stem)
    out_path = _fresh_path(path.with_suffix(".svg"))
    out_path.write_text(svg)
    print(f"wrote {out_path}")
    return EXIT_OK


# --------------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hystkit",
        description="Synthetic hysteresis data, recurrent-model training, and "
        "closed-loop generalization scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p: argparse.ArgumentParser) -> None:
        p.add_argument("--experiment", type=int, choices=sorted(EXPERIMENTS))
        p.add_argument("--cell", choices=list(cells.CELL_KINDS) + ["all"])
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./runs)")
        p.add_argument("--state", choices=["cold", "warm"])
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--epochs", type=int)
        p.add_argument("--hidden", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--jobs", type=int)

    for name, help_text in (
        ("generate", "write the five B-H traces of an experiment"),
        ("train", "fit the requested cells on the major loop"),
        ("evaluate", "closed-loop rollout of saved checkpoints plus metrics"),
        ("reproduce", "generate + train + evaluate (default: experiments 1-4)"),
    ):
        add_shared(sub.add_parser(name, help=help_text))

    plot = sub.add_parser("plot", help="render a trajectory dump as SVG")
    add_shared(plot)
    plot.add_argument("trajectory", help="a *_rollout.csv file")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "reproduce":
            return cmd_reproduce(cfg)
        return cmd_plot(cfg, args.trajectory)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
