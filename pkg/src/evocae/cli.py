"""Command-line surface: run searches, fine-tune, evaluate, inspect, report.

Subcommands::

    evolve     run the search per seed; writes log.jsonl, best genotype,
               checkpoint and summary per run directory
    finetune   retrain a chosen genotype longer and score it on the test split
    eval       score stored weights on a dataset under a corruption
    corrupt    write corrupted copies of images for inspection
    arch       parse | expand | shapes | params for architecture strings
    gradcheck  finite-difference verification of the engine gradients
    report     turn run logs into CSV tables and a fitness-curve SVG

Configuration files are JSON with four optional sections: "search" (the
evolution hyperparameters), "data" (image folder or synthetic set),
"finetune" and "output". Command-line flags override file values. The
``EVOCAE_OUT_DIR`` environment variable sets the default output directory.
Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure
(single-line ``error: ...`` on stderr).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataio import (
    CorruptionSpec,
    ImageSet,
    corrupt,
    load_images,
    save_image,
    split,
    synth_dataset,
)
from .engine import gradcheck_network, load_weights, save_weights
from .errors import ConfigError, EvocaeError, ParseError
from .evolve import (
    EvoConfig,
    EvolutionState,
    finetune,
    load_checkpoint,
    run_evolution,
    save_checkpoint,
)
from .genotype import Genotype, decode
from .metrics import evaluate_set
from .network import (
    TaskMode,
    arch_to_string,
    expand,
    param_count,
    parse_arch,
    trace_shapes,
)

log = logging.getLogger("evocae")

USAGE_EXIT = 2
RUNTIME_EXIT = 1


@dataclass
class DataConfig:
    images_dir: str | None = None
    synth_kind: str = "gradients"
    synth_count: int = 48
    synth_size: int = 64
    split: tuple[float, float, float] = (0.75, 0.125, 0.125)
    data_seed: int = 0


@dataclass
class RunConfig:
    """Complete, serializable description of a run."""

    search: EvoConfig = field(default_factory=EvoConfig)
    data: DataConfig = field(default_factory=DataConfig)
    finetune_iterations: int = 500_000
    finetune_milestones: tuple[int, ...] = (200_000, 400_000)
    out_dir: str = ""
    seeds: tuple[int, ...] = (0,)

    def to_dict(self) -> dict:
        from .evolve import _config_to_dict

        return {
            "search": _config_to_dict(self.search),
            "data": {
                "images_dir": self.data.images_dir,
                "synth_kind": self.data.synth_kind,
                "synth_count": self.data.synth_count,
                "synth_size": self.data.synth_size,
                "split": list(self.data.split),
                "data_seed": self.data.data_seed,
            },
            "finetune": {
                "iterations": self.finetune_iterations,
                "milestones": list(self.finetune_milestones),
            },
            "output": {"dir": self.out_dir, "seeds": list(self.seeds)},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        from .evolve import _config_from_dict, _config_to_dict

        known = {"search", "data", "finetune", "output"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls()
        if "search" in raw:
            merged = _config_to_dict(cfg.search)
            extra = set(raw["search"]) - set(merged)
            if extra:
                raise ConfigError(f"unknown search keys: {sorted(extra)}")
            merged.update(raw["search"])
            cfg.search = _config_from_dict(merged)
        if "data" in raw:
            data = raw["data"]
            extra = set(data) - {
                "images_dir",
                "synth_kind",
                "synth_count",
                "synth_size",
                "split",
                "data_seed",
            }
            if extra:
                raise ConfigError(f"unknown data keys: {sorted(extra)}")
            cfg.data = DataConfig(
                images_dir=data.get("images_dir"),
                synth_kind=data.get("synth_kind", cfg.data.synth_kind),
                synth_count=int(data.get("synth_count", cfg.data.synth_count)),
                synth_size=int(data.get("synth_size", cfg.data.synth_size)),
                split=tuple(data.get("split", cfg.data.split)),
                data_seed=int(data.get("data_seed", cfg.data.data_seed)),
            )
        if "finetune" in raw:
            ft = raw["finetune"]
            cfg.finetune_iterations = int(ft.get("iterations", cfg.finetune_iterations))
            cfg.finetune_milestones = tuple(
                int(m) for m in ft.get("milestones", cfg.finetune_milestones)
            )
        if "output" in raw:
            out = raw["output"]
            cfg.out_dir = out.get("dir", cfg.out_dir)
            cfg.seeds = tuple(int(s) for s in out.get("seeds", cfg.seeds))
        return cfg


DESK_PROFILE = {
    "search": {
        "generations": 10,
        "children": 2,
        "mutation_rate": 0.1,
        "rows": 2,
        "cols": 5,
        "level_back": 2,
        "filters": [8, 16],
        "kernels": [1, 3],
        "mode": "denoising",
        "corruption": "noise:30",
        "train_iterations": 50,
        "batch_size": 4,
        "learning_rate": 0.01,
        "input_channels": 1,
        "input_size": 8,
        "checkpoint_interval": 5,
    },
    "data": {"synth_kind": "gradients", "synth_count": 48, "synth_size": 8},
    "finetune": {"iterations": 500, "milestones": [200, 400]},
}

PROFILES = {"full": {}, "desk": DESK_PROFILE}


def _merge_profile(raw: dict, profile: str) -> dict:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choices: {sorted(PROFILES)}")
    merged: dict = {}
    for section, values in PROFILES[profile].items():
        merged.setdefault(section, {}).update(values)
    for section, values in raw.items():
        if isinstance(values, dict):
            merged.setdefault(section, {}).update(values)
        else:
            merged[section] = values
    return merged


def load_run_config(path: str | None, profile: str) -> RunConfig:
    raw: dict = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(_merge_profile(raw, profile))


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from None


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    search = cfg.search
    simple = {
        "generations": "generations",
        "children": "children",
        "mutation_rate": "mutation_rate",
        "iterations": "train_iterations",
        "batch_size": "batch_size",
        "lr": "learning_rate",
        "rows": "rows",
        "cols": "cols",
        "level_back": "level_back",
        "input_size": "input_size",
        "channels": "input_channels",
        "parallel": "parallel",
        "checkpoint_interval": "checkpoint_interval",
    }
    updates = {}
    for flag, field_name in simple.items():
        value = getattr(args, flag, None)
        if value is not None:
            updates[field_name] = value
    if getattr(args, "mode", None):
        updates["mode"] = TaskMode(args.mode)
    if getattr(args, "corruption", None):
        fill = args.fill if getattr(args, "fill", None) is not None else search.corruption.fill
        updates["corruption"] = CorruptionSpec.parse(args.corruption, fill=fill)
    elif getattr(args, "fill", None) is not None:
        updates["corruption"] = replace(search.corruption, fill=args.fill)
    if getattr(args, "filters", None):
        updates["filters"] = _parse_int_list(args.filters)
    if getattr(args, "kernels", None):
        updates["kernels"] = _parse_int_list(args.kernels)
    if updates:
        search = replace(search, **updates)
    cfg.search = search
    if getattr(args, "seeds", None):
        cfg.seeds = _parse_int_list(args.seeds)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "images", None):
        cfg.data.images_dir = args.images
    if getattr(args, "synth", None):
        kind, _, rest = args.synth.partition(":")
        cfg.data.images_dir = None
        cfg.data.synth_kind = kind
        if rest:
            parts = _parse_int_list(rest)
            if len(parts) >= 1:
                cfg.data.synth_count = parts[0]
            if len(parts) >= 2:
                cfg.data.synth_size = parts[1]
    if getattr(args, "data_seed", None) is not None:
        cfg.data.data_seed = args.data_seed
    if getattr(args, "ft_iterations", None) is not None:
        cfg.finetune_iterations = args.ft_iterations
    if getattr(args, "milestones", None):
        cfg.finetune_milestones = _parse_int_list(args.milestones)
    return cfg


def resolve_out_dir(cfg: RunConfig) -> Path:
    out = cfg.out_dir or os.environ.get("EVOCAE_OUT_DIR") or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_dataset(cfg: RunConfig) -> tuple[ImageSet, ImageSet, ImageSet]:
    if cfg.data.images_dir:
        image_set = load_images(cfg.data.images_dir, cfg.search.input_channels)
    else:
        image_set = synth_dataset(
            cfg.data.synth_kind,
            cfg.data.synth_count,
            cfg.data.synth_size,
            seed=cfg.data.data_seed,
            channels=cfg.search.input_channels,
        )
    return split(image_set, cfg.data.split, seed=cfg.data.data_seed)


# -- evolve ------------------------------------------------------------------


def _write_log(path: Path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = apply_overrides(load_run_config(args.config, args.profile), args)
    out_root = resolve_out_dir(cfg)
    train, val, _test = load_dataset(cfg)

    for seed in cfg.seeds:
        run_dir = out_root / f"run-seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        ckpt_path = run_dir / "checkpoint.bin"
        log_path = run_dir / "log.jsonl"
        search = replace(cfg.search, seed=seed)
        state: EvolutionState | None = None
        if args.resume:
            if not ckpt_path.exists():
                raise ConfigError(f"--resume: no checkpoint at {ckpt_path}")
            search, state = load_checkpoint(ckpt_path)
            log.info("resuming seed %d from generation %d", seed, state.generation)

        def on_generation(st: EvolutionState, _search=search, _ckpt=ckpt_path, _log=log_path):
            _write_log(_log, st.rows)
            interval = max(_search.checkpoint_interval, 1)
            if (
                st.generation % interval == 0
                or st.generation >= _search.generations
                or (args.stop_after is not None and st.generation >= args.stop_after)
            ):
                save_checkpoint(_ckpt, _search, st)

        result, state = run_evolution(
            search, train, val, state=state, stop_after=args.stop_after,
            on_generation=on_generation,
        )
        save_checkpoint(ckpt_path, search, state)
        _write_log(log_path, state.rows)
        (run_dir / "best_genotype.json").write_text(result.best.genotype.to_text())
        summary = {
            "seed": seed,
            "generations_completed": state.generation,
            "initial_psnr": result.initial_fitness,
            "best_psnr": result.best.fitness,
            "best_arch": arch_to_string(decode(result.best.genotype)),
            "config": cfg.to_dict(),
            "metadata": {"finished_at": time.strftime("%Y-%m-%dT%H:%M:%S")},
        }
        (run_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        print(
            f"seed {seed}: generation {state.generation}, "
            f"best {result.best.fitness:.3f} dB, arch {summary['best_arch']}"
        )
    return 0


# -- finetune ----------------------------------------------------------------


def cmd_finetune(args: argparse.Namespace) -> int:
    cfg = apply_overrides(load_run_config(args.config, args.profile), args)
    out_dir = resolve_out_dir(cfg)
    genotype = Genotype.from_text(Path(args.genotype).read_text())
    train, _val, test = load_dataset(cfg)
    net, report, trace = finetune(
        genotype,
        cfg.search,
        train,
        test,
        iterations=cfg.finetune_iterations,
        milestones=cfg.finetune_milestones,
    )
    save_weights(net, out_dir / "finetuned.weights.bin")
    (out_dir / "finetune_report.csv").write_text(report.to_csv())
    with open(out_dir / "finetune_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        writer.writerows((i + 1, loss) for i, loss in enumerate(trace))
    print(
        f"finetuned {cfg.finetune_iterations} iterations: "
        f"test PSNR {report.mean_psnr:.3f} dB, SSIM {report.mean_ssim:.4f}"
    )
    return 0


# -- eval / corrupt ----------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = apply_overrides(load_run_config(args.config, args.profile), args)
    net = load_weights(args.weights)
    if cfg.data.images_dir:
        images = load_images(cfg.data.images_dir, net.cae.input_channels)
    else:
        images = synth_dataset(
            cfg.data.synth_kind,
            cfg.data.synth_count,
            cfg.data.synth_size,
            seed=cfg.data.data_seed,
            channels=net.cae.input_channels,
        )
    report = evaluate_set(net, images, cfg.search.corruption, seed=cfg.search.seed)
    out_path = Path(args.report_out) if args.report_out else resolve_out_dir(cfg) / "eval_report.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_csv())
    print(
        f"{report.count} images: mean PSNR {report.mean_psnr:.3f} dB, "
        f"mean SSIM {report.mean_ssim:.4f} -> {out_path}"
    )
    return 0


def cmd_corrupt(args: argparse.Namespace) -> int:
    cfg = apply_overrides(load_run_config(args.config, args.profile), args)
    if not args.images:
        raise ConfigError("corrupt needs --images DIR")
    images = load_images(args.images, cfg.search.input_channels)
    out_dir = Path(args.out) if args.out else resolve_out_dir(cfg) / "corrupted"
    out_dir.mkdir(parents=True, exist_ok=True)
    for index, (image, label) in enumerate(zip(images.images, images.labels)):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.search.seed, index]))
        damaged = corrupt(image[None], cfg.search.corruption, rng)[0]
        save_image(damaged, out_dir / f"{Path(label).stem}.png")
    print(f"wrote {len(images)} corrupted images to {out_dir}")
    return 0


# -- arch tooling --------------------------------------------------------------


def _arch_context(args: argparse.Namespace):
    enc = parse_arch(args.arch)
    mode = TaskMode(args.mode)
    return enc, expand(enc, mode, args.channels, (args.size, args.size))


def cmd_arch(args: argparse.Namespace) -> int:
    if args.action == "parse":
        enc = parse_arch(args.arch)
        print(arch_to_string(enc))
        return 0
    enc, cae = _arch_context(args)
    if args.action == "params":
        print(param_count(cae))
        return 0
    shapes = trace_shapes(cae)
    if args.action == "shapes":
        print(f"input: ({cae.input_channels}, {cae.input_size[0]}, {cae.input_size[1]})")
        names = (
            [f"encoder[{j + 1}]" for j in range(len(cae.encoder))]
            + [f"decoder[{i + 1}]" for i in range(len(cae.decoder))]
            + ["output"]
        )
        for name, shape in zip(names, shapes):
            print(f"{name}: {shape}")
        return 0
    # expand: one line per layer
    for idx, layer in enumerate(cae.layers):
        role = (
            "encoder"
            if idx < len(cae.encoder)
            else "decoder"
            if idx < 2 * len(cae.encoder)
            else "output"
        )
        skip = ""
        if layer.skip_provider:
            skip = " skip-provider"
        if layer.skip_source is not None:
            skip = f" skip-from-encoder[{layer.skip_source + 1}]"
        print(
            f"{role}: {layer.kind.value} {layer.in_channels}->{layer.out_channels} "
            f"k{layer.kernel} s{layer.stride}{skip}"
        )
    return 0


# -- gradcheck -----------------------------------------------------------------


def cmd_gradcheck(args: argparse.Namespace) -> int:
    enc = parse_arch(args.arch)
    mode = TaskMode(args.mode)
    cae = expand(enc, mode, args.channels, (args.size, args.size))
    error = gradcheck_network(cae, batch=2, eps=args.eps, seed=args.seed)
    print(f"max gradient error: {error:.3e} (backend handled by the engine)")
    return 0 if error < 1e-4 else RUNTIME_EXIT


# -- report --------------------------------------------------------------------


def read_log(path: Path) -> list[dict]:
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            log.warning("%s:%d: skipping malformed log line", path, lineno)
    return rows


def write_report(log_paths: list[Path], out_dir: Path) -> dict:
    """Per-run CSVs, an overlay fitness plot (SVG) and a summary table."""
    if not log_paths:
        raise ConfigError("report needs at least one log file")
    out_dir.mkdir(parents=True, exist_ok=True)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    summary_rows = []
    for path in log_paths:
        rows = read_log(path)
        name = path.parent.name if path.name == "log.jsonl" else path.stem
        csv_path = out_dir / f"{name}.fitness.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "parent_psnr", "best_child_psnr"])
            for row in rows:
                writer.writerow(
                    [row.get("generation"), row.get("parent_psnr"), row.get("best_child_psnr")]
                )
        generations = [row["generation"] for row in rows]
        parent = [row["parent_psnr"] for row in rows]
        ax.plot(generations, parent, label=name)
        best_row = max(rows, key=lambda row: row.get("parent_psnr", float("-inf")), default=None)
        summary_rows.append(
            {
                "run": name,
                "generations": len(rows),
                "best_psnr": best_row["parent_psnr"] if best_row else float("nan"),
                "best_arch": best_row.get("arch", "") if best_row else "",
            }
        )
    ax.set_xlabel("generation")
    ax.set_ylabel("validation PSNR (dB)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_dir / "fitness.svg")
    plt.close(fig)

    best_values = [row["best_psnr"] for row in summary_rows]
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "generations", "best_psnr", "best_arch"])
        for row in summary_rows:
            writer.writerow([row["run"], row["generations"], row["best_psnr"], row["best_arch"]])
        writer.writerow(["mean", "", float(np.mean(best_values)), ""])
    return {"runs": summary_rows, "mean_best_psnr": float(np.mean(best_values))}


def cmd_report(args: argparse.Namespace) -> int:
    cfg = apply_overrides(load_run_config(args.config, args.profile), args)
    out_dir = Path(args.out) if args.out else resolve_out_dir(cfg) / "report"
    summary = write_report([Path(p) for p in args.logs], out_dir)
    print(
        f"{len(summary['runs'])} runs, mean best PSNR "
        f"{summary['mean_best_psnr']:.3f} dB -> {out_dir}"
    )
    return 0


# -- parser --------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument(
        "--profile",
        default="full",
        choices=sorted(PROFILES),
        help="preset scale: 'full' defaults or minutes-scale 'desk'",
    )
    parser.add_argument("--out", help="output directory (default: $EVOCAE_OUT_DIR or ./runs)")


def _add_search_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--generations", type=int)
    parser.add_argument("--children", type=int)
    parser.add_argument("--mutation-rate", dest="mutation_rate", type=float)
    parser.add_argument("--iterations", type=int, help="training iterations per candidate")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--rows", type=int)
    parser.add_argument("--cols", type=int)
    parser.add_argument("--level-back", dest="level_back", type=int)
    parser.add_argument("--filters", help="comma-separated filter counts")
    parser.add_argument("--kernels", help="comma-separated odd kernel sizes")
    parser.add_argument("--mode", choices=[m.value for m in TaskMode])
    parser.add_argument(
        "--corruption", help="none | half | center:FRAC | pixel:PROB | noise:SIGMA"
    )
    parser.add_argument("--fill", type=float, help="fill value for masked pixels")
    parser.add_argument("--input-size", dest="input_size", type=int)
    parser.add_argument("--channels", type=int)
    parser.add_argument("--parallel", type=int, help="concurrent child evaluations")
    parser.add_argument("--checkpoint-interval", dest="checkpoint_interval", type=int)
    parser.add_argument("--images", help="image directory (overrides synthetic data)")
    parser.add_argument("--synth", help="synthetic set KIND[:COUNT,SIZE]")
    parser.add_argument("--data-seed", dest="data_seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evocae",
        description="Evolutionary search over symmetric convolutional autoencoders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run the architecture search")
    _add_common(p)
    _add_search_overrides(p)
    p.add_argument("--seeds", help="comma-separated master seeds, one run each")
    p.add_argument("--resume", action="store_true", help="resume from run checkpoints")
    p.add_argument(
        "--stop-after", dest="stop_after", type=int,
        help="stop cleanly after this generation (resumable)",
    )
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("finetune", help="retrain a genotype longer and score it")
    _add_common(p)
    _add_search_overrides(p)
    p.add_argument("--genotype", required=True, help="genotype JSON file")
    p.add_argument("--ft-iterations", dest="ft_iterations", type=int)
    p.add_argument("--milestones", help="comma-separated lr decay iterations")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="score stored weights on a dataset")
    _add_common(p)
    _add_search_overrides(p)
    p.add_argument("--weights", required=True, help="weight checkpoint file")
    p.add_argument("--report-out", dest="report_out", help="CSV output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("corrupt", help="write corrupted copies of images")
    _add_common(p)
    _add_search_overrides(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("arch", help="architecture-string tooling")
    p.add_argument("action", choices=["parse", "expand", "shapes", "params"])
    p.add_argument("arch", help="architecture string, e.g. 'CS(64,3)-C(128,5)'")
    p.add_argument("--mode", default=TaskMode.INPAINTING.value,
                   choices=[m.value for m in TaskMode])
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=cmd_arch)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--arch", default="CS(3,3)-C(4,3)")
    p.add_argument("--mode", default=TaskMode.INPAINTING.value,
                   choices=[m.value for m in TaskMode])
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="logs -> CSV tables and fitness-curve SVG")
    _add_common(p)
    p.add_argument("logs", nargs="+", help="log.jsonl files from evolve runs")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except EvocaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
