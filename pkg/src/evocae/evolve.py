"""One-parent evolution loop: mutate, train, score by validation PSNR, select.

Per generation the parent spawns ``children`` mutated candidates, each is
trained from scratch for a fixed iteration budget and scored by mean
per-image validation PSNR. The parent is replaced only on strict improvement;
otherwise its non-functioning genes drift (neutral modification) and the
fitness is kept. All randomness derives from (master seed, purpose,
generation, child index) streams, so results are independent of the parallel
evaluation width and of child completion order, and a checkpoint needs no raw
RNG state to resume an identical run.
"""

from __future__ import annotations

import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import CorruptionKind, CorruptionSpec, ImageSet, corrupt
from .engine import init_weights, train_steps
from .errors import ArchitectureError, ConfigError, SearchError, TrainingDivergedError
from .genotype import (
    Genotype,
    build_type_table,
    decode,
    minimal_genotype,
    mutate_child,
    neutral_modify,
)
from .metrics import evaluate_set
from .network import TaskMode, arch_to_string, architecture_validator, expand

INVALID_FITNESS = float("-inf")

# Stream purposes for seed derivation.
_STREAM_INIT = 0
_STREAM_MUTATION = 1
_STREAM_NEUTRAL = 2
_STREAM_TRAIN = 3


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, *key]))


@dataclass
class EvoConfig:
    """Search hyperparameters. Defaults match the full-scale configuration."""

    generations: int = 250
    children: int = 4
    mutation_rate: float = 0.1
    rows: int = 3
    cols: int = 20
    level_back: int = 5
    filters: tuple[int, ...] = (64, 128, 256)
    kernels: tuple[int, ...] = (1, 3, 5)
    mode: TaskMode = TaskMode.INPAINTING
    corruption: CorruptionSpec = field(
        default_factory=lambda: CorruptionSpec(CorruptionKind.CENTER, 0.5)
    )
    train_iterations: int = 20_000
    batch_size: int = 16
    learning_rate: float = 1e-3
    input_channels: int = 3
    input_size: int = 64
    seed: int = 0
    parallel: int = 1
    checkpoint_interval: int = 10
    mutation_attempts: int = 10_000
    keep_weights: bool = False

    def validate(self) -> None:
        if self.generations < 1 or self.children < 1:
            raise ConfigError("generations and children must be >= 1")
        if not 0.0 < self.mutation_rate <= 1.0:
            raise ConfigError(f"mutation rate must be in (0, 1]: {self.mutation_rate}")
        if self.train_iterations < 0 or self.batch_size < 1:
            raise ConfigError("train_iterations must be >= 0 and batch_size >= 1")
        if self.parallel < 1:
            raise ConfigError("parallel width must be >= 1")
        if min(self.rows, self.cols, self.level_back) < 1:
            raise ConfigError("grid dimensions must be >= 1")
        build_type_table(self.filters, self.kernels)


@dataclass
class Individual:
    genotype: Genotype
    fitness: float
    network: object | None = None

    @property
    def valid(self) -> bool:
        return self.fitness != INVALID_FITNESS


@dataclass
class EvolutionState:
    """Everything needed to resume a run identically."""

    generation: int
    parent: Individual
    initial_fitness: float
    rows: list[dict] = field(default_factory=list)


@dataclass
class EvolutionResult:
    best: Individual
    initial_fitness: float
    rows: list[dict]


def batch_stream(
    images: ImageSet, cfg: EvoConfig, rng: np.random.Generator
):
    """Endless (corrupted, clean) minibatches; crops a patch when images are larger."""
    size = cfg.input_size
    while True:
        idx = rng.integers(0, len(images), size=cfg.batch_size)
        batch = []
        for i in idx:
            img = images.images[int(i)]
            _, h, w = img.shape
            if h > size or w > size:
                top = int(rng.integers(0, h - size + 1))
                left = int(rng.integers(0, w - size + 1))
                img = img[:, top : top + size, left : left + size]
            batch.append(img)
        clean = np.stack(batch).astype(np.float32)
        yield corrupt(clean, cfg.corruption, rng), clean


def select_best(children: list[Individual]) -> Individual:
    """Highest fitness wins; ties break toward the lowest child index."""
    best = children[0]
    for child in children[1:]:
        if child.fitness > best.fitness:
            best = child
    return best


def evaluate_fitness(
    genotype: Genotype,
    cfg: EvoConfig,
    train: ImageSet,
    val: ImageSet,
    stream_key: tuple[int, ...] = (0, 0),
) -> Individual:
    """Train a candidate from scratch and score it on the validation set.

    Per-candidate failures (invalid architecture, diverged training) yield an
    invalid-fitness Individual instead of raising.
    """
    enc = decode(genotype)
    try:
        cae = expand(
            enc, cfg.mode, cfg.input_channels, (cfg.input_size, cfg.input_size)
        )
    except ArchitectureError:
        return Individual(genotype, INVALID_FITNESS)
    init_rng = derive_rng(cfg.seed, _STREAM_TRAIN, *stream_key, 0)
    data_rng = derive_rng(cfg.seed, _STREAM_TRAIN, *stream_key, 1)
    net = init_weights(cae, init_rng)
    try:
        net, _ = train_steps(
            net,
            batch_stream(train, cfg, data_rng),
            cfg.train_iterations,
            cfg.learning_rate,
        )
    except TrainingDivergedError:
        return Individual(genotype, INVALID_FITNESS)
    report = evaluate_set(net, val, cfg.corruption, seed=cfg.seed)
    return Individual(genotype, report.mean_psnr, net if cfg.keep_weights else None)


def run_evolution(
    cfg: EvoConfig,
    train: ImageSet,
    val: ImageSet,
    state: EvolutionState | None = None,
    stop_after: int | None = None,
    on_generation=None,
) -> tuple[EvolutionResult, EvolutionState]:
    """Run (or resume) the search; see the module docstring for the scheme.

    ``stop_after`` ends the run cleanly once that generation completes,
    leaving a state from which ``run_evolution`` continues identically.
    ``on_generation(state)`` is invoked after every completed generation.
    """
    cfg.validate()
    if len(train) == 0 or len(val) == 0:
        raise ConfigError("training and validation sets must be non-empty")
    validity = architecture_validator(
        cfg.mode, cfg.input_channels, (cfg.input_size, cfg.input_size)
    )

    if state is None:
        table = build_type_table(cfg.filters, cfg.kernels)
        parent_geno = minimal_genotype(
            cfg.rows, cfg.cols, cfg.level_back, table, derive_rng(cfg.seed, _STREAM_INIT)
        )
        parent = evaluate_fitness(parent_geno, cfg, train, val, stream_key=(0, 0))
        state = EvolutionState(
            generation=0, parent=parent, initial_fitness=parent.fitness
        )
        if on_generation:
            on_generation(state)

    for gen in range(state.generation + 1, cfg.generations + 1):
        started = time.perf_counter()
        children_genos = [
            mutate_child(
                state.parent.genotype,
                cfg.mutation_rate,
                derive_rng(cfg.seed, _STREAM_MUTATION, gen, i),
                validity,
                max_attempts=cfg.mutation_attempts,
            )
            for i in range(cfg.children)
        ]

        def job(item):
            i, geno = item
            return evaluate_fitness(geno, cfg, train, val, stream_key=(gen, i))

        if cfg.parallel > 1:
            with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
                children = list(pool.map(job, enumerate(children_genos)))
        else:
            children = [job(item) for item in enumerate(children_genos)]

        best_child = select_best(children)

        if best_child.fitness > state.parent.fitness:
            state.parent = best_child
        else:
            drifted, _ = neutral_modify(
                state.parent.genotype,
                cfg.mutation_rate,
                derive_rng(cfg.seed, _STREAM_NEUTRAL, gen),
            )
            state.parent = replace(state.parent, genotype=drifted)

        state.rows.append(
            {
                "generation": gen,
                "parent_psnr": state.parent.fitness,
                "best_child_psnr": best_child.fitness,
                "arch": arch_to_string(decode(state.parent.genotype)),
                "seconds": round(time.perf_counter() - started, 6),
            }
        )
        state.generation = gen
        if on_generation:
            on_generation(state)
        if stop_after is not None and gen >= stop_after:
            break

    result = EvolutionResult(
        best=state.parent, initial_fitness=state.initial_fitness, rows=list(state.rows)
    )
    return result, state


def finetune(
    genotype: Genotype,
    cfg: EvoConfig,
    train: ImageSet,
    test: ImageSet,
    iterations: int,
    milestones: tuple[int, ...] = (),
):
    """Retrain the chosen architecture from a fresh init and score on a test set.

    Returns (network, QualityReport, loss_trace). With ``iterations`` 0 the
    freshly initialized network is scored as-is.
    """
    enc = decode(genotype)
    cae = expand(enc, cfg.mode, cfg.input_channels, (cfg.input_size, cfg.input_size))
    init_rng = derive_rng(cfg.seed, _STREAM_TRAIN, 0, 0, 2)
    data_rng = derive_rng(cfg.seed, _STREAM_TRAIN, 0, 0, 3)
    net = init_weights(cae, init_rng)
    net, trace = train_steps(
        net,
        batch_stream(train, cfg, data_rng),
        iterations,
        cfg.learning_rate,
        milestones,
    )
    report = evaluate_set(net, test, cfg.corruption, seed=cfg.seed)
    return net, report, trace


# -- checkpoint io ---------------------------------------------------------
#
# Binary container: magic, version, completed generation, parent fitness,
# initial fitness, master seed, then three length-prefixed UTF-8 blocks:
# parent genotype document, config document, cumulative log (JSON lines).

CHECKPOINT_MAGIC = b"EVOK"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIIddq")


def _config_to_dict(cfg: EvoConfig) -> dict:
    return {
        "generations": cfg.generations,
        "children": cfg.children,
        "mutation_rate": cfg.mutation_rate,
        "rows": cfg.rows,
        "cols": cfg.cols,
        "level_back": cfg.level_back,
        "filters": list(cfg.filters),
        "kernels": list(cfg.kernels),
        "mode": cfg.mode.value,
        "corruption": cfg.corruption.describe(),
        "corruption_fill": cfg.corruption.fill,
        "train_iterations": cfg.train_iterations,
        "batch_size": cfg.batch_size,
        "learning_rate": cfg.learning_rate,
        "input_channels": cfg.input_channels,
        "input_size": cfg.input_size,
        "seed": cfg.seed,
        "parallel": cfg.parallel,
        "checkpoint_interval": cfg.checkpoint_interval,
        "mutation_attempts": cfg.mutation_attempts,
        "keep_weights": cfg.keep_weights,
    }


def _config_from_dict(data: dict) -> EvoConfig:
    data = dict(data)
    corruption = CorruptionSpec.parse(
        data.pop("corruption"), fill=data.pop("corruption_fill", 0.0)
    )
    mode = TaskMode(data.pop("mode"))
    data["filters"] = tuple(data["filters"])
    data["kernels"] = tuple(data["kernels"])
    try:
        return EvoConfig(mode=mode, corruption=corruption, **data)
    except TypeError as exc:
        raise ConfigError(f"bad search configuration: {exc}") from exc


def save_checkpoint(path, cfg: EvoConfig, state: EvolutionState) -> None:
    geno_blob = state.parent.genotype.to_text().encode()
    cfg_blob = json.dumps(_config_to_dict(cfg), sort_keys=True).encode()
    log_blob = "".join(json.dumps(row) + "\n" for row in state.rows).encode()
    with open(path, "wb") as fh:
        fh.write(
            _CKPT_HEADER.pack(
                CHECKPOINT_MAGIC,
                CHECKPOINT_VERSION,
                state.generation,
                state.parent.fitness,
                state.initial_fitness,
                cfg.seed,
            )
        )
        for blob in (geno_blob, cfg_blob, log_blob):
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)


def load_checkpoint(path) -> tuple[EvoConfig, EvolutionState]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise SearchError(f"{path}: not an evolution checkpoint (bad magic)")
    _, version, generation, fitness, initial_fitness, seed = _CKPT_HEADER.unpack_from(
        raw, 0
    )
    if version != CHECKPOINT_VERSION:
        raise SearchError(f"{path}: unsupported checkpoint version {version}")
    offset = _CKPT_HEADER.size
    blobs = []
    for _ in range(3):
        (length,) = struct.unpack_from("<Q", raw, offset)
        offset += 8
        blobs.append(raw[offset : offset + length].decode())
        offset += length
    genotype = Genotype.from_text(blobs[0])
    cfg = _config_from_dict(json.loads(blobs[1]))
    if cfg.seed != seed:
        raise SearchError(f"{path}: header seed disagrees with the stored config")
    rows = [json.loads(line) for line in blobs[2].splitlines() if line.strip()]
    state = EvolutionState(
        generation=generation,
        parent=Individual(genotype, fitness),
        initial_fitness=initial_fitness,
        rows=rows,
    )
    return cfg, state
