"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from conftest import REFERENCE_DENOISING_ARCHS, REFERENCE_INPAINTING_ARCHS

from evocae.cli import main
from evocae.dataio import CorruptionKind, CorruptionSpec, corrupt, split, synth_dataset
from evocae.engine import check_op, gradcheck_network, init_weights
from evocae.engine.ops import (
    conv2d,
    conv2d_backward,
    mse_loss,
    relu,
    relu_backward,
    skip_add,
    skip_add_backward,
    tconv2d,
    tconv2d_backward,
)
from evocae.evolve import EvoConfig, batch_stream, derive_rng, run_evolution
from evocae.genotype import (
    Genotype,
    NodeGene,
    build_type_table,
    decode,
    mutate_child,
    neutral_modify,
    point_mutation,
    random_genotype,
)
from evocae.metrics import evaluate_set, psnr, ssim
from evocae.network import (
    TaskMode,
    arch_to_string,
    expand,
    parse_arch,
    trace_shapes,
)
from evocae.engine import train_steps


@contextmanager
def criterion(number, description, budget_seconds=None):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"FAIL criterion {number}: {description}")
        raise
    elapsed = time.perf_counter() - started
    print(f"PASS criterion {number}: {description} ({elapsed:.1f}s)")
    if budget_seconds is not None:
        assert elapsed < budget_seconds, (
            f"criterion {number} took {elapsed:.1f}s, budget {budget_seconds}s"
        )


def toy_config(**overrides):
    base = dict(
        generations=10,
        children=2,
        mutation_rate=0.1,
        rows=2,
        cols=5,
        level_back=2,
        filters=(8, 16),
        kernels=(1, 3),
        mode=TaskMode.DENOISING,
        corruption=CorruptionSpec.parse("noise:30"),
        train_iterations=50,
        batch_size=4,
        learning_rate=0.01,
        input_channels=1,
        input_size=8,
        seed=0,
    )
    base.update(overrides)
    return EvoConfig(**base)


def test_criterion_1_genotype_laws():
    with criterion(
        1, "10k random genotypes decode and round-trip", budget_seconds=10
    ):
        table = build_type_table([64, 128, 256], [1, 3, 5])
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            rows = int(rng.integers(1, 5))
            cols = int(rng.integers(1, 11))
            level_back = int(rng.integers(1, cols + 1))
            g = random_genotype(rows, cols, level_back, table, rng)
            spec = decode(g)
            columns = [g.node_column(n) for n in spec.node_ids]
            assert columns == sorted(set(columns))
            assert 1 <= len(spec) <= cols
            text = g.to_text()
            assert Genotype.from_text(text).to_text() == text


def test_criterion_2_mutation_contracts():
    with criterion(2, "mutation contracts over 1000 parents", budget_seconds=30):
        table = build_type_table([64, 128, 256], [1, 3, 5])
        rng = np.random.default_rng(2)
        for _ in range(1000):
            parent = random_genotype(3, 8, 3, table, rng)
            child = mutate_child(parent, 0.1, rng)
            assert arch_to_string(decode(child)) != arch_to_string(decode(parent))
            drifted, _ = neutral_modify(parent, 0.1, rng)
            assert arch_to_string(decode(drifted)) == arch_to_string(decode(parent))
            assert point_mutation(parent, 0.0, rng) == parent


def test_criterion_3_reference_arch_round_trip():
    with criterion(3, "ten reference arch strings round-trip and trace at 64x64"):
        for text in REFERENCE_INPAINTING_ARCHS:
            assert arch_to_string(parse_arch(text)) == text
            cae = expand(parse_arch(text), TaskMode.INPAINTING, 3, (64, 64))
            shapes = trace_shapes(cae)
            assert shapes[-1] == (3, 64, 64)
        for text in REFERENCE_DENOISING_ARCHS:
            assert arch_to_string(parse_arch(text)) == text
            cae = expand(parse_arch(text), TaskMode.DENOISING, 1, (64, 64))
            shapes = trace_shapes(cae)
            assert shapes[-1] == (1, 64, 64)


def test_criterion_4_gradient_checks():
    with criterion(
        4, "finite-difference gradchecks: ops < 1e-6, full CAE < 1e-4",
        budget_seconds=120,
    ):
        rng = np.random.default_rng(4)
        for stride in (1, 2):
            x = rng.normal(size=(2, 2, 6, 6))
            w = rng.normal(size=(3, 2, 3, 3))
            b = rng.normal(size=3)
            probe = rng.normal(size=conv2d(x, w, b, stride).shape)
            err = check_op(
                lambda: float(np.sum(conv2d(x, w, b, stride) * probe)),
                lambda: conv2d_backward(x, w, probe, stride),
                [x, w, b],
            )
            assert err < 1e-6, f"conv2d stride {stride}: {err}"

            xt = rng.normal(size=(2, 3, 5, 5))
            wt = rng.normal(size=(3, 2, 3, 3))
            bt = rng.normal(size=2)
            probe_t = rng.normal(size=tconv2d(xt, wt, bt, stride).shape)
            err = check_op(
                lambda: float(np.sum(tconv2d(xt, wt, bt, stride) * probe_t)),
                lambda: tconv2d_backward(xt, wt, probe_t, stride),
                [xt, wt, bt],
            )
            assert err < 1e-6, f"tconv2d stride {stride}: {err}"

        xr = rng.normal(size=(2, 2, 5, 5))
        xr[np.abs(xr) < 0.05] += 0.1
        probe_r = rng.normal(size=xr.shape)
        err = check_op(
            lambda: float(np.sum(relu(xr) * probe_r)),
            lambda: [relu_backward(xr, probe_r)],
            [xr],
        )
        assert err < 1e-6, f"relu: {err}"

        a = rng.normal(size=(2, 2, 4, 4))
        c = rng.normal(size=(2, 2, 4, 4))
        probe_s = rng.normal(size=a.shape)
        err = check_op(
            lambda: float(np.sum(skip_add(a, c) * probe_s)),
            lambda: list(skip_add_backward(probe_s)),
            [a, c],
        )
        assert err < 1e-6, f"skip_add: {err}"

        pred = rng.normal(size=(2, 2, 4, 4))
        target = rng.normal(size=(2, 2, 4, 4))
        err = check_op(
            lambda: mse_loss(pred, target)[0],
            lambda: [mse_loss(pred, target)[1]],
            [pred],
        )
        assert err < 1e-6, f"mse_loss: {err}"

        cae = expand(
            parse_arch("CS(3,3)-C(4,3)-CS(3,1)"), TaskMode.INPAINTING, 1, (8, 8)
        )
        err = gradcheck_network(cae, batch=2)
        assert err < 1e-4, f"full 3-layer inpainting network: {err}"


def test_criterion_5_shape_conservation():
    with criterion(
        5, "500 random specs per mode: forward shapes equal the trace",
        budget_seconds=120,
    ):
        rng = np.random.default_rng(5)
        for mode in (TaskMode.INPAINTING, TaskMode.DENOISING):
            accepted = 0
            while accepted < 500:
                depth = int(rng.integers(1, 5))
                layers = "-".join(
                    f"{'CS' if rng.integers(2) else 'C'}"
                    f"({int(rng.choice([2, 4]))},{int(rng.choice([1, 3, 5]))})"
                    for _ in range(depth)
                )
                spec = parse_arch(layers)
                if mode is TaskMode.INPAINTING:
                    down = sum(1 for l in spec.layers if not l.skip)
                    if 2**down > 16:
                        continue
                cae = expand(spec, mode, 1, (16, 16))
                net = init_weights(cae, rng)
                x = rng.uniform(size=(1, 1, 16, 16)).astype(np.float32)
                out, caches = net._forward_cached(x)
                expected = trace_shapes(cae)
                for (_, pre), shape in zip(caches[:-1], expected[:-1]):
                    assert pre.shape[1:] == shape
                assert out.shape[1:] == expected[-1] == (1, 16, 16)
                accepted += 1


def test_criterion_6_corruption_statistics():
    with criterion(6, "corruption statistics match their closed forms"):
        base = np.full((1, 1, 64, 64), 0.5, dtype=np.float32)
        out = corrupt(
            base, CorruptionSpec(CorruptionKind.PIXEL, 0.8, fill=0.0),
            np.random.default_rng(60),
        )
        assert int((out[0, 0] == 0.0).sum()) == math.floor(0.8 * 64 * 64)

        big = np.full((16, 1, 250, 250), 0.5, dtype=np.float32)
        noisy = corrupt(
            big, CorruptionSpec(CorruptionKind.NOISE, 50.0), np.random.default_rng(61)
        )
        delta = (noisy - big).ravel()
        assert delta.size == 10**6
        sigma = 50.0 / 255.0
        assert abs(float(delta.std()) - sigma) / sigma < 0.02

        centered = corrupt(
            base, CorruptionSpec(CorruptionKind.CENTER, 0.5, fill=0.0),
            np.random.default_rng(62),
        )
        assert int((centered[0, 0] == 0.0).sum()) == 1024


def test_criterion_7_metric_anchors():
    with criterion(7, "metric anchors: psnr offset, ssim identity, masked mean"):
        x = np.full((3, 32, 32), 0.25)
        assert abs(psnr(x, x + 0.1) - 20.0) < 1e-9

        y = np.random.default_rng(70).uniform(size=(3, 64, 64))
        assert ssim(y, y) == 1.0

        from evocae.dataio import ImageSet

        images = ImageSet(
            images=[np.full((1, 64, 64), 0.5, dtype=np.float32) for _ in range(6)]
        )
        report = evaluate_set(
            lambda batch: batch,
            images,
            CorruptionSpec(CorruptionKind.PIXEL, 0.8, fill=0.0),
            seed=71,
        )
        assert abs(report.mean_psnr - 10 * math.log10(1 / 0.2)) < 0.05


def test_criterion_8_elitism_monotonicity():
    with criterion(
        8, "toy evolution: monotone parent fitness, improves in >= 8/10 seeds",
        budget_seconds=600,
    ):
        images = synth_dataset("gradients", 48, 8, seed=0, channels=1)
        train, val, _ = split(images, (0.75, 0.125, 0.125), seed=0)
        improved = 0
        for seed in range(10):
            result, _ = run_evolution(toy_config(seed=seed), train, val)
            fitnesses = [row["parent_psnr"] for row in result.rows]
            assert all(b >= a for a, b in zip(fitnesses, fitnesses[1:]))
            assert fitnesses[0] >= result.initial_fitness
            improved += result.best.fitness > result.initial_fitness
        assert improved >= 8, f"improved in only {improved}/10 runs"


def test_criterion_9_learnability():
    with criterion(
        9, "single-skip net > 30 dB at sigma 0; evolved best beats noisy input by 3 dB",
        budget_seconds=1200,
    ):
        # near-identity task through the skip path
        images = synth_dataset("gradients", 48, 8, seed=0, channels=1)
        train, val, _ = split(images, (0.75, 0.125, 0.125), seed=0)
        cfg = toy_config(
            corruption=CorruptionSpec.parse("noise:0"), batch_size=8,
        )
        cae = expand(parse_arch("CS(16,3)"), TaskMode.DENOISING, 1, (8, 8))
        net = init_weights(cae, derive_rng(cfg.seed, 3, 0, 0, 0))
        net, _ = train_steps(
            net, batch_stream(train, cfg, derive_rng(cfg.seed, 3, 0, 0, 1)), 500, 0.01
        )
        report = evaluate_set(net, val, cfg.corruption, seed=cfg.seed)
        assert report.mean_psnr > 30.0, f"identity smoke: {report.mean_psnr:.2f} dB"

        # denoising rectangles: evolved best vs the corrupted input baseline
        rects = synth_dataset("rectangles", 48, 8, seed=0, channels=1)
        rtrain, rval, _ = split(rects, (0.75, 0.125, 0.125), seed=0)
        noise = CorruptionSpec.parse("noise:30")
        cfg = toy_config(generations=20, corruption=noise)
        baseline_values = []
        for index, image in enumerate(rval.images):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
            damaged = corrupt(image[None], noise, rng)[0]
            baseline_values.append(psnr(image, damaged))
        baseline = float(np.mean(baseline_values))
        result, _ = run_evolution(cfg, rtrain, rval)
        gain = result.best.fitness - baseline
        assert gain >= 3.0, f"gain {gain:.2f} dB over the {baseline:.2f} dB baseline"


def test_criterion_10_determinism_and_resume(tmp_path):
    with criterion(
        10, "interrupted+resumed log equals uninterrupted; width 1 == width 4"
    ):
        def rows_without_timing(path):
            rows = [json.loads(line) for line in path.read_text().splitlines()]
            return [
                json.dumps({k: v for k, v in row.items() if k != "seconds"},
                           sort_keys=True)
                for row in rows
            ]

        base = ["evolve", "--profile", "desk", "--seeds", "7", "--generations", "8"]
        full_dir = tmp_path / "full"
        part_dir = tmp_path / "part"
        assert main([*base, "--out", str(full_dir)]) == 0
        assert main([*base, "--out", str(part_dir), "--stop-after", "5"]) == 0
        assert len(rows_without_timing(part_dir / "run-seed7" / "log.jsonl")) == 5
        assert main([*base, "--out", str(part_dir), "--resume"]) == 0
        assert rows_without_timing(full_dir / "run-seed7" / "log.jsonl") == (
            rows_without_timing(part_dir / "run-seed7" / "log.jsonl")
        )

        wide_dir = tmp_path / "wide"
        assert main([*base, "--out", str(wide_dir), "--parallel", "4"]) == 0
        assert rows_without_timing(full_dir / "run-seed7" / "log.jsonl") == (
            rows_without_timing(wide_dir / "run-seed7" / "log.jsonl")
        )
