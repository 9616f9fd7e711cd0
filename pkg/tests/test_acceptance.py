"""Acceptance criteria, one test each; outcomes are summarised at the end of the run."""

import hashlib
import itertools
import json
import math
import os
import random
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import criterion
from golden import check, load_annotations
from oracles import achievable_alignments, expected_pairs, metrics_from_counts, weight_map_oracle_int
from posterkit.curation import SizeClass, TextRegionMask, rasterize_weight_map, score_binary
from posterkit.forge import NO_TEXT_PROMPT, GenerationConfig, parse_prompt
from posterkit.forge.layout import boxes_overlap
from posterkit.losses import (
    DPOInputs,
    NoiseSchedule,
    WeightMode,
    dpo_loss,
    flow_loss,
    noised_state,
    target_velocity,
    weighted_flow_loss,
)
from posterkit.ocr_eval import align_chars, compute_metrics
from posterkit.pairs import Feedback, build_reflection_pairs
from posterkit.pipeline import Stage, StageConfig, run_stage
from posterkit.pipeline.manifest import read_jsonl
from stage_inputs import curate_inputs, loss_inputs, ocr_inputs, pairs_inputs, reflect_inputs


@pytest.fixture(autouse=True)
def _no_live_endpoint(monkeypatch):
    monkeypatch.delenv("POSTERKIT_VLM_ENDPOINT", raising=False)


def test_ocr_alignment_matches_exhaustive_search():
    with criterion("OCR oracle equivalence (all pairs, length <= 6, alphabet abc, < 60 s)") as info:
        start = time.perf_counter()
        table = achievable_alignments("abc", 6)
        mismatches = []
        for (gt, ocr), expected in table.items():
            c = align_chars(gt, ocr)
            if (c.correct, c.insertions, c.deletions, c.substitutions) != expected:
                mismatches.append((gt, ocr))
        elapsed = time.perf_counter() - start
        assert not mismatches, f"{len(mismatches)} mismatches, e.g. {mismatches[:3]}"
        assert elapsed < 60, f"took {elapsed:.1f} s"
        info["detail"] = f"{len(table)} pairs, exact match, {elapsed:.1f} s"


def test_ocr_worked_examples():
    with criterion("OCR worked examples") as info:
        abc = metrics_from_counts(*achievable_alignments("abcd", 3)[("abc", "abd")])
        poster = metrics_from_counts(6, 1, 0, 0)  # "poster" vs "posters": six matches, one insertion
        got_acc = compute_metrics(align_chars("abc", "abd")).accuracy
        got_f = compute_metrics(align_chars("poster", "posters")).f_score
        assert abs(float(abc["accuracy"]) - 0.6667) <= 1e-4
        assert abs(got_acc - 0.6667) <= 1e-4 and got_acc == pytest.approx(float(abc["accuracy"]), abs=1e-15)
        assert abs(got_f - 0.9231) <= 1e-4 and got_f == pytest.approx(float(poster["f_score"]), abs=1e-15)
        info["detail"] = f"accuracy(abc, abd) = {got_acc:.6f}, f_score(poster, posters) = {got_f:.6f}"


def test_scorer_identities():
    with criterion("Scorer identities") as info:
        rng = random.Random(0)
        for _ in range(1000):
            l = rng.uniform(-1e3, 1e3)
            assert score_binary({"A": l, "B": l}) == 0.5
        at_ln49 = score_binary({"A": 0.0, "B": math.log(49)})
        assert abs(at_ln49 - 0.98) <= 1e-9
        worst = 0.0
        for _ in range(10_000):
            a, b = rng.uniform(-50, 50), rng.uniform(-50, 50)
            c = rng.uniform(-1e3, 1e3)
            worst = max(worst, abs(score_binary({"A": a + c, "B": b + c}) - score_binary({"A": a, "B": b})))
        for c in (-1e3, 1e3):
            worst = max(worst, abs(score_binary({"A": c, "B": math.log(49) + c}) - at_ln49))
        assert worst < 1e-9
        info["detail"] = f"equal logits -> 0.5 exactly; ln 49 -> {at_ln49!r}; max shift drift {worst:.2e}"


def test_weight_map_matches_brute_force():
    with criterion("Weight-map oracle (1000 random mask sets, 64x64)") as info:
        rng = random.Random(2024)
        for trial in range(1000):
            masks = []
            for _ in range(rng.randint(0, 8)):
                if rng.random() < 0.3:  # thin boxes that cover pixels only partially
                    y0 = rng.randint(0, 990)
                    x0 = rng.randint(0, 990)
                    box = (y0, x0, y0 + rng.randint(1, 10), x0 + rng.randint(1, 10))
                else:
                    y0, y1 = sorted(rng.sample(range(1001), 2))
                    x0, x1 = sorted(rng.sample(range(1001), 2))
                    box = (y0, x0, y1, x1)
                masks.append((box, rng.choice(["major", "minor"])))
            ours = rasterize_weight_map([TextRegionMask(b, SizeClass(k)) for b, k in masks], 64, 64)
            assert np.array_equal(ours, weight_map_oracle_int(masks, 64, 64)), f"mismatch in trial {trial}: {masks}"
        info["detail"] = "1000/1000 exact"


def test_loss_identities():
    with criterion("Loss identities") as info:
        at_zero = dpo_loss(DPOInputs(0.0, 0.0, 0.0, 0.0, beta=0.7))
        assert abs(at_zero - math.log(2)) <= 1e-12
        rng = np.random.default_rng(0)
        for _ in range(1000):
            beta = float(rng.uniform(0.01, 5))
            d1, d2 = sorted(rng.uniform(-20, 20, size=2))
            if d1 == d2:
                continue
            lo = dpo_loss(DPOInputs(d2, 0.0, 0.0, 0.0, beta))
            hi = dpo_loss(DPOInputs(d1, 0.0, 0.0, 0.0, beta))
            assert lo < hi, (beta, d1, d2)
        worst_id = worst_w2 = worst_fd = 0.0
        for schedule in (NoiseSchedule.linear(), NoiseSchedule.cosine()):
            for _ in range(100):
                shape = (3, 8, 8)
                x0, eps, v = rng.normal(size=shape), rng.normal(size=shape), rng.normal(size=shape)
                w = rng.uniform(0, 1, size=shape[1:])
                target = target_velocity(x0, eps, 0.5, schedule)
                for mode in WeightMode:
                    worst_id = max(worst_id, abs(weighted_flow_loss(v, target, np.ones(shape[1:]), mode) - flow_loss(v, target)))
                worst_w2 = max(
                    worst_w2,
                    abs(weighted_flow_loss(v, target, w, WeightMode.LITERAL) - weighted_flow_loss(v, target, w**2, WeightMode.SQUARED_ERROR_WEIGHT)),
                )
                t, h = float(rng.uniform(1e-3, 1 - 1e-3)), 1e-4
                numeric = (noised_state(x0, eps, t + h, schedule) - noised_state(x0, eps, t - h, schedule)) / (2 * h)
                worst_fd = max(worst_fd, float(np.max(np.abs(numeric - target_velocity(x0, eps, t, schedule)))))
        assert worst_id <= 1e-12 and worst_w2 <= 1e-9 and worst_fd <= 1e-6
        info["detail"] = (
            f"dpo(0) = {at_zero!r}; monotone on 1000 draws; |w=1 - flow| {worst_id:.1e}; "
            f"|literal(w) - sew(w^2)| {worst_w2:.1e}; finite-difference error {worst_fd:.1e}"
        )


def test_forge_invariants(tmp_path, font_dir):
    with criterion("Forge invariants (10 000 samples, default config, < 10 min)") as info:
        count = 10_000
        workers = os.cpu_count() or 1
        cfg = StageConfig(
            Stage.FORGE,
            output=tmp_path / "forge",
            workers=workers,
            master_seed=20241017,
            params={"count": count, "font_dir": font_dir, "write_images": False},
        )
        start = time.perf_counter()
        run_stage(cfg)
        elapsed = time.perf_counter() - start
        records = read_jsonl(tmp_path / "forge" / "manifest.jsonl")
        assert len(records) == count
        width, height = GenerationConfig().canvas_size
        overlaps = outside = roundtrip_failures = 0
        for r in records:
            boxes = [tuple(i["box"]) for i in r["instances"]]
            outside += sum(1 for x0, y0, x1, y1 in boxes if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height))
            overlaps += sum(1 for a, b in itertools.combinations(boxes, 2) if boxes_overlap(a, b))
            parsed = [(c.content, list(c.cell), c.orientation.value, c.color) for c in parse_prompt(r["prompt"])]
            expected = [(i["content"], i["cell"], i["orientation"], i["color"]) for i in r["instances"]]
            if parsed != expected or (not expected and r["prompt"] != NO_TEXT_PROMPT):
                roundtrip_failures += 1
        shares = Counter(r["requested_instances"] for r in records)
        weights = GenerationConfig().instance_count_weights
        deviation = max(abs(shares[k + 1] / count - weights[k]) for k in range(3))
        assert overlaps == 0, f"{overlaps} overlapping box pairs"
        assert outside == 0, f"{outside} boxes outside the canvas"
        assert deviation <= 0.02, f"instance-count shares {dict(shares)} deviate by {deviation:.4f}"
        assert roundtrip_failures == 0, f"{roundtrip_failures} prompts failed the round trip"
        assert elapsed < 600, f"took {elapsed:.0f} s"
        placed = sum(len(r["instances"]) for r in records)
        info["detail"] = (
            f"0 overlaps, 0 out-of-canvas, count shares "
            f"{', '.join(f'{k}:{shares[k] / count:.3f}' for k in (1, 2, 3))}, "
            f"{count} prompts round-tripped, {placed} instances placed, {elapsed:.0f} s on {workers} worker(s)"
        )


def test_pair_builder_gates(tmp_path):
    with criterion("Pair-builder gates (1000 sets) and reflection pair counts") as info:
        manifest, replay, truth = pairs_inputs(tmp_path / "pairs", count=1000, seed=42)
        run_stage(StageConfig(Stage.PAIRS, input=manifest, output=tmp_path / "pairs_out", replay_dir=replay))
        emitted = {p["prompt_id"]: (p["winner"], p["loser"]) for p in read_jsonl(tmp_path / "pairs_out" / "manifest.jsonl")}
        reference = expected_pairs(truth)
        assert emitted == reference, f"{len(set(emitted) ^ set(reference))} sets differ"
        rng = random.Random(9)
        sizes = Counter()
        for k in range(1000):
            candidates = [f"set{k}/{j}.png" for j in range(6)]
            best = rng.choice([None, 0, 1, 2, 3, 4, 5])
            rset = build_reflection_pairs(f"set{k}", candidates, best, [Feedback("content", "style")] * 6)
            sizes[len(rset.pairs)] += 1
            assert len(rset.pairs) in (0, 5)
            assert best is None or all(p.target == candidates[best] for p in rset.pairs)
        reflect_manifest, reflect_replay = reflect_inputs(tmp_path / "reflect", count=24, broken_feedback=False)
        run_stage(StageConfig(Stage.REFLECT, input=reflect_manifest, output=tmp_path / "reflect_out", replay_dir=reflect_replay))
        for rset in read_jsonl(tmp_path / "reflect_out" / "manifest.jsonl"):
            assert len(rset["pairs"]) in (0, 5)
            if rset["best_index"] is not None:
                assert {p["target"] for p in rset["pairs"]} == {rset["candidates"][rset["best_index"]]}
        info["detail"] = (
            f"{len(emitted)} pairs identical to the reference filter; reflection sizes {dict(sorted(sizes.items()))} "
            "plus 24 sets through the reflect stage"
        )


def test_parser_golden_suite():
    with criterion("Parser conformance (30 golden responses)") as info:
        annotations = load_annotations()
        assert len(annotations) == 30
        failures = {}
        for name, annotation in sorted(annotations.items()):
            ok, why = check(name, annotation)
            if not ok:
                failures[name] = why
        assert not failures, failures
        valid = sum(a["valid"] for a in annotations.values())
        info["detail"] = f"30/30 as annotated ({valid} parsed, {30 - valid} rejected)"


def _stage_configs(root: Path, font_dir: Path) -> dict[str, tuple[Stage, Path | None, Path | None, dict]]:
    curate_manifest, curate_replay = curate_inputs(root / "curate")
    pairs_manifest, pairs_replay, _ = pairs_inputs(root / "pairs", count=60)
    reflect_manifest, reflect_replay = reflect_inputs(root / "reflect", count=12)
    return {
        "forge": (Stage.FORGE, None, None, {"count": 100, "font_dir": font_dir, "write_images": True}),
        "curate": (Stage.CURATE, curate_manifest, curate_replay, {}),
        "pairs": (Stage.PAIRS, pairs_manifest, pairs_replay, {}),
        "reflect": (Stage.REFLECT, reflect_manifest, reflect_replay, {}),
        "ocr-eval": (Stage.OCR_EVAL, ocr_inputs(root / "ocr"), None, {}),
        "losscheck": (Stage.LOSS_CHECK, loss_inputs(root / "loss"), None, {}),
    }


def test_replay_determinism(tmp_path, font_dir):
    with criterion("Determinism (every stage, repeated runs and worker counts 1/2/8)") as info:
        stages = _stage_configs(tmp_path / "inputs", font_dir)
        checked = []
        for name, (stage, manifest, replay, params) in stages.items():
            manifests, images = set(), set()
            for run, workers in enumerate((1, 1, 2, 8)):
                out = tmp_path / "runs" / f"{name}-{run}"
                cfg = StageConfig(stage, output=out, input=manifest, workers=workers, master_seed=7, params=params, replay_dir=replay)
                report = run_stage(cfg)
                data = (out / "manifest.jsonl").read_bytes()
                assert report.manifest_digest == hashlib.sha256(data).hexdigest()
                manifests.add(data)
                if name == "forge":
                    images.add(b"".join(p.read_bytes() for p in sorted((out / "images").iterdir())))
            assert len(manifests) == 1, f"{name}: manifests differ across runs"
            assert len(images) <= 1, f"{name}: rendered images differ across runs"
            checked.append(name)
        info["detail"] = f"byte-identical manifests for {', '.join(checked)}"
