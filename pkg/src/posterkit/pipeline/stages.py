"""Stage runners. Each validates its inputs, works in a scratch directory and publishes atomically."""

from __future__ import annotations

import json
import logging
from io import BytesIO
from collections import Counter
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from PIL import Image

from posterkit.curation import (
    PosterRecord,
    binary_filter,
    build_masks,
    dhash,
    exact_dedup,
    hps_filter,
    md5_digest,
    near_dedup,
    parse_text_regions,
    rasterize_weight_map,
    save_weight_map,
    score_binary,
)
from posterkit.curation.records import ACCEPTED
from posterkit.errors import ConfigError
from posterkit.forge import BackgroundSource, FontLibrary, ForgeAssets, GenerationConfig, Grammar, generate_sample
from posterkit.forge.fonts import discover_system_fonts
from posterkit.losses import DPOInputs, NoiseSchedule, WeightMode, dpo_loss, flow_loss, target_velocity, weighted_flow_loss
from posterkit.ocr_eval import aggregate_corpus, evaluate_pair, percent
from posterkit.pairs import (
    MISSING_VERDICT,
    REFLECT_SET_SIZE,
    Candidate,
    CandidateSet,
    DegenerateSetError,
    Rejection,
    build_preference_pair,
    build_reflection_pairs,
    parse_best_of_six,
    parse_feedback,
    parse_verdict,
    select_extremes,
)
from posterkit.pipeline.config import Stage, StageConfig
from posterkit.pipeline.manifest import ManifestError, read_jsonl, require_unique, staged_output, write_jsonl
from posterkit.pipeline.vlm import CLIENT_ERROR, Attachment, Mode, OpenAICompatibleClient, ResponseStore, VlmGateway
from posterkit.responses import ResponseParseError
from posterkit.tensor_io import read_tensor

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
REPORT_NAME = "report.json"


@dataclass
class RunReport:
    stage: str
    records: int
    counts: dict[str, int]
    manifest_digest: str
    hard_errors: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "records": self.records,
            "counts": dict(sorted(self.counts.items())),
            "manifest_digest": self.manifest_digest,
            "hard_errors": self.hard_errors,
            **self.extra,
        }


def _write_report(scratch: Path, report: RunReport) -> None:
    (scratch / REPORT_NAME).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _map(fn: Callable, items: Sequence, workers: int, processes: bool = False, initializer=None, initargs=()) -> list:
    """Ordered map; the result order never depends on the worker count."""
    if workers <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(item) for item in items]
    if processes:
        chunk = max(1, len(items) // (workers * 8))
        with ProcessPoolExecutor(workers, initializer=initializer, initargs=initargs) as pool:
            return list(pool.map(fn, items, chunksize=chunk))
    if initializer is not None:
        initializer(*initargs)
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _resolve(base: Path, ref: str) -> Path:
    path = Path(ref)
    return path if path.is_absolute() else base / path


def make_gateway(config: StageConfig) -> VlmGateway | None:
    """Replay when a replay dir is given, live when an endpoint is configured, otherwise None."""
    retries = {k: config.vlm[k] for k in ("max_retries", "backoff_base") if k in config.vlm}
    if config.replay_dir is not None:
        if not config.replay_dir.is_dir():
            raise ConfigError(f"replay directory {config.replay_dir} does not exist")
        return VlmGateway(ResponseStore(config.replay_dir), Mode.REPLAY, **retries)
    client = OpenAICompatibleClient.from_env()
    if client is None:
        return None
    capture = config.vlm.get("capture_dir") or config.output.parent / f"{config.output.name}_responses"
    return VlmGateway(ResponseStore(capture), Mode.LIVE, client, **retries)


# --- forge -----------------------------------------------------------------

_FORGE_STATE: dict[str, Any] = {}


def _forge_init(gen: GenerationConfig, font_dir, font_paths, background_dir, vocab_dir, image_dir) -> None:
    library = FontLibrary.from_directory(font_dir) if font_dir else FontLibrary.from_paths(font_paths)
    _FORGE_STATE.update(
        config=gen,
        assets=ForgeAssets(library, Grammar.from_directory(vocab_dir), BackgroundSource(background_dir)),
        image_dir=image_dir,
    )


def _forge_one(index: int) -> dict:
    sample = generate_sample(index, _FORGE_STATE["config"], _FORGE_STATE["assets"])
    image_path = None
    if _FORGE_STATE["image_dir"] is not None:
        image_path = f"images/{sample.sample_id}.png"
        sample.image.save(Path(_FORGE_STATE["image_dir"]) / f"{sample.sample_id}.png", format="PNG", compress_level=1)
    return sample.manifest_record(image_path)


def run_forge(config: StageConfig) -> RunReport:
    p = config.params
    if p["count"] < 0:
        raise ConfigError("count must be non-negative")
    gen = GenerationConfig.from_mapping({**p["generation"], "master_seed": config.master_seed})
    font_paths: list[Path] = []
    if p["font_dir"] is None:
        font_paths = discover_system_fonts()
        if not font_paths:
            raise ConfigError("no font_dir configured and no system fonts found")
    # validate assets in-process before any output exists
    _forge_init(gen, p["font_dir"], font_paths, p["background_dir"], p["vocab_dir"], None)
    with staged_output(config.output) as scratch:
        image_dir = None
        if p["write_images"]:
            image_dir = scratch / "images"
            image_dir.mkdir()
        initargs = (gen, p["font_dir"], font_paths, p["background_dir"], p["vocab_dir"], image_dir)
        records = _map(_forge_one, list(range(p["count"])), config.workers, True, _forge_init, initargs)
        digest = write_jsonl(scratch / MANIFEST_NAME, records)
        placed = sum(len(r["instances"]) for r in records)
        requested = sum(r["requested_instances"] for r in records)
        counts = {
            "samples": len(records),
            "instances_requested": requested,
            "instances_placed": placed,
            "instances_dropped": requested - placed,
            "no_text": sum(1 for r in records if not r["instances"]),
        }
        report = RunReport(config.stage.value, len(records), counts, digest)
        _write_report(scratch, report)
    return report


# --- curate ----------------------------------------------------------------


def _hash_image(path: str) -> tuple[str | None, int | None, tuple[int, int] | None, str | None]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        return None, None, None, f"io: {exc.strerror or exc}"
    try:
        with Image.open(BytesIO(data)) as im:
            im.load()
            return md5_digest(data), dhash(im), im.size, None
    except (OSError, ValueError) as exc:
        return md5_digest(data), None, None, f"io: undecodable image ({exc})"


def run_curate(config: StageConfig) -> RunReport:
    p = config.params
    raw = read_jsonl(config.input)
    require_unique(raw, "id", str(config.input))
    try:
        records = [PosterRecord.from_json(obj) for obj in raw]
    except (TypeError, ValueError, AttributeError) as exc:
        raise ManifestError(f"{config.input}: {exc}") from exc
    for r in records:
        if r.logits is not None:
            try:
                score_binary(r.logits)
            except ValueError as exc:
                raise ManifestError(f"{config.input}: record {r.id!r}: {exc}") from exc
    base = config.input.parent
    files = {r.id: str(_resolve(base, r.path)) for r in records}
    gateway = make_gateway(config) if p["masks"] else None
    if p["masks"] and gateway is None:
        raise ConfigError("mask extraction needs --replay-dir or a live VLM endpoint (set params.masks: false to skip)")

    hashes = _map(_hash_image, [files[r.id] for r in records], config.workers, processes=True)
    sizes: dict[str, tuple[int, int]] = {}
    alive = []
    for record, (md5, phash, size, err) in zip(records, hashes):
        if err is not None and md5 is None:
            record.reject(err)
            continue
        record.content_hash = md5
        record.phash = phash
        if size is not None:
            sizes[record.id] = size
        alive.append(record)

    alive, _ = exact_dedup(alive)
    alive = [r for r in alive if binary_filter(r, p["binary_threshold"])]
    for r in alive:
        if r.phash is None:
            r.reject("io: undecodable image")
    alive, _ = near_dedup([r for r in alive if r.alive], p["hamming_threshold"])
    alive = [r for r in alive if hps_filter(r, p["hps_threshold"])]

    weight_maps: dict[str, str] = {}
    with staged_output(config.output) as scratch:
        if p["masks"]:
            (scratch / "weight_maps").mkdir()

            def annotate(record: PosterRecord):
                exchange = gateway.request("mask", {}, [Attachment.from_path(files[record.id])], parse_text_regions)
                return record, exchange

            for record, exchange in _map(annotate, alive, config.workers):
                if not exchange.ok:
                    record.reject(f"mask_{exchange.error}")
                    continue
                record.masks = build_masks(exchange.parsed, p["major_fraction_threshold"])
                width, height = sizes[record.id]
                grid = rasterize_weight_map(record.masks, width, height)
                rel = f"weight_maps/{record.id}.png"
                save_weight_map(grid, scratch / rel)
                weight_maps[record.id] = rel
        for record in alive:
            if record.alive:
                record.status = ACCEPTED
        out = []
        for record in sorted(records, key=lambda r: r.id):
            obj = record.to_json()
            obj["weight_map"] = weight_maps.get(record.id)
            out.append(obj)
        digest = write_jsonl(scratch / MANIFEST_NAME, out)
        counts = Counter(r.reason.split(":")[0] if r.reason else r.status for r in records)
        hard = sum(n for reason, n in counts.items() if reason == f"mask_{CLIENT_ERROR}")
        report = RunReport(config.stage.value, len(records), dict(counts), digest, hard)
        _write_report(scratch, report)
    return report


# --- pairs -----------------------------------------------------------------


def _candidate_set(obj: dict, source: str) -> CandidateSet:
    try:
        cands = tuple(Candidate(str(c["image"]), float(c["reward"])) for c in obj["candidates"])
        return CandidateSet(str(obj["prompt_id"]), cands, str(obj.get("prompt", "")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{source}: bad candidate set {obj.get('prompt_id')!r}: {exc}") from exc


def _sidecar(base: Path, ref: str | None) -> str | None:
    if ref is None:
        return None
    try:
        return _resolve(base, ref).read_text(encoding="utf-8")
    except OSError:
        return None


def run_pairs(config: StageConfig) -> RunReport:
    raw = read_jsonl(config.input)
    require_unique(raw, "prompt_id", str(config.input))
    sets = [_candidate_set(obj, str(config.input)) for obj in raw]
    base = config.input.parent
    gateway = make_gateway(config)

    def judge(item: tuple[dict, CandidateSet]):
        obj, cset = item
        try:
            win, _ = select_extremes(cset.rewards)
        except DegenerateSetError:
            return build_preference_pair(cset, None)
        verdict, failure = None, None
        if "verdict_response" in obj:
            text = _sidecar(base, obj["verdict_response"])
            if text is not None:
                try:
                    verdict = parse_verdict(text)
                except ResponseParseError as exc:
                    failure = Rejection(cset.prompt_id, "verdict_parse_error", str(exc))
        elif gateway is not None:
            winner = cset.candidates[win]
            exchange = gateway.request(
                "alignment",
                {"original_prompt_text": cset.prompt},
                [Attachment.from_path(_resolve(base, winner.image))],
                parse_verdict,
            )
            if exchange.ok:
                verdict = exchange.parsed
            else:
                failure = Rejection(cset.prompt_id, f"verdict_{exchange.error}", exchange.detail)
        result = build_preference_pair(cset, verdict)
        # gate failures take precedence over lookup failures
        if failure is not None and isinstance(result, Rejection) and result.reason == MISSING_VERDICT:
            return failure
        return result

    results = _map(judge, list(zip(raw, sets)), config.workers)
    pairs = sorted((r for r in results if not isinstance(r, Rejection)), key=lambda r: r.prompt_id)
    rejections = sorted((r for r in results if isinstance(r, Rejection)), key=lambda r: r.prompt_id)
    counts = Counter(r.reason for r in rejections)
    counts["accepted"] = len(pairs)
    with staged_output(config.output) as scratch:
        digest = write_jsonl(scratch / MANIFEST_NAME, [p.to_json() for p in pairs])
        write_jsonl(
            scratch / "rejections.jsonl",
            [{"prompt_id": r.prompt_id, "reason": r.reason, "detail": r.detail} for r in rejections],
        )
        hard = counts.get(f"verdict_{CLIENT_ERROR}", 0)
        report = RunReport(config.stage.value, len(sets), dict(counts), digest, hard)
        _write_report(scratch, report)
    return report


# --- reflect ---------------------------------------------------------------


def run_reflect(config: StageConfig) -> RunReport:
    raw = read_jsonl(config.input)
    require_unique(raw, "prompt_id", str(config.input))
    for obj in raw:
        cands = obj.get("candidates")
        if not isinstance(cands, list) or len(cands) != REFLECT_SET_SIZE:
            raise ManifestError(f"{config.input}: set {obj.get('prompt_id')!r} must list exactly 6 candidates")
    base = config.input.parent
    gateway = make_gateway(config)

    def reflect(obj: dict):
        prompt_id, candidates = str(obj["prompt_id"]), [str(c) for c in obj["candidates"]]
        failure = None
        best: int | None = None
        if "best_response" in obj:
            text = _sidecar(base, obj["best_response"])
            if text is None:
                failure = "missing_best_response"
            else:
                try:
                    best = parse_best_of_six(text)
                except ResponseParseError:
                    failure = "best_parse_error"
        elif gateway is not None:
            exchange = gateway.request(
                "best_of_six",
                {"original_prompt": str(obj.get("prompt", ""))},
                [Attachment.from_path(_resolve(base, c)) for c in candidates],
                parse_best_of_six,
            )
            best, failure = (exchange.parsed, None) if exchange.ok else (None, f"best_{exchange.error}")
        else:
            failure = "missing_best_response"
        feedback: list[Any] = [None] * REFLECT_SET_SIZE
        if best is not None:
            sidecars = obj.get("feedback_responses")
            for i, source in enumerate(candidates):
                if i == best:
                    continue
                if sidecars is not None:
                    ref = sidecars.get(str(i)) if isinstance(sidecars, dict) else sidecars[i]
                    feedback[i] = _sidecar(base, ref)
                elif gateway is not None:
                    attachments = [Attachment.from_path(_resolve(base, source)), Attachment.from_path(_resolve(base, candidates[best]))]
                    exchange = gateway.request("feedback", {}, attachments, parse_feedback)
                    feedback[i] = exchange.parsed if exchange.ok else None
                    if not exchange.ok and exchange.raw_response is not None:
                        feedback[i] = exchange.raw_response
        result = build_reflection_pairs(prompt_id, candidates, best, feedback)
        return result, failure

    results = _map(reflect, raw, config.workers)
    results.sort(key=lambda item: item[0].prompt_id)
    counts: Counter[str] = Counter()
    out = []
    for rset, failure in results:
        obj = rset.to_json()
        obj["failure"] = failure
        out.append(obj)
        counts["sets"] += 1
        counts["pairs"] += len(rset.pairs)
        counts["discarded"] += rset.discarded
        if failure:
            counts[failure] += 1
        for _, reason in rset.dropped:
            counts[f"pair_{reason.split(':')[0]}"] += 1
    with staged_output(config.output) as scratch:
        digest = write_jsonl(scratch / MANIFEST_NAME, out)
        hard = counts.get(f"best_{CLIENT_ERROR}", 0)
        report = RunReport(config.stage.value, len(raw), dict(counts), digest, hard)
        _write_report(scratch, report)
    return report


# --- ocr-eval --------------------------------------------------------------


def run_ocr_eval(config: StageConfig) -> RunReport:
    raw = read_jsonl(config.input)
    require_unique(raw, "id", str(config.input))
    for obj in raw:
        if not isinstance(obj.get("gt_text"), str) or not isinstance(obj.get("ocr_text"), str):
            raise ManifestError(f"{config.input}: record {obj.get('id')!r} needs string gt_text and ocr_text")
    scored = _map(lambda o: evaluate_pair(o["gt_text"], o["ocr_text"]), raw, config.workers)
    records: list[dict] = [{"id": str(o["id"]), "result": report} for o, (report, _) in zip(raw, scored)]
    summary = None
    if scored:
        agg = aggregate_corpus([m for _, m in scored])
        summary = {
            "samples": len(scored),
            "accuracy": percent(agg.accuracy),
            "precision": percent(agg.precision),
            "recall": percent(agg.recall),
            "f_score": percent(agg.f_score),
        }
        records.append({"id": "__corpus__", "summary": summary})
    with staged_output(config.output) as scratch:
        digest = write_jsonl(scratch / MANIFEST_NAME, records)
        report = RunReport(config.stage.value, len(raw), {"scored": len(scored)}, digest, extra={"summary": summary})
        _write_report(scratch, report)
    return report


# --- losscheck -------------------------------------------------------------

SCHEDULES = {"linear": NoiseSchedule.linear, "cosine": NoiseSchedule.cosine}


def _loss_case(obj: dict, base: Path, schedule: NoiseSchedule) -> dict:
    kind = obj.get("kind", "flow")
    if kind == "dpo":
        inputs = DPOInputs(
            float(obj["logp_policy_win"]),
            float(obj["logp_ref_win"]),
            float(obj["logp_policy_lose"]),
            float(obj["logp_ref_lose"]),
            float(obj.get("beta", 1.0)),
        )
        return {"id": str(obj["id"]), "kind": "dpo", "margin": inputs.margin, "dpo_loss": dpo_loss(inputs)}
    if kind != "flow":
        raise ManifestError(f"unknown loss case kind {kind!r}")
    x0 = read_tensor(_resolve(base, obj["x0"]))
    eps = read_tensor(_resolve(base, obj["eps"]))
    v_pred = read_tensor(_resolve(base, obj["v_pred"]))
    target = target_velocity(x0, eps, float(obj["t"]), schedule)
    out = {"id": str(obj["id"]), "kind": "flow", "t": float(obj["t"]), "flow_loss": flow_loss(v_pred, target)}
    if obj.get("weight_map"):
        weight = read_tensor(_resolve(base, obj["weight_map"]))
        for mode in WeightMode:
            out[f"weighted_loss_{mode.value}"] = weighted_flow_loss(v_pred, target, weight, mode)
    return out


def run_losscheck(config: StageConfig) -> RunReport:
    raw = read_jsonl(config.input)
    require_unique(raw, "id", str(config.input))
    name = config.params["schedule"]
    if name not in SCHEDULES:
        raise ConfigError(f"unknown schedule {name!r}; choose from {sorted(SCHEDULES)}")
    schedule = SCHEDULES[name]()
    base = config.input.parent
    try:
        results = [_loss_case(obj, base, schedule) for obj in raw]
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ManifestError(f"{config.input}: {exc}") from exc
    for r in results:
        values = {k: v for k, v in r.items() if k not in ("id", "kind")}
        print(r["id"], " ".join(f"{k}={v!r}" for k, v in values.items()))
    with staged_output(config.output) as scratch:
        digest = write_jsonl(scratch / MANIFEST_NAME, results)
        report = RunReport(config.stage.value, len(results), dict(Counter(r["kind"] for r in results)), digest)
        _write_report(scratch, report)
    return report


RUNNERS: dict[Stage, Callable[[StageConfig], RunReport]] = {
    Stage.FORGE: run_forge,
    Stage.CURATE: run_curate,
    Stage.PAIRS: run_pairs,
    Stage.REFLECT: run_reflect,
    Stage.OCR_EVAL: run_ocr_eval,
    Stage.LOSS_CHECK: run_losscheck,
}


def run_stage(config: StageConfig) -> RunReport:
    return RUNNERS[config.stage](config)
