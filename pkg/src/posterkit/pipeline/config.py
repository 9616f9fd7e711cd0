"""Stage configuration files (YAML or JSON) and their per-stage parameter schemas."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from posterkit.errors import ConfigError


class Stage(str, enum.Enum):
    FORGE = "forge"
    CURATE = "curate"
    PAIRS = "pairs"
    REFLECT = "reflect"
    OCR_EVAL = "ocr-eval"
    LOSS_CHECK = "losscheck"


_PATH = "path"
# parameter name -> (expected type, default); "path" values resolve against the config file directory
PARAM_SCHEMAS: dict[Stage, dict[str, tuple[Any, Any]]] = {
    Stage.FORGE: {
        "count": (int, 100),
        "font_dir": (_PATH, None),
        "background_dir": (_PATH, None),
        "vocab_dir": (_PATH, None),
        "write_images": (bool, True),
        "generation": (dict, {}),
    },
    Stage.CURATE: {
        "binary_threshold": (float, 0.98),
        "hps_threshold": (float, 0.25),
        "hamming_threshold": (int, 8),
        "major_fraction_threshold": (float, 0.05),
        "masks": (bool, True),
    },
    Stage.PAIRS: {},
    Stage.REFLECT: {},
    Stage.OCR_EVAL: {},
    Stage.LOSS_CHECK: {"schedule": (str, "linear")},
}
NEEDS_INPUT = {Stage.CURATE, Stage.PAIRS, Stage.REFLECT, Stage.OCR_EVAL, Stage.LOSS_CHECK}
VLM_KEYS = {"capture_dir": _PATH, "max_retries": int, "backoff_base": float}


@dataclass
class StageConfig:
    stage: Stage
    output: Path
    input: Path | None = None
    workers: int = 1
    master_seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)
    replay_dir: Path | None = None
    vlm: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.stage = Stage(self.stage)
        self.output = Path(self.output)
        if self.input is not None:
            self.input = Path(self.input)
        if self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        if self.stage in NEEDS_INPUT and self.input is None:
            raise ConfigError(f"stage {self.stage.value} needs an input manifest")
        if self.input is not None and self.input.resolve() == self.output.resolve():
            raise ConfigError("output path must differ from the input path")
        self.params = validate_params(self.stage, self.params)


def _coerce(name: str, kind: Any, value: Any, base: Path | None) -> Any:
    if value is None:
        return None
    if kind == _PATH:
        if not isinstance(value, (str, Path)):
            raise ConfigError(f"parameter {name!r} must be a path")
        path = Path(value)
        return path if path.is_absolute() or base is None else base / path
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"parameter {name!r} must be {kind.__name__}, got {value!r}")
    return value


def validate_params(stage: Stage, params: Mapping[str, Any], base: Path | None = None) -> dict[str, Any]:
    schema = PARAM_SCHEMAS[stage]
    unknown = set(params) - set(schema)
    if unknown:
        raise ConfigError(f"unknown {stage.value} parameters: {sorted(unknown)}")
    resolved = {}
    for name, (kind, default) in schema.items():
        value = params.get(name, default)
        resolved[name] = _coerce(name, kind, value, base) if name in params else value
    return resolved


def load_stage_config(
    path: str | Path,
    stage: Stage | str,
    seed: int | None = None,
    workers: int | None = None,
    replay_dir: str | Path | None = None,
) -> StageConfig:
    """Read a config file; relative paths inside it resolve against its directory.

    Layout::

        input: candidates.jsonl
        output: out/pairs
        params: {...}
        vlm: {capture_dir: responses, max_retries: 4}
        seed: 7        # overridden by --seed
        workers: 4     # overridden by --workers
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    unknown = set(raw) - {"input", "output", "params", "vlm", "seed", "workers", "stage"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    stage = Stage(stage)
    if "stage" in raw and Stage(raw["stage"]) is not stage:
        raise ConfigError(f"config is for stage {raw['stage']!r}, not {stage.value!r}")
    base = path.parent
    if "output" not in raw:
        raise ConfigError("config needs an 'output' path")
    vlm = dict(raw.get("vlm") or {})
    bad = set(vlm) - set(VLM_KEYS)
    if bad:
        raise ConfigError(f"unknown vlm settings: {sorted(bad)}")
    vlm = {k: _coerce(k, VLM_KEYS[k], v, base) for k, v in vlm.items()}
    params = raw.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("'params' must be a mapping")
    cfg = StageConfig(
        stage=stage,
        output=_coerce("output", _PATH, raw["output"], base),
        input=_coerce("input", _PATH, raw.get("input"), base),
        workers=workers if workers is not None else int(raw.get("workers", 1)),
        master_seed=seed if seed is not None else int(raw.get("seed", 0)),
        params={},
        replay_dir=Path(replay_dir) if replay_dir is not None else None,
        vlm=vlm,
    )
    cfg.params = validate_params(stage, params, base)
    return cfg
