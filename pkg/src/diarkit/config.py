"""Pipeline configuration: strict JSON with every default spelled out."""
from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BadConfig


@dataclass
class VadSection:
    max_gap: float = 0.7
    min_region: float = 0.0


@dataclass
class SegmentationSection:
    window: float = 1.44
    shift: float = 0.24
    alt_shift: float = 0.18


@dataclass
class LdaSection:
    out_dim: int = 128
    enabled: bool = False  # requires inputs.train_embeddings / inputs.train_labels


@dataclass
class AhcSection:
    threshold: float = -0.015
    calibrate: bool = True
    min_clusters: int = 1
    max_clusters: typing.Optional[int] = None


@dataclass
class NmescSection:
    p_min: int = 1
    p_max: typing.Optional[int] = None
    k_max: int = 8
    kmeans_restarts: int = 10
    p_search_volume: int = 30
    force_k: typing.Optional[int] = None


@dataclass
class VbxSection:
    Fa: float = 0.3
    Fb: float = 16.0
    loopP: float = 0.9
    max_iters: int = 40
    elbo_tol: float = 1e-4
    min_speaker_mass: float = 1.0


@dataclass
class ReclusterSection:
    merge_threshold: float = 0.0
    inner: str = "vbx"
    scope: str = "group"


@dataclass
class FusionSection:
    rank_alpha: float = 0.0


@dataclass
class ScoringSection:
    collar: float = 0.25
    score_overlap: bool = True
    jer_collar: float = 0.0


@dataclass
class SystemSection:
    name: str = "system"
    method: str = "ahc+vbx"  # "ahc" | "ahc+vbx" | "nmesc"
    embeddings: str = "emb.csv"
    recluster: bool = False


@dataclass
class InputsSection:
    plda: typing.Optional[str] = None
    train_embeddings: typing.Optional[str] = "train_emb.csv"
    train_labels: typing.Optional[str] = "train_labels.csv"
    overlaps: typing.Optional[str] = "overlaps.txt"
    ref: typing.Optional[str] = "ref.rttm"
    uem: typing.Optional[str] = None


def _default_systems():
    return [
        SystemSection("ahc_vbx", "ahc+vbx", "emb.csv"),
        SystemSection("nmesc", "nmesc", "emb.csv"),
        SystemSection("nmesc_alt", "nmesc", "emb_alt.csv"),
    ]


@dataclass
class PipelineConfig:
    vad: VadSection = field(default_factory=VadSection)
    segmentation: SegmentationSection = field(default_factory=SegmentationSection)
    lda: LdaSection = field(default_factory=LdaSection)
    ahc: AhcSection = field(default_factory=AhcSection)
    nmesc: NmescSection = field(default_factory=NmescSection)
    vbx: VbxSection = field(default_factory=VbxSection)
    recluster: ReclusterSection = field(default_factory=ReclusterSection)
    fusion: FusionSection = field(default_factory=FusionSection)
    scoring: ScoringSection = field(default_factory=ScoringSection)
    inputs: InputsSection = field(default_factory=InputsSection)
    systems: list = field(default_factory=_default_systems)
    overlap_first: bool = False
    seed: int = 0
    output_dir: str = "out"


_CHECKS = {
    "vad.max_gap": lambda v: v >= 0,
    "vad.min_region": lambda v: v >= 0,
    "segmentation.window": lambda v: v > 0,
    "segmentation.shift": lambda v: v > 0,
    "segmentation.alt_shift": lambda v: v > 0,
    "lda.out_dim": lambda v: v >= 1,
    "ahc.min_clusters": lambda v: v >= 1,
    "nmesc.p_min": lambda v: v >= 1,
    "nmesc.k_max": lambda v: v >= 1,
    "nmesc.kmeans_restarts": lambda v: v >= 1,
    "nmesc.p_search_volume": lambda v: v >= 1,
    "vbx.Fa": lambda v: v > 0,
    "vbx.Fb": lambda v: v > 0,
    "vbx.loopP": lambda v: 0 < v < 1,
    "vbx.max_iters": lambda v: v >= 1,
    "vbx.elbo_tol": lambda v: v >= 0,
    "vbx.min_speaker_mass": lambda v: v >= 0,
    "recluster.inner": lambda v: v in ("vbx", "nmesc", "none"),
    "recluster.scope": lambda v: v in ("group", "global"),
    "fusion.rank_alpha": lambda v: v >= 0,
    "scoring.collar": lambda v: v >= 0,
    "scoring.jer_collar": lambda v: v >= 0,
    "method": lambda v: v in ("ahc", "ahc+vbx", "nmesc"),
}


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if tp is bool:
        if not isinstance(value, bool):
            raise BadConfig(path, "expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise BadConfig(path, "expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadConfig(path, "expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise BadConfig(path, "expected a string")
        return value
    raise BadConfig(path, f"unsupported type {tp}")


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise BadConfig(prefix.rstrip(".") or "<root>", "expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise BadConfig(f"{prefix}{key}", "unknown key")
    obj = cls()
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        path = f"{prefix}{f.name}"
        tp = hints[f.name]
        raw = data[f.name]
        if dataclasses.is_dataclass(tp):
            value = _build(tp, raw, path + ".")
        elif f.name == "systems":
            if not isinstance(raw, list) or not raw:
                raise BadConfig(path, "expected a non-empty list")
            value = [_build(SystemSection, item, f"{path}[{i}].") for i, item in enumerate(raw)]
        else:
            value = _coerce(raw, tp, path)
            check = _CHECKS.get(path) or _CHECKS.get(f.name if prefix.startswith("systems[") else "")
            if check is not None and value is not None and not check(value):
                raise BadConfig(path, f"invalid value {raw!r}")
        setattr(obj, f.name, value)
    return obj


def config_from_dict(data) -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "")
    if cfg.segmentation.shift > cfg.segmentation.window:
        raise BadConfig("segmentation.shift", "must not exceed the window")
    if cfg.ahc.max_clusters is not None and cfg.ahc.max_clusters < cfg.ahc.min_clusters:
        raise BadConfig("ahc.max_clusters", "must be >= ahc.min_clusters")
    names = [s.name for s in cfg.systems]
    if len(set(names)) != len(names):
        raise BadConfig("systems", "system names must be unique")
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BadConfig("<root>", f"invalid JSON: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg: PipelineConfig) -> dict:
    return dataclasses.asdict(cfg)
