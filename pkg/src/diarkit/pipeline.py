"""End-to-end driver: cluster each system, fuse, assign overlaps, score."""
from __future__ import annotations

import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cluster_ahc import AhcConfig, ahc
from .cluster_nmesc import NmescConfig, nmesc
from .config import PipelineConfig
from .embed_store import (EmbeddingSet, LdaTransform, apply_transform, cosine_affinity, fit_lda,
                          read_embeddings, read_labels)
from .errors import DataError
from .fusion import FusionConfig, fuse
from .metrics import DiarizationMetrics, ScoringConfig, der
from .overlap import assign_overlap
from .plda import PldaModel, fit_plda, load_plda
from .recluster import ReclusterConfig, cosine_input, merge_speakers
from .rttm_io import Diarization, SpeakerTurn, format_time, parse_overlaps, parse_rttm, parse_uem, write_rttm
from .labels import compact
from .timeline import intersect_segments, union_segments, windows_to_segments
from .vbx import VbxConfig, vbx_run

log = logging.getLogger(__name__)


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, data: bytes) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def windows_to_diarization(es: EmbeddingSet, labels, prefix: str = "S") -> Diarization:
    """Per-recording window labels to speaker turns on the 1 ms grid."""
    labels = np.asarray(labels)
    turns = []
    for rec in es.recordings:
        idx = es.indices(rec)
        for onset, offset, lab in windows_to_segments([es.windows[i] for i in idx], labels[idx].tolist()):
            on, off = float(format_time(onset)), float(format_time(offset))
            if off > on:
                turns.append(SpeakerTurn(rec, on, float(format_time(off - on)), f"{prefix}{lab}"))
    return Diarization(turns)


def _stage_configs(cfg: PipelineConfig):
    return dict(
        ahc=AhcConfig(cfg.ahc.threshold, cfg.ahc.min_clusters, cfg.ahc.max_clusters, cfg.ahc.calibrate),
        nmesc=NmescConfig(cfg.nmesc.p_min, cfg.nmesc.p_max, cfg.nmesc.k_max, cfg.nmesc.kmeans_restarts,
                          cfg.seed, cfg.nmesc.p_search_volume, cfg.nmesc.force_k),
        vbx=VbxConfig(cfg.vbx.Fa, cfg.vbx.Fb, cfg.vbx.loopP, cfg.vbx.max_iters, cfg.vbx.elbo_tol,
                      cfg.vbx.min_speaker_mass),
        recluster=ReclusterConfig(cfg.recluster.merge_threshold, cfg.recluster.inner, cfg.recluster.scope),
    )


def cluster_recording(es: EmbeddingSet, method: str, cfg: PipelineConfig, plda: PldaModel | None = None,
                      recluster: bool = False) -> np.ndarray:
    """Window labels for a single recording."""
    st = _stage_configs(cfg)
    if len(es) == 1:
        return np.zeros(1, dtype=int)
    A = cosine_affinity(cosine_input(es))
    if method == "ahc":
        labels = ahc(A, st["ahc"])
    elif method == "ahc+vbx":
        if plda is None:
            raise DataError("ahc+vbx needs a PLDA model")
        labels, _ = vbx_run(es, plda, ahc(A, st["ahc"]), st["vbx"])
    elif method == "nmesc":
        labels, _ = nmesc(A, st["nmesc"])
    else:
        raise ValueError(f"unknown clustering method {method!r}")
    if recluster:
        labels = merge_speakers(es, labels, st["recluster"], plda, st["vbx"], st["nmesc"])
    return labels


def _cluster_job(args):
    es, method, cfg, plda, recluster = args
    return cluster_recording(es, method, cfg, plda, recluster)


def run_system(es: EmbeddingSet, method: str, cfg: PipelineConfig, plda: PldaModel | None = None,
               recluster: bool = False, jobs: int = 1) -> Diarization:
    """Cluster every recording of ``es``; results merged in recording-id order."""
    recs = es.recordings
    work = [(es.for_recording(r), method, cfg, plda, recluster) for r in recs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            labels = list(pool.map(_cluster_job, work))
    else:
        labels = [_cluster_job(w) for w in work]
    return Diarization.concat(windows_to_diarization(w[0], lab) for w, lab in zip(work, labels))


def fuse_then_overlap(system_outputs: list[Diarization], overlaps: dict | None, cfg: PipelineConfig,
                      overlap_first: bool | None = None) -> tuple[Diarization, Diarization]:
    """Returns (fused, final). Default order fuses first and assigns overlaps afterwards."""
    overlap_first = cfg.overlap_first if overlap_first is None else overlap_first
    fcfg = FusionConfig(cfg.fusion.rank_alpha)
    overlaps = overlaps or {}
    if overlap_first:
        inputs = [assign_overlap(h, overlaps) for h in system_outputs]
        fused = fuse(inputs, fcfg) if len(inputs) > 1 else inputs[0]
        return fused, fused
    fused = fuse(system_outputs, fcfg) if len(system_outputs) > 1 else system_outputs[0]
    return fused, assign_overlap(fused, overlaps)


def scoring_config(cfg: PipelineConfig) -> ScoringConfig:
    return ScoringConfig(cfg.scoring.collar, cfg.scoring.score_overlap, cfg.scoring.jer_collar)


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def format_scores(m: DiarizationMetrics) -> str:
    """One line per recording plus a TOTAL line; percentages of reference speech."""
    lines = []
    rows = list(m.per_recording.items()) + [("TOTAL", m)]
    for rec, r in rows:
        ts = r.total_speech
        frac = (lambda v: v / ts) if ts > 0 else (lambda v: 0.0 if v == 0 else float("inf"))
        lines.append(
            f"{rec} DER {_pct(r.der)} miss {_pct(frac(r.miss))} fa {_pct(frac(r.falarm))} "
            f"conf {_pct(frac(r.confusion))} JER {_pct(r.jer)}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class Models:
    plda: PldaModel | None = None
    lda: LdaTransform | None = None


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def load_models(cfg: PipelineConfig, base: Path, needs_plda: bool) -> Models:
    models = Models()
    inp = cfg.inputs
    train = None
    if inp.train_embeddings and (base / inp.train_embeddings).exists():
        train = (read_embeddings(_read(base / inp.train_embeddings)), read_labels(_read(base / inp.train_labels)))
    if cfg.lda.enabled:
        if train is None:
            raise DataError("lda.enabled needs inputs.train_embeddings and inputs.train_labels")
        models.lda = fit_lda(train[0], train[1], cfg.lda.out_dim)
        train = (apply_transform(train[0], models.lda), train[1])
    if inp.plda:
        models.plda = load_plda(_read(base / inp.plda))
    elif needs_plda:
        if train is None:
            raise DataError("a PLDA model (inputs.plda) or training embeddings are required for VBx")
        models.plda = fit_plda(*train)
    return models


@dataclass
class PipelineResult:
    systems: dict = field(default_factory=dict)
    fused: Diarization | None = None
    final: Diarization | None = None
    scores: DiarizationMetrics | None = None


def run_pipeline(cfg: PipelineConfig, base_dir=".", jobs: int = 1, write: bool = True) -> PipelineResult:
    base = Path(base_dir)
    needs_plda = any(s.method == "ahc+vbx" or (s.recluster and cfg.recluster.inner == "vbx") for s in cfg.systems)
    models = load_models(cfg, base, needs_plda)
    res = PipelineResult()
    for system in cfg.systems:
        es = read_embeddings(_read(base / system.embeddings))
        if models.lda is not None:
            es = apply_transform(es, models.lda)
        log.info("clustering system %s (%s) on %d windows", system.name, system.method, len(es))
        res.systems[system.name] = run_system(es, system.method, cfg, models.plda, system.recluster, jobs)
    overlaps = None
    if cfg.inputs.overlaps and (base / cfg.inputs.overlaps).exists():
        overlaps = parse_overlaps(_read(base / cfg.inputs.overlaps))
    res.fused, res.final = fuse_then_overlap(list(res.systems.values()), overlaps, cfg)
    out = base / cfg.output_dir
    if write:
        for name, d in res.systems.items():
            atomic_write(out / f"sys_{name}.rttm", write_rttm(d))
        atomic_write(out / "fused.rttm", write_rttm(res.fused))
        atomic_write(out / "final.rttm", write_rttm(res.final))
    if cfg.inputs.ref and (base / cfg.inputs.ref).exists():
        ref = parse_rttm(_read(base / cfg.inputs.ref))
        uem = parse_uem(_read(base / cfg.inputs.uem)) if cfg.inputs.uem else None
        res.scores = der(ref, res.final, uem, scoring_config(cfg))
        if write:
            atomic_write(out / "scores.txt", format_scores(res.scores).encode("utf-8"))
    return res


def labels_from_diarization(es: EmbeddingSet, d: Diarization) -> np.ndarray:
    """Initial window labels from speaker turns: the speaker covering most of each window.

    Windows no turn touches take the speaker of the nearest turn. Ties go to the
    lexicographically smaller speaker name.
    """
    out = []
    for rec in es.recordings:
        sub = d.for_recording(rec)
        by_spk = {k: union_segments(v) for k, v in sub.by_speaker().items()}
        if not by_spk:
            raise DataError(f"initial labelling has no turns for recording {rec!r}")
        names = sorted(by_spk)
        for i in es.indices(rec):
            win = es.windows[i]
            cover = [sum(s.duration for s in intersect_segments([win], by_spk[n])) for n in names]
            best = max(range(len(names)), key=lambda j: (cover[j], -j))
            if cover[best] <= 0:
                gap = [min(max(s.onset - win.offset, win.onset - s.offset, 0.0) for s in by_spk[n]) for n in names]
                best = min(range(len(names)), key=lambda j: (gap[j], j))
            out.append(f"{rec}\x00{names[best]}")
    return compact(out)
