"""Command-line driver. Exit codes: 0 success, 2 usage or configuration error, 3 data error."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__
from .config import PipelineConfig, config_from_dict, load_config
from .embed_store import read_embeddings, read_labels, write_embeddings, write_labels
from .errors import ConfigError, DataError
from .fusion import FusionConfig, fuse
from .labels import compact
from .metrics import ScoringConfig, der
from .overlap import assign_overlap
from .pipeline import (atomic_write, cluster_recording, format_scores, labels_from_diarization, run_pipeline,
                       windows_to_diarization, _stage_configs)
from .plda import fit_plda, load_plda, save_plda
from .recluster import merge_speakers
from .rttm_io import Diarization, Uem, parse_overlaps, parse_rttm, parse_uem, write_overlaps, write_rttm, write_uem
from .synth import SynthConfig, gen_corpus, gen_training_set
from .timeline import SegmentationConfig, VadPostConfig, uniform_segment, vad_postprocess
from .vbx import vbx_run

log = logging.getLogger("diarkit")


class _UsageError(Exception):
    pass


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _speaker_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("-")
    try:
        a, b = int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or MIN-MAX, got {text!r}") from None
    if not 1 <= a <= b:
        raise argparse.ArgumentTypeError(f"bad speaker range {text!r}")
    return a, b


def _cfg_from_args(args) -> PipelineConfig:
    """Config file (if any) overlaid with the stage flags given on the command line."""
    cfg = load_config(args.config) if getattr(args, "config", None) else config_from_dict({})
    d = dataclasses.asdict(cfg)
    flags = {
        "ahc_threshold": ("ahc", "threshold"),
        "ahc_calibrate": ("ahc", "calibrate"),
        "nmesc_kmax": ("nmesc", "k_max"),
        "nmesc_pmin": ("nmesc", "p_min"),
        "nmesc_pmax": ("nmesc", "p_max"),
        "force_k": ("nmesc", "force_k"),
        "fa": ("vbx", "Fa"),
        "fb": ("vbx", "Fb"),
        "loopp": ("vbx", "loopP"),
        "inner": ("recluster", "inner"),
        "merge_threshold": ("recluster", "merge_threshold"),
        "rank_alpha": ("fusion", "rank_alpha"),
    }
    for attr, (sec, key) in flags.items():
        value = getattr(args, attr, None)
        if value is not None:
            d[sec][key] = value
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    return config_from_dict(d)


def cmd_synth(args) -> int:
    lo, hi = args.speakers
    base = SynthConfig(n_speakers=lo, duration=args.duration, separation=args.separation,
                       dim=args.dim, overlap_prob=args.overlap_prob, seed=args.seed or 0)
    seeds = range(base.seed, base.seed + args.recordings)
    corpus = gen_corpus(seeds, base, speakers=None if lo == hi else (lo, hi), shifts=(0.24, 0.18))
    out = Path(args.output)
    atomic_write(out / "ref.rttm", write_rttm(corpus.reference))
    atomic_write(out / "overlaps.txt", write_overlaps(corpus.overlaps))
    atomic_write(out / "speech.uem", write_uem(Uem(corpus.speech)))
    for sh, suffix in ((0.24, ""), (0.18, "_alt")):
        atomic_write(out / f"emb{suffix}.csv", write_embeddings(corpus.embeddings[sh]))
        atomic_write(out / f"labels{suffix}.csv", write_labels(corpus.labels[sh]))
    if args.train_recordings:
        train, labels = gen_training_set(dataclasses.replace(base, seed=base.seed + 1_000_003),
                                         n_recordings=args.train_recordings)
        atomic_write(out / "train_emb.csv", write_embeddings(train))
        atomic_write(out / "train_labels.csv", write_labels(labels))
    return 0


def cmd_segment(args) -> int:
    regions = parse_uem(_read(args.speech)).regions
    vad = VadPostConfig(args.max_gap, args.min_region)
    seg = SegmentationConfig(args.window, args.shift)
    out = {}
    for rec, segs in regions.items():
        out[rec] = uniform_segment(vad_postprocess(segs, vad), seg)
    if args.speech_out:
        atomic_write(Path(args.speech_out), write_uem(Uem({r: vad_postprocess(s, vad) for r, s in regions.items()})))
    atomic_write(Path(args.output), write_overlaps(out))
    return 0


def _plda_for(args, cfg):
    if getattr(args, "plda", None):
        return load_plda(_read(args.plda))
    return None


def cmd_cluster(args) -> int:
    cfg = _cfg_from_args(args)
    es = read_embeddings(_read(args.emb))
    plda = _plda_for(args, cfg)
    parts = []
    for rec in es.recordings:
        sub = es.for_recording(rec)
        parts.append(windows_to_diarization(sub, cluster_recording(sub, args.method, cfg, plda)))
    atomic_write(Path(args.output), write_rttm(Diarization.concat(parts)))
    return 0


def _per_recording_init(args):
    es = read_embeddings(_read(args.emb))
    init = parse_rttm(_read(args.init))
    for rec in es.recordings:
        sub = es.for_recording(rec)
        yield sub, compact(labels_from_diarization(sub, init))


def cmd_vbx(args) -> int:
    cfg = _cfg_from_args(args)
    plda = load_plda(_read(args.plda))
    vcfg = _stage_configs(cfg)["vbx"]
    parts = []
    for sub, init in _per_recording_init(args):
        labels, _ = vbx_run(sub, plda, init, vcfg)
        parts.append(windows_to_diarization(sub, labels))
    atomic_write(Path(args.output), write_rttm(Diarization.concat(parts)))
    return 0


def cmd_recluster(args) -> int:
    cfg = _cfg_from_args(args)
    st = _stage_configs(cfg)
    plda = _plda_for(args, cfg)
    if st["recluster"].inner == "vbx" and plda is None:
        raise _UsageError("--inner vbx needs --plda")
    parts = []
    for sub, init in _per_recording_init(args):
        labels = merge_speakers(sub, init, st["recluster"], plda, st["vbx"], st["nmesc"])
        parts.append(windows_to_diarization(sub, labels))
    atomic_write(Path(args.output), write_rttm(Diarization.concat(parts)))
    return 0


def cmd_fuse(args) -> int:
    if len(args.hyps) < 2:
        raise _UsageError("fuse needs at least two hypothesis files")
    hyps = [parse_rttm(_read(p)) for p in args.hyps]
    fused = fuse(hyps, FusionConfig(args.rank_alpha or 0.0))
    atomic_write(Path(args.output), write_rttm(fused))
    return 0


def cmd_overlap(args) -> int:
    d = parse_rttm(_read(args.rttm))
    regions = parse_overlaps(_read(args.regions))
    atomic_write(Path(args.output), write_rttm(assign_overlap(d, regions)))
    return 0


def cmd_score(args) -> int:
    ref = parse_rttm(_read(args.ref))
    hyp = parse_rttm(_read(args.hyp))
    uem = parse_uem(_read(args.uem)) if args.uem else None
    m = der(ref, hyp, uem, ScoringConfig(collar=args.collar, score_overlap=not args.no_overlap))
    text = format_scores(m)
    if args.output:
        atomic_write(Path(args.output), text.encode("utf-8"))
    sys.stdout.write(text)
    return 0


def cmd_plda_fit(args) -> int:
    es = read_embeddings(_read(args.emb))
    labels = read_labels(_read(args.labels))
    if len(labels) != len(es):
        raise DataError(f"{len(labels)} labels for {len(es)} embeddings")
    atomic_write(Path(args.output), save_plda(fit_plda(es, labels)))
    return 0


def cmd_pipeline(args) -> int:
    cfg = _cfg_from_args(args)
    if args.overlap_first:
        cfg = dataclasses.replace(cfg, overlap_first=True)
    if args.output_dir:
        cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
    base = Path(args.base_dir) if args.base_dir else Path(args.config).resolve().parent
    res = run_pipeline(cfg, base, jobs=args.jobs)
    if res.scores is not None:
        sys.stdout.write(format_scores(res.scores))
    return 0


def _add_stage_flags(p, *groups):
    if "ahc" in groups:
        p.add_argument("--ahc-threshold", type=float, help="cosine stopping threshold (default -0.015)")
        p.add_argument("--ahc-calibrate", action=argparse.BooleanOptionalAction, default=None,
                       help="add a per-recording calibrated offset to the threshold")
    if "nmesc" in groups:
        p.add_argument("--nmesc-kmax", type=int)
        p.add_argument("--nmesc-pmin", type=int)
        p.add_argument("--nmesc-pmax", type=int)
        p.add_argument("--force-k", type=int, help="skip the eigengap estimate and use this many clusters")
    if "vbx" in groups:
        p.add_argument("--fa", type=float, help="acoustic scale (default 0.3)")
        p.add_argument("--fb", type=float, help="speaker regularization (default 16)")
        p.add_argument("--loopp", type=float, help="speaker self-transition probability (default 0.9)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global random seed")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="diarkit", description="Speaker diarization back-end.",
                                     parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a synthetic corpus with ground truth")
    p.add_argument("--speakers", type=_speaker_range, default=(3, 3), help="N or MIN-MAX per recording")
    p.add_argument("--duration", type=float, default=300.0)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--overlap-prob", type=float, default=0.1)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--recordings", type=int, default=1)
    p.add_argument("--train-recordings", type=int, default=200,
                   help="conversations in the PLDA training set (0 to skip)")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = add("segment", cmd_segment, "VAD post-processing and uniform windowing")
    p.add_argument("--speech", required=True, help="speech regions (UEM)")
    p.add_argument("--max-gap", type=float, default=0.7)
    p.add_argument("--min-region", type=float, default=0.0)
    p.add_argument("--window", type=float, default=1.44)
    p.add_argument("--shift", type=float, default=0.24)
    p.add_argument("--speech-out", help="also write the post-processed speech timeline (UEM)")
    p.add_argument("-o", "--output", required=True, help="windows as 'rec onset offset' lines")

    p = add("cluster", cmd_cluster, "cluster window embeddings per recording")
    p.add_argument("--emb", required=True)
    p.add_argument("--method", choices=("ahc", "nmesc", "ahc+vbx"), default="ahc")
    p.add_argument("--plda", help="PLDA model (needed for ahc+vbx)")
    p.add_argument("--config", help="JSON pipeline config supplying stage defaults")
    _add_stage_flags(p, "ahc", "nmesc", "vbx")
    p.add_argument("-o", "--output", required=True)

    p = add("vbx", cmd_vbx, "VBx re-clustering from an initial labelling")
    p.add_argument("--emb", required=True)
    p.add_argument("--init", required=True, help="initial RTTM")
    p.add_argument("--plda", required=True)
    p.add_argument("--config")
    _add_stage_flags(p, "vbx")
    p.add_argument("-o", "--output", required=True)

    p = add("recluster", cmd_recluster, "merge similar speakers and re-cluster their windows")
    p.add_argument("--emb", required=True)
    p.add_argument("--init", required=True, help="RTTM to re-cluster")
    p.add_argument("--inner", choices=("vbx", "nmesc", "none"))
    p.add_argument("--merge-threshold", type=float)
    p.add_argument("--plda")
    p.add_argument("--config")
    _add_stage_flags(p, "nmesc", "vbx")
    p.add_argument("-o", "--output", required=True)

    p = add("fuse", cmd_fuse, "combine hypotheses by label mapping and weighted voting")
    p.add_argument("hyps", nargs="+")
    p.add_argument("--rank-alpha", type=float)
    p.add_argument("-o", "--output", required=True)

    p = add("overlap", cmd_overlap, "add second speakers inside overlap regions")
    p.add_argument("rttm")
    p.add_argument("--regions", required=True, help="'rec onset offset' lines")
    p.add_argument("-o", "--output", required=True)

    p = add("score", cmd_score, "DER and JER against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--uem")
    p.add_argument("--collar", type=float, default=0.25)
    p.add_argument("--no-overlap", action="store_true", help="exclude overlapped reference speech")
    p.add_argument("-o", "--output", help="also write the table to this file")

    p = add("plda-fit", cmd_plda_fit, "train a two-covariance PLDA model")
    p.add_argument("--emb", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("-o", "--output", required=True)

    p = add("pipeline", cmd_pipeline, "run every stage from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--base-dir", help="resolve input paths here (default: the config's directory)")
    p.add_argument("--output-dir")
    p.add_argument("--overlap-first", action="store_true", help="assign overlaps before fusion")
    _add_stage_flags(p, "ahc", "nmesc", "vbx")
    p.add_argument("--rank-alpha", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed = getattr(args, "seed", None)
    args.jobs = getattr(args, "jobs", 1)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.jobs < 1:
        print("diarkit: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (_UsageError, ConfigError) as exc:
        print(f"diarkit: error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"diarkit: data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
