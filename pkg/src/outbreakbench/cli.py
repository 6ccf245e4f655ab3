"""Command-line front end: ingest -> segment -> analyze -> backtest -> score."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import analytics, harness, ingest, io, scoring, segmentation, synthetic
from ._accel import backend_name
from .core import BenchError, DegenerateError, InsufficientDataError
from .forecasters import MODELS
from .harness import HarnessConfig
from .segmentation import SegmentationConfig

log = logging.getLogger("outbreakbench")

DEFAULT_MODELS = ("flat", "ets", "ar")


@dataclass
class RunConfig:
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    models: tuple[str, ...] = DEFAULT_MODELS
    log1p: bool = False
    max_missing_fraction: float = ingest.DEFAULT_MAX_MISSING_FRACTION
    split: str = "test"
    group_by: tuple[str, ...] = ("model", "horizon")
    nmse_mode: str = "mean_product"
    histogram_bins: int = 20

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        thr = d["segmentation"]["second_derivative_threshold"]
        d["segmentation"]["second_derivative_threshold"] = None if math.isinf(thr) and thr > 0 else thr
        d["harness"]["split_fractions"] = list(d["harness"]["split_fractions"])
        d["models"] = list(d["models"])
        d["group_by"] = list(d["group_by"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = dict(d)
        seg = dict(d.pop("segmentation", {}) or {})
        if seg.get("second_derivative_threshold", 0) is None:
            seg["second_derivative_threshold"] = math.inf
        har = dict(d.pop("harness", {}) or {})
        if "split_fractions" in har:
            har["split_fractions"] = tuple(har["split_fractions"])
        for key in ("models", "group_by"):
            if key in d:
                d[key] = tuple(d[key])
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise BenchError(f"unknown config keys: {sorted(unknown)}")
        return cls(SegmentationConfig(**seg), HarnessConfig(**har), **d)


def _split_csv(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    seg_over = {
        "kernel_bandwidth_weeks": getattr(args, "bandwidth", None),
        "second_derivative_threshold": getattr(args, "threshold", None),
        "min_core_weeks": getattr(args, "min_core", None),
        "max_core_weeks": getattr(args, "max_core", None),
        "pad_weeks": getattr(args, "pad", None),
    }
    seg_over = {k: v for k, v in seg_over.items() if v is not None}
    if seg_over:
        cfg.segmentation = dataclasses.replace(cfg.segmentation, **seg_over)
    if getattr(args, "seed", None) is not None:
        cfg.harness = dataclasses.replace(cfg.harness, split_seed=args.seed)
    if getattr(args, "minibatch_size", None) is not None:
        cfg.harness = dataclasses.replace(cfg.harness, minibatch_size=args.minibatch_size)
    if getattr(args, "minibatch_repeats", None) is not None:
        cfg.harness = dataclasses.replace(cfg.harness, minibatch_repeats=args.minibatch_repeats)
    if getattr(args, "models", None):
        cfg.models = _split_csv(args.models)
    if getattr(args, "group_by", None):
        cfg.group_by = _split_csv(args.group_by)
    if getattr(args, "log1p", False):
        cfg.log1p = True
    if getattr(args, "split", None):
        cfg.split = args.split
    if getattr(args, "max_missing", None) is not None:
        cfg.max_missing_fraction = args.max_missing
    if getattr(args, "nmse_mode", None):
        cfg.nmse_mode = args.nmse_mode
    return cfg


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _echo(cfg: RunConfig, summary: dict, out_dir: Path, stem: str = "run") -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.to_dict(), out_dir / f"{stem}_config.json")
    _write_json(summary, out_dir / f"{stem}_summary.json")


# --- commands ---------------------------------------------------------------------


def cmd_ingest(manifest: Path, out_dir: Path, cfg: RunConfig) -> dict:
    entries = ingest.read_manifest(manifest)
    if not entries:
        raise BenchError(f"{manifest}: manifest lists no files")
    raws = []
    for path, resolution in entries:
        raws.extend(ingest.read_raw_file(path, resolution))
    kept, dropped = ingest.prepare_series(raws, cfg.max_missing_fraction)
    out_dir.mkdir(parents=True, exist_ok=True)
    for s in kept:
        ingest.write_series_file(s, out_dir / f"{s.key.slug()}.csv")
    summary = {
        "series_in": len(raws),
        "series_written": len(kept),
        "series_dropped": [[k.disease, k.location, k.outcome, why] for k, why in dropped],
    }
    _echo(cfg, summary, out_dir, "ingest")
    print(f"ingest: {len(kept)} series written, {len(dropped)} dropped -> {out_dir}")
    return summary


def cmd_segment(series_dir: Path, out_file: Path, cfg: RunConfig, reports_dir: Path | None = None) -> dict:
    files = sorted(Path(series_dir).glob("*.csv"))
    if not files:
        raise BenchError(f"{series_dir}: no series files found")
    series = [ingest.read_series_file(p) for p in files]
    res = segmentation.segment_many(series, cfg.segmentation)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    io.write_outbreak_file(res.outbreaks, out_file)
    reports_dir = reports_dir or out_file.with_name(out_file.stem + "_cutpoints")
    reports_dir.mkdir(parents=True, exist_ok=True)
    for rep in res.reports:
        _write_json(rep.to_dict(), reports_dir / f"{rep.key.slug()}.json")
    summary = {
        "series": len(series),
        "outbreaks": len(res.outbreaks),
        "series_skipped": [[k.disease, k.location, k.outcome, why] for k, why in res.skipped],
    }
    _echo(cfg, summary, out_file.parent, out_file.stem)
    print(f"segment: {len(res.outbreaks)} outbreaks from {len(series)} series -> {out_file}")
    return summary


def _load_outbreaks(path: Path):
    res = io.read_outbreak_file(path)
    for line, why in res.rejected:
        log.warning("%s:%d rejected: %s", path, line, why)
    return res


def cmd_analyze(outbreak_file: Path, out_dir: Path, cfg: RunConfig) -> dict:
    loaded = _load_outbreaks(outbreak_file)
    measures, failed = [], []
    for o in loaded.outbreaks:
        try:
            measures.append(analytics.measure_outbreak(o))
        except (DegenerateError, InsufficientDataError) as exc:
            failed.append([o.unique_id, str(exc)])
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_measures(measures, out_dir / "measures.csv")
    by_id = {o.unique_id: o for o in loaded.outbreaks}
    groups = [f"{by_id[m.unique_id].key.disease}|{by_id[m.unique_id].key.outcome}" for m in measures]
    io.write_rows(
        analytics.histogram_rows(measures, groups, cfg.histogram_bins),
        out_dir / "measure_histograms.csv",
        ("measure", "group", "bin_left", "bin_right", "count"),
    )
    summary = {"outbreaks": len(loaded.outbreaks), "rows_rejected": len(loaded.rejected), "measured": len(measures), "failed": failed}
    _echo(cfg, summary, out_dir, "analyze")
    print(f"analyze: {len(measures)} measure rows -> {out_dir / 'measures.csv'}")
    return summary


def cmd_backtest(outbreak_file: Path, out_dir: Path, cfg: RunConfig) -> dict:
    unknown = [m for m in cfg.models if m not in MODELS]
    if unknown:
        raise BenchError(f"unknown model(s) {', '.join(unknown)}; available: {', '.join(sorted(MODELS))}")
    loaded = _load_outbreaks(outbreak_file)
    if not loaded.outbreaks:
        raise BenchError(f"{outbreak_file}: no valid outbreaks")
    by_id = {o.unique_id: o for o in loaded.outbreaks}
    train, val, test = harness.split_outbreaks(by_id, cfg.harness)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json({"train": train, "validation": val, "test": test}, out_dir / "splits.json")
    chosen = sorted(by_id) if cfg.split == "all" else {"test": test, "validation": val, "train": train}[cfg.split]
    summary = {"outbreaks": len(chosen), "rows_rejected": len(loaded.rejected), "models": {}}
    for model in cfg.models:
        res = harness.run_backtest([by_id[i] for i in chosen], model, cfg.harness, log1p=cfg.log1p)
        io.write_hubverse(res.forecasts, by_id, out_dir / f"{model}.csv")
        summary["models"][model] = {"forecasts": len(res.forecasts), "skipped_targets": res.n_skipped_targets}
        print(f"backtest: {model}: {len(res.forecasts)} forecasts, {res.n_skipped_targets} targets skipped")
    _echo(cfg, summary, out_dir, "backtest")
    return summary


def cmd_score(forecast_files: Sequence[Path], outbreak_file: Path, out_dir: Path, cfg: RunConfig) -> dict:
    loaded = _load_outbreaks(outbreak_file)
    by_id = {o.unique_id: o for o in loaded.outbreaks}
    forecasts = []
    for path in forecast_files:
        forecasts.extend(io.read_hubverse(path, by_id))
    res = scoring.score_forecasts(forecasts, by_id)
    for model, uid, u, h, why in res.unmatched:
        log.warning("unmatched target model=%s id=%s u=%d h=%d: %s", model, uid, u, h, why)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_scores(res.records, out_dir / "scores.csv")
    summary = {"forecasts": len(forecasts), "scored": len(res.records), "unmatched": len(res.unmatched)}
    if res.records:
        io.write_rows(scoring.horizon_table(res.records, cfg.nmse_mode), out_dir / "table_model_horizon.csv")
        io.write_rows(scoring.aggregate(res.records, ("model", "phase"), cfg.nmse_mode), out_dir / "table_model_phase.csv")
        io.write_rows(
            scoring.aggregate(res.records, ("disease", "outcome", "model"), cfg.nmse_mode),
            out_dir / "table_disease_model.csv",
        )
        io.write_rows(scoring.aggregate(res.records, cfg.group_by, cfg.nmse_mode), out_dir / "table_grouped.csv")
        io.write_rows(_minibatch_rows(res.records, cfg), out_dir / "table_minibatch.csv")
    _echo(cfg, summary, out_dir, "score")
    print(f"score: {len(res.records)} targets scored, {len(res.unmatched)} unmatched -> {out_dir}")
    return summary


def _minibatch_rows(records, cfg: RunConfig) -> list[dict]:
    """Per-model metrics averaged over seeded minibatches of outbreaks."""
    ids = sorted({r.unique_id for r in records})
    batches = harness.sample_minibatches(ids, cfg.harness)
    rows = []
    for model in sorted({r.model for r in records}):
        mine = [r for r in records if r.model == model]
        per_batch = []
        for batch in batches:
            members = set(batch)
            sel = [r for r in mine if r.unique_id in members]
            if sel:
                per_batch.append(scoring.summarize(sel, cfg.nmse_mode))
        row = {"model": model, "batches": len(per_batch)}
        for metric in ("wis", "nwis", "mape", "nmse"):
            vals = [b[metric] for b in per_batch if math.isfinite(b[metric])]
            row[metric] = sum(vals) / len(vals) if vals else math.nan
        rows.append(row)
    return rows


def cmd_synth(out_dir: Path, seed: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    series = synthetic.synthetic_corpus(seed)
    path = out_dir / synthetic.BUNDLED_CORPUS
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(ingest.RAW_COLUMNS) + "\n")
        for s in series:
            for t, v in enumerate(s.values):
                fh.write(f"{s.key.disease},{s.key.location},{s.key.outcome},{s.week_at(t).end_date.isoformat()},{io.fmt(float(v))}\n")
    (out_dir / "manifest.csv").write_text(f"path,resolution\n{path.name},weekly\n", encoding="utf-8")
    print(f"synth: {len(series)} series -> {path}")


def cmd_run(manifest: Path, out_dir: Path, cfg: RunConfig) -> dict:
    cmd_ingest(manifest, out_dir / "series", cfg)
    outbreak_file = out_dir / "outbreaks.csv"
    cmd_segment(out_dir / "series", outbreak_file, cfg)
    cmd_analyze(outbreak_file, out_dir / "analysis", cfg)
    cmd_backtest(outbreak_file, out_dir / "forecasts", cfg)
    files = [out_dir / "forecasts" / f"{m}.csv" for m in cfg.models]
    return cmd_score(files, outbreak_file, out_dir / "scores", cfg)


# --- argument parsing ----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="seed for splits and minibatches")


def _add_segmentation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bandwidth", type=float, help="Gaussian kernel sigma in weeks (default 2)")
    p.add_argument("--threshold", type=float, help="accept cuts whose second derivative is below this")
    p.add_argument("--min-core", type=int, help="shortest outbreak core in weeks (default 8)")
    p.add_argument("--max-core", type=int, help="longest outbreak core in weeks (default 52)")
    p.add_argument("--pad", type=int, help="context weeks added on each side (default 4)")


def _add_backtest(p: argparse.ArgumentParser) -> None:
    p.add_argument("--models", help=f"comma list of models ({', '.join(sorted(MODELS))})")
    p.add_argument("--split", choices=("test", "validation", "train", "all"), help="outbreaks to forecast")
    p.add_argument("--log1p", action="store_true", help="fit on log(1+y)")


def _add_score(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group-by", help=f"comma list of keys from {', '.join(scoring.GROUP_KEYS)}")
    p.add_argument("--nmse-mode", choices=scoring.NMSE_MODES)
    p.add_argument("--minibatch-size", type=int)
    p.add_argument("--minibatch-repeats", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="outbreakbench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="raw exports -> clean weekly series files")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--max-missing", type=float, help="drop series with a larger missing fraction (default 0.4)")
    _add_common(p)

    p = sub.add_parser("segment", help="weekly series -> outbreak file")
    p.add_argument("series_dir", type=Path)
    p.add_argument("--out", type=Path, required=True, help="outbreak CSV to write")
    p.add_argument("--reports", type=Path, help="directory for cut-point reports")
    _add_common(p)
    _add_segmentation(p)

    p = sub.add_parser("analyze", help="outbreak file -> entropy and shape measures")
    p.add_argument("outbreak_file", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("backtest", help="expanding-window forecasts in quantile format")
    p.add_argument("outbreak_file", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)
    _add_backtest(p)

    p = sub.add_parser("score", help="score quantile forecast files against outbreaks")
    p.add_argument("forecast_files", type=Path, nargs="+")
    p.add_argument("--truth", type=Path, required=True, help="outbreak file with observed values")
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)
    _add_score(p)

    p = sub.add_parser("run", help="full pipeline from an ingest manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--max-missing", type=float)
    _add_common(p)
    _add_segmentation(p)
    _add_backtest(p)
    _add_score(p)

    p = sub.add_parser("synth", help="write the synthetic demo corpus and its manifest")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=20240601)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.info("kernel backend: %s", backend_name())
    try:
        if args.command == "synth":
            cmd_synth(args.out, args.seed)
            return 0
        cfg = build_config(args)
        if args.command == "ingest":
            cmd_ingest(args.manifest, args.out, cfg)
        elif args.command == "segment":
            cmd_segment(args.series_dir, args.out, cfg, args.reports)
        elif args.command == "analyze":
            cmd_analyze(args.outbreak_file, args.out, cfg)
        elif args.command == "backtest":
            cmd_backtest(args.outbreak_file, args.out, cfg)
        elif args.command == "score":
            cmd_score(args.forecast_files, args.truth, args.out, cfg)
        elif args.command == "run":
            cmd_run(args.manifest, args.out, cfg)
    except (BenchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
