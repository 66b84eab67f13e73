"""Seeded Monte Carlo ensembles and their on-disk outputs.

Realization ``i`` is seeded from ``(master_seed, i)`` alone, and results are
merged in index order, so outputs do not depend on how many workers ran them.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import SimConfig
from .ecosystem import World
from .measure import HistogramSet, bin_centers, peak_report, snapshot

log = logging.getLogger(__name__)

EVENT_SCHEMA_VERSION = 1


def realization_seed(master_seed: int, index: int) -> int:
    """64-bit seed hashed from the master seed and the realization index."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def build_world(cfg: SimConfig, seed: int, log_moves: bool = True) -> World:
    world = World(cfg.grid(), cfg.dynamics(log_moves), np.random.default_rng(seed), cfg.forced_events)
    for f in cfg.founders:
        world.spawn_primordial((f.a, f.b, f.c), f.position, age=f.age)
    return world


@dataclass
class RealizationResult:
    index: int
    seed: int
    histograms: HistogramSet
    events: list[str]
    timeseries: list[tuple]
    coherence: list[tuple]
    counts: dict


def run_realization(cfg: SimConfig, index: int, seed: int) -> RealizationResult:
    world = build_world(cfg, seed, log_moves=cfg.write_events)
    hist = HistogramSet(cfg.rows, cfg.cols, cfg.bin_count, cfg.include_dead_in_histograms)
    series: list[tuple] = []
    coherence: list[tuple] = []

    def record(w: World) -> None:
        snap = snapshot(w, coherence=cfg.track_coherence)
        hist.accumulate(snap, positions=True, expectations=False)
        if cfg.write_timeseries:
            for r in snap.records:
                series.append((index, w.steps, snap.time, r.id, int(r.alive), r.position[0], r.position[1],
                               r.sigma_z_g, r.sigma_z_p))
        if cfg.track_coherence:
            coherence.append((index, w.steps, snap.time, len(w.individuals), len(w.living),
                              snap.collective_sigma_x))

    record(world)
    world.run(cfg.total_time, on_step=record)
    hist.accumulate(snapshot(world, coherence=cfg.track_coherence), positions=False, expectations=True)
    hist.realization_count = 1

    kinds = [ev.kind for ev in world.events]
    counts = {
        "individuals": len(world.individuals),
        "alive": len(world.living),
        "births": kinds.count("birth"),
        "deaths": kinds.count("death"),
        "interactions": kinds.count("interact"),
        "mutations": kinds.count("mutate"),
        "skipped_replications": kinds.count("replication_skipped"),
    }
    events = world.event_log_lines(realization=index) if cfg.write_events else []
    return RealizationResult(index, seed, hist, events, series, coherence, counts)


def _run_indexed(args) -> RealizationResult:
    return run_realization(*args)


@dataclass
class EnsembleResult:
    config: SimConfig
    histograms: HistogramSet
    realizations: list[RealizationResult]
    manifest: dict
    files: list[Path] = field(default_factory=list)

    def counts(self, key: str) -> list[int]:
        return [r.counts[key] for r in self.realizations]


def run_ensemble(cfg: SimConfig, out_dir=None, threads: int = 1, seeds=None) -> EnsembleResult:
    """Run ``cfg.realizations`` independent worlds and merge their statistics.

    ``seeds`` overrides the derived per-realization seeds. ``threads`` is the
    number of worker processes; it never changes the results.
    """
    started = time.time()
    if seeds is None:
        seeds = [realization_seed(cfg.seed, i) for i in range(cfg.realizations)]
    elif len(seeds) != cfg.realizations:
        raise ValueError(f"{len(seeds)} seeds given for {cfg.realizations} realizations")
    jobs = [(cfg, i, int(s)) for i, s in enumerate(seeds)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_indexed, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_run_indexed(job) for job in jobs]

    merged = HistogramSet(cfg.rows, cfg.cols, cfg.bin_count, cfg.include_dead_in_histograms)
    for res in results:
        merged = merged.merge(res.histograms)

    manifest = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "realization_seeds": [int(s) for s in seeds],
        "version": __version__,
        "started": started,
        "wall_seconds": time.time() - started,
        "threads": threads,
        "host": platform.node(),
    }
    result = EnsembleResult(cfg, merged, results, manifest)
    if out_dir is not None:
        result.files = write_outputs(result, Path(out_dir))
    return result


# -- writers -------------------------------------------------------------

def _csv_text(config_hash: str, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_outputs(result: EnsembleResult, out_dir: Path) -> list[Path]:
    cfg = result.config
    h = result.histograms
    chash = result.manifest["config_hash"]
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc
    written = []

    if cfg.write_histograms:
        cells = ((r, c, int(h.position[r, c])) for r in range(h.rows) for c in range(h.cols))
        written.append(_write(out_dir / "histogram_position.csv",
                              _csv_text(chash, ["row", "col", "count"], cells)))
        centers = bin_centers(h.bin_count)
        bins = ((float(centers[i]), int(h.genotype[i]), int(h.phenotype[i]), int(h.coherence[i]))
                for i in range(h.bin_count))
        written.append(_write(out_dir / "histogram_expectations.csv",
                              _csv_text(chash, ["bin_center", "genotype_count", "phenotype_count",
                                                "coherence_count"], bins)))
        peaks = [(fam, c, m) for fam in ("genotype", "phenotype", "coherence")
                 for c, m in peak_report(h, fam, cfg.peak_threshold)]
        written.append(_write(out_dir / "peaks.csv", _csv_text(chash, ["family", "bin_center", "mass"], peaks)))

    summary_keys = list(result.realizations[0].counts) if result.realizations else []
    summary = ((r.index, r.seed, *(r.counts[k] for k in summary_keys)) for r in result.realizations)
    written.append(_write(out_dir / "summary.csv",
                          _csv_text(chash, ["realization", "seed", *summary_keys], summary)))

    if cfg.write_timeseries:
        rows = (row for r in result.realizations for row in r.timeseries)
        written.append(_write(out_dir / "timeseries.csv", _csv_text(
            chash, ["realization", "step", "time[1/gamma]", "id", "alive", "row", "col",
                    "sigma_z_genotype", "sigma_z_phenotype"], rows)))
    if cfg.track_coherence:
        rows = (row for r in result.realizations for row in r.coherence)
        written.append(_write(out_dir / "coherence.csv", _csv_text(
            chash, ["realization", "step", "time[1/gamma]", "individuals", "alive", "sigma_x_all"], rows)))

    if cfg.write_events:
        header = json.dumps({"type": "header", "schema": EVENT_SCHEMA_VERSION, "config_hash": chash},
                            sort_keys=True)
        lines = [header] + [line for r in result.realizations for line in r.events]
        written.append(_write(out_dir / "events.jsonl", "\n".join(lines) + "\n"))

    written.append(_write(out_dir / "manifest.jsonl", json.dumps(result.manifest, sort_keys=True) + "\n"))
    written.append(_write(out_dir / "config.yaml", f"# config_hash={chash}\n" + cfg.to_yaml()))
    log.info("wrote %d files to %s", len(written), out_dir)
    return written


def default_threads() -> int:
    return os.cpu_count() or 1
