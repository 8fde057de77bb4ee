"""Experiment harness: configured runs over seeds, CSV output and weight sweeps.

Records CSV columns (one row per seed)::

    seed, n, k, k1, gamma1, gamma2, gamma0, alpha1, alpha2, alpha0,
    hk_1, hk_2, hkk1_0, d_1, d_2, d_0, total, R1, R2,
    margin_side1, margin_side2, margin_sum, d_12, iterations

Trace CSV columns: ``seed, iteration, total`` (energy every ``n`` iterations).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .annealer import AnnealSchedule
from .energy import DistortionMeasure, LagrangianWeights, average_distortion
from .exceptions import InvalidInputError
from .pipeline import md_decode_central, md_decode_side, md_encode, theorem0_check
from .sources import MarkovSourceSpec, generate_markov
from .validation import check_orders

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "RECORD_COLUMNS",
    "TRACE_COLUMNS",
    "RunRecord",
    "frontier_csv",
    "records_csv",
    "summarize",
    "trace_csv",
    "run_experiment",
    "sweep",
]

RECORD_COLUMNS = (
    "seed", "n", "k", "k1",
    "gamma1", "gamma2", "gamma0", "alpha1", "alpha2", "alpha0",
    "hk_1", "hk_2", "hkk1_0", "d_1", "d_2", "d_0", "total", "R1", "R2",
    "margin_side1", "margin_side2", "margin_sum", "d_12", "iterations",
)
TRACE_COLUMNS = ("seed", "iteration", "total")
SWEEP_KEYS = LagrangianWeights.names() + ("k", "k1", "theta")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a batch of runs.

    ``r`` is the iteration count; in JSON it may instead be given as
    ``iterations_per_symbol`` (multiplied by ``n``).  With ``vary_source`` each
    seed also draws a fresh source realization (source seed + run seed).
    """

    source: MarkovSourceSpec
    k: int = 5
    k1: int = 1
    weights: LagrangianWeights = field(default_factory=LagrangianWeights)
    distortion: DistortionMeasure | None = None
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule.power_law)
    r: int = 0
    theta: float = 0.5
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    records_path: str | None = None
    trace_path: str | None = None
    vary_source: bool = True
    verify_decoders: bool = True
    backend: str = "auto"

    def __post_init__(self):
        check_orders(self.source.n, self.k, self.k1)
        if self.r < 0:
            raise InvalidInputError("r must be >= 0")
        if not self.seeds:
            raise InvalidInputError("at least one seed is required")
        if self.distortion is None:
            self.distortion = DistortionMeasure.hamming(self.source.alphabet_size)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("grid", None)
        source = MarkovSourceSpec.from_dict(d.pop("source"))
        if "iterations_per_symbol" in d:
            if "r" in d:
                raise InvalidInputError("give either r or iterations_per_symbol, not both")
            d["r"] = int(round(float(d.pop("iterations_per_symbol")) * source.n))
        dist = d.pop("distortion", "hamming")
        if dist == "hamming" or dist is None:
            dist = DistortionMeasure.hamming(source.alphabet_size)
        else:
            dist = DistortionMeasure(dist)
        out = d.pop("output", {}) or {}
        known = {"k", "k1", "r", "theta", "seeds", "vary_source", "verify_decoders", "backend"}
        unknown = set(d) - known - {"weights", "schedule"}
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            source=source,
            weights=LagrangianWeights.from_dict(d.pop("weights", {})),
            distortion=dist,
            schedule=AnnealSchedule.from_dict(d.pop("schedule", {"kind": "power_law"})),
            records_path=out.get("records"),
            trace_path=out.get("trace"),
            **{key: d[key] for key in known if key in d},
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "k": self.k,
            "k1": self.k1,
            "weights": self.weights.to_dict(),
            "distortion": self.distortion.matrix.tolist(),
            "schedule": self.schedule.to_dict(),
            "r": self.r,
            "theta": self.theta,
            "seeds": list(self.seeds),
            "vary_source": self.vary_source,
            "verify_decoders": self.verify_decoders,
            "backend": self.backend,
            "output": {"records": self.records_path, "trace": self.trace_path},
        }

    def with_params(self, **params) -> "ExperimentConfig":
        """Copy with some weights and/or ``k``, ``k1``, ``theta`` replaced."""
        wkeys = {key: params.pop(key) for key in list(params) if key in LagrangianWeights.names()}
        weights = replace(self.weights, **wkeys) if wkeys else self.weights
        return replace(self, weights=weights, **params)


@dataclass
class RunRecord:
    seed: int
    row: dict
    trace: np.ndarray


def _source_for(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    spec = cfg.source
    if cfg.vary_source:
        base = 0 if spec.seed is None else spec.seed
        spec = replace(spec, seed=base + seed)
    return generate_markov(spec)


def _run_one(cfg: ExperimentConfig, seed: int) -> RunRecord:
    x = _source_for(cfg, seed)
    messages, report, rates = md_encode(
        x, cfg.weights, cfg.distortion, cfg.k, cfg.k1, cfg.schedule, cfg.r, cfg.theta, seed,
        backend=cfg.backend,
    )
    if cfg.verify_decoders:
        m1, m2 = (m.to_bytes() for m in messages)
        ok = (
            np.array_equal(md_decode_side(m1, 1), report.y)
            and np.array_equal(md_decode_side(m2, 2), report.z)
            and np.array_equal(md_decode_central(m1, m2), report.w)
        )
        if not ok:
            raise RuntimeError(f"decoders did not reproduce the annealed triple (seed {seed})")
    margins = theorem0_check(rates).margins
    b = report.breakdown
    row = {
        "seed": seed, "n": len(x), "k": cfg.k, "k1": cfg.k1,
        **cfg.weights.to_dict(),
        "hk_1": b.hk_y, "hk_2": b.hk_z, "hkk1_0": b.hkk1_w,
        "d_1": b.d_y, "d_2": b.d_z, "d_0": b.d_w, "total": b.total,
        "R1": rates.R1, "R2": rates.R2,
        "margin_side1": margins["side1"], "margin_side2": margins["side2"],
        "margin_sum": margins["sum"],
        "d_12": average_distortion(report.y, report.z, cfg.distortion),
        "iterations": report.iterations,
    }
    logger.info("seed %s: total energy %.4f, R1 %.4f, R2 %.4f", seed, b.total, rates.R1, rates.R2)
    return RunRecord(seed, row, report.trace)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for rec in records:
        writer.writerow([_fmt(rec.row[c]) for c in RECORD_COLUMNS])
    return buf.getvalue()


def trace_csv(records, n_by_seed: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in records:
        n = n_by_seed[rec.seed]
        last = len(rec.trace) - 1
        for m, e in enumerate(rec.trace):
            it = rec.row["iterations"] if m == last else m * n
            writer.writerow([rec.seed, it, repr(float(e))])
    return buf.getvalue()


def _write(path, text: str) -> None:
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _map(fn, args, workers: int):
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    # each task owns its chain; results come back in submission order
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[RunRecord]:
    """Run the full pipeline once per seed; write the CSVs named in ``cfg``.

    With ``workers > 1`` seeds run in separate processes; output is identical.
    """
    records = _map(_run_one, [(cfg, int(s)) for s in cfg.seeds], workers)
    if cfg.records_path:
        _write(cfg.records_path, records_csv(records))
    if cfg.trace_path:
        _write(cfg.trace_path, trace_csv(records, {r.seed: r.row["n"] for r in records}))
    return records


def summarize(records) -> dict:
    """Median of every numeric record column across seeds."""
    cols = [c for c in RECORD_COLUMNS if c != "seed"]
    return {c: float(np.median([r.row[c] for r in records])) for c in cols}


def sweep(cfg: ExperimentConfig, grid: dict, noise_band: float = 0.01, workers: int = 1):
    """One :func:`run_experiment` per point of the Cartesian ``grid``.

    Returns ``(rows, diagnostics)``: ``rows`` holds the grid point plus the
    median of each record column; ``diagnostics`` reports, for each swept
    ``alpha`` weight, whether the matching median distortion is non-increasing
    up to ``noise_band``.  Diagnostics are reported, never enforced.
    """
    if not grid:
        raise InvalidInputError("sweep grid must not be empty")
    unknown = set(grid) - set(SWEEP_KEYS)
    if unknown:
        raise InvalidInputError(f"cannot sweep over {sorted(unknown)}")
    keys = list(grid)
    points = [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]
    tasks = []
    for point in points:
        sub = cfg.with_params(**point, records_path=None, trace_path=None)
        tasks.extend((sub, int(s)) for s in sub.seeds)
    flat = _map(_run_one, tasks, workers)
    rows = []
    per = len(cfg.seeds)
    for gi, point in enumerate(points):
        records = flat[gi * per:(gi + 1) * per]
        rows.append({**{f"grid_{k}": v for k, v in point.items()}, **summarize(records)})
    diagnostics = {}
    for key, dcol in (("alpha1", "d_1"), ("alpha2", "d_2"), ("alpha0", "d_0")):
        if key not in grid:
            continue
        others = [k for k in keys if k != key]
        groups: dict = {}
        for row in rows:
            groups.setdefault(tuple(row[f"grid_{k}"] for k in others), []).append(row)
        checks = []
        for group in groups.values():
            group.sort(key=lambda r: r[f"grid_{key}"])
            ds = [r[dcol] for r in group]
            checks.append(all(b <= a + noise_band for a, b in zip(ds, ds[1:])))
        diagnostics[key] = {"monotone": all(checks), "groups": len(checks)}
    return rows, diagnostics


def frontier_csv(rows) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()
