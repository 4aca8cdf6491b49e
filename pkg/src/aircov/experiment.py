"""Experiment sweeps: (variant x sampling rate x seed) grids with the
classical baselines, emitted as per-cell and per-(variant, rate) summary CSVs.

Cells are independent; a failed cell records its error class instead of
aborting the sweep. Rows are emitted in grid order regardless of worker
scheduling, so the per-cell CSV is deterministic for fixed seeds. Wall-clock
runtimes are kept out of the default CSV (they vary run to run) and go to
an optional timings file instead.
"""

import csv
import logging
import multiprocessing
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import knn_predict, lasso_fit, lasso_predict
from .data import SplitSpec, split_by_bs
from .errors import AircovError, InvalidInputError
from .features import (
    COMPRESSED_NUMERIC,
    FeatureTable,
    assemble_feature_table,
    encode_matrix,
    fit_encoding,
)
from .metrics import mae, mape
from .model import VARIANTS, fit_variant, predict_table_rows
from .nnet import TrainConfig

logger = logging.getLogger(__name__)

BASELINE_TAGS = ("knn", "lasso")
KNN_FEATURES = COMPRESSED_NUMERIC + ["aau_type", "coverage_scenario"]


@dataclass
class ExperimentGrid:
    """A sweep definition bound to its dataset."""

    variants: list
    rates: list
    seeds: list
    bss: list
    samples: list
    m_beams: int = 8
    hidden_width: int = 256
    train_config: TrainConfig = field(default_factory=TrainConfig)
    exclude_aau: bool = False
    knn_k: int = 50
    lasso_lambda: float = 1.0

    def __post_init__(self):
        if not (self.variants and self.rates and self.seeds):
            raise InvalidInputError("variants, rates and seeds must be nonempty")
        for tag in self.variants:
            if tag not in VARIANTS and tag not in BASELINE_TAGS:
                raise InvalidInputError(f"unknown variant {tag!r}")
        for r in self.rates:
            if not 0.0 < r < 0.9:
                raise InvalidInputError(f"rate {r} outside (0, 0.9)")

    def cells(self):
        return [(v, r, s) for v in self.variants for r in self.rates
                for s in self.seeds]


@dataclass
class ResultRow:
    variant: str
    rate: float
    seed: int
    mae_db: float | None
    mape_pct: float | None
    mae_ss_db: float | None
    n_test: int
    runtime_s: float
    status: str  # "ok" or the error class name


@dataclass
class ResultTable:
    rows: list

    def ok_rows(self):
        return [r for r in self.rows if r.status == "ok"]

    def mean_mae(self, variant: str, rate: float) -> float:
        vals = [r.mae_db for r in self.ok_rows()
                if r.variant == variant and r.rate == rate]
        if not vals:
            raise InvalidInputError(f"no results for {variant} at rate {rate}")
        return float(np.mean(vals))


def _run_baseline(tag: str, grid: ExperimentGrid, table: FeatureTable,
                  train_rows, test_rows):
    enc = fit_encoding(table, train_rows, exclude_aau=grid.exclude_aau)
    cols_train = {k: v[train_rows] for k, v in table.columns.items()}
    cols_test = {k: v[test_rows] for k, v in table.columns.items()}
    x_train = encode_matrix(enc, cols_train, KNN_FEATURES)
    x_test = encode_matrix(enc, cols_test, KNN_FEATURES)
    # unobserved target entries are rare in practice; backfill with the
    # per-head training mean so the flat regressors see complete rows
    y_train = table.y_shift[train_rows].copy()
    m_train = table.mask[train_rows]
    for h in range(y_train.shape[1]):
        col = y_train[:, h]
        missing = ~m_train[:, h]
        if missing.any():
            col[missing] = col[~missing].mean() if (~missing).any() else 0.0
    if tag == "knn":
        k = min(grid.knn_k, x_train.shape[0])
        y_pred = knn_predict(x_train, y_train, x_test, k)
    else:
        model = lasso_fit(x_train, y_train, grid.lasso_lambda)
        y_pred = lasso_predict(model, x_test)
    return y_pred + table.p_t[test_rows][:, None]


def run_cell(grid: ExperimentGrid, table: FeatureTable, variant: str,
             rate: float, seed: int) -> ResultRow:
    started = time.perf_counter()
    try:
        train_ids, val_ids, test_ids = split_by_bs(
            {b.bs_id for b in grid.bss}, SplitSpec(rate, seed=seed))
        train_rows = table.rows_for(train_ids)
        val_rows = table.rows_for(val_ids)
        test_rows = table.rows_for(test_ids)
        if test_rows.size == 0:
            raise InvalidInputError("empty test split")
        if variant in BASELINE_TAGS:
            pred = _run_baseline(variant, grid, table, train_rows, test_rows)
        else:
            cfg = replace(grid.train_config, seed=seed)
            model, _ = fit_variant(table, train_rows, val_rows, variant, cfg,
                                   hidden_width=grid.hidden_width,
                                   exclude_aau=grid.exclude_aau)
            pred = predict_table_rows(model, table, test_rows)
        truth = table.p_raw[test_rows]
        mask = table.mask[test_rows]
        row = ResultRow(
            variant=variant, rate=rate, seed=seed,
            mae_db=mae(truth, pred, mask),
            mape_pct=mape(truth, pred, mask),
            mae_ss_db=mae(truth[:, 0], pred[:, 0], mask[:, 0]),
            n_test=int(test_rows.size),
            runtime_s=time.perf_counter() - started,
            status="ok")
    except AircovError as exc:
        logger.warning("cell (%s, %s, %s) failed: %s", variant, rate, seed, exc)
        row = ResultRow(variant=variant, rate=rate, seed=seed, mae_db=None,
                        mape_pct=None, mae_ss_db=None, n_test=0,
                        runtime_s=time.perf_counter() - started,
                        status=type(exc).__name__)
    return row


_WORKER_STATE: dict = {}


def _worker_init(grid, table):
    # one BLAS thread per worker; the pool already saturates the cores
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass
    _WORKER_STATE["grid"] = grid
    _WORKER_STATE["table"] = table


def _worker_cell(cell):
    variant, rate, seed = cell
    return run_cell(_WORKER_STATE["grid"], _WORKER_STATE["table"],
                    variant, rate, seed)


def run_grid(grid: ExperimentGrid, jobs: int = 1) -> ResultTable:
    """Run every cell; cells are independent and may run in parallel."""
    table = assemble_feature_table(grid.bss, grid.samples, grid.m_beams)
    cells = grid.cells()
    if jobs <= 1:
        rows = [run_cell(grid, table, *cell) for cell in cells]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(jobs, initializer=_worker_init,
                      initargs=(grid, table)) as pool:
            rows = pool.map(_worker_cell, cells, chunksize=1)
    return ResultTable(rows=rows)


RESULT_COLUMNS = ["variant", "rate", "seed", "mae_db", "mape_pct",
                  "mae_ss_db", "n_test", "status"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_results_csv(table: ResultTable, path, include_runtime=False) -> None:
    columns = RESULT_COLUMNS + (["runtime_s"] if include_runtime else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in table.rows:
            cells = [r.variant, _fmt(r.rate), r.seed, _fmt(r.mae_db),
                     _fmt(r.mape_pct), _fmt(r.mae_ss_db), r.n_test, r.status]
            if include_runtime:
                cells.append(_fmt(r.runtime_s))
            writer.writerow(cells)


def write_timings_csv(table: ResultTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "rate", "seed", "runtime_s"])
        for r in table.rows:
            writer.writerow([r.variant, _fmt(r.rate), r.seed, _fmt(r.runtime_s)])


def write_summary_csv(table: ResultTable, path) -> None:
    """Per-(variant, rate) mean/std of MAE and mean MAPE over the ok cells."""
    groups: dict = {}
    for r in table.ok_rows():
        groups.setdefault((r.variant, r.rate), []).append(r)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "rate", "n_ok", "mae_mean_db",
                         "mae_std_db", "mape_mean_pct", "mae_ss_mean_db"])
        for (variant, rate) in sorted(groups):
            rows = groups[(variant, rate)]
            maes = np.array([r.mae_db for r in rows])
            mapes = np.array([r.mape_pct for r in rows])
            ss = np.array([r.mae_ss_db for r in rows])
            writer.writerow([
                variant, _fmt(rate), len(rows), _fmt(float(maes.mean())),
                _fmt(float(maes.std())), _fmt(float(mapes.mean())),
                _fmt(float(ss.mean()))])
