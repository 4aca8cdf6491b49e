"""Command-line interface.

Subcommands cover the full pipeline: synthetic data generation, model
training, evaluation sweeps, coverage-map rasterization, map sampling, and
bundle inspection. Logs go to stderr; data is written only to paths named
by flags. Every randomized command takes --seed and reproduces its outputs
byte-for-byte when re-run single-threaded with the same arguments.

Exit codes: 0 success, 2 usage, 3 data/validation, 4 convergence, 5 I/O.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import covmap
from .data import (
    SplitSpec,
    parse_bs_table,
    parse_measurements,
    split_by_bs,
    write_bs_table,
    write_measurements,
)
from .errors import AircovError, ConvergenceError
from .experiment import (
    BASELINE_TAGS,
    ExperimentGrid,
    run_grid,
    write_results_csv,
    write_summary_csv,
    write_timings_csv,
)
from .features import assemble_feature_table
from .metrics import error_distribution, mae, mape
from .model import (
    VARIANT_TAGS,
    fit_variant,
    load_model,
    param_count,
    predict_table_rows,
    save_model,
)
from .nnet import TrainConfig
from .synth import default_scenario, generate_dataset, load_scenario

logger = logging.getLogger("aircov")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
EXIT_IO = 5


def _add_train_flags(p):
    p.add_argument("--width", type=int, default=256,
                   help="hidden width of every subnet (default 256)")
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--exclude-aau", action="store_true",
                   help="drop the AAU type feature (cross-vendor mode)")


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(learning_rate=args.learning_rate,
                       max_epochs=args.max_epochs,
                       batch_size=args.batch_size, seed=seed)


def parse_args(argv) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="aircov",
        description="low-altitude coverage prediction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="scenario JSON (defaults when omitted)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-bs", type=int, required=True)
    p.add_argument("--samples-per-bs", type=int, required=True)
    p.add_argument("--noise-std", type=float, default=None,
                   help="override the scenario noise level, dB")
    p.add_argument("--out-bs", required=True, help="station CSV to write")
    p.add_argument("--out-meas", required=True, help="measurement CSV to write")

    p = sub.add_parser("train", help="train one variant on a split")
    p.add_argument("--bs-file", required=True)
    p.add_argument("--meas-file", required=True)
    p.add_argument("--m-beams", type=int, default=8)
    p.add_argument("--variant", choices=VARIANT_TAGS, default="proposed")
    p.add_argument("--rate", type=float, required=True,
                   help="station sampling rate for the training split")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="model bundle to write")
    _add_train_flags(p)

    p = sub.add_parser("eval-grid", help="run a (variant x rate x seed) sweep")
    p.add_argument("--bs-file", required=True)
    p.add_argument("--meas-file", required=True)
    p.add_argument("--m-beams", type=int, default=8)
    p.add_argument("--variants", required=True,
                   help=f"comma list from {', '.join(VARIANT_TAGS + BASELINE_TAGS)}")
    p.add_argument("--rates", required=True, help="comma list of fractions")
    p.add_argument("--seeds", required=True,
                   help="comma list and/or A-B ranges, e.g. 0-19")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers over independent cells")
    p.add_argument("--knn-k", type=int, default=50)
    p.add_argument("--lasso-lambda", type=float, default=1.0)
    p.add_argument("--out", required=True, help="per-cell results CSV")
    p.add_argument("--summary-out", help="per-(variant, rate) summary CSV")
    p.add_argument("--timings-out",
                   help="per-cell wall-clock CSV (non-deterministic)")
    _add_train_flags(p)

    p = sub.add_parser("predict-map", help="rasterize fused SS-RSRP coverage")
    p.add_argument("--model", required=True, help="trained bundle")
    p.add_argument("--bs-file", required=True)
    p.add_argument("--bs-ids", help="comma list (default: all stations)")
    p.add_argument("--origin-lon", type=float)
    p.add_argument("--origin-lat", type=float)
    p.add_argument("--extent-east", type=float,
                   help="meters; with origin flags, sets the grid explicitly")
    p.add_argument("--extent-north", type=float)
    p.add_argument("--resolution", type=float, default=10.0)
    p.add_argument("--altitude", type=float, default=120.0)
    p.add_argument("--radius", type=float, default=2000.0,
                   help="per-station prediction radius, meters")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-image", help="optional PPM heatmap")

    p = sub.add_parser("sample-map", help="sample an exported map at points")
    p.add_argument("--map-csv", required=True,
                   help="grid CSV written by predict-map (sidecar required)")
    p.add_argument("--points", required=True,
                   help="CSV with lon,lat header")
    p.add_argument("--out", required=True)

    p = sub.add_parser("inspect-model", help="print a bundle summary")
    p.add_argument("--model", required=True)

    return parser.parse_args(argv)


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (None, None)
            if lo is None:
                raise ValueError(f"bad seed range {part!r}")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def _cmd_synth(args) -> int:
    scenario = load_scenario(args.config) if args.config else default_scenario()
    if args.noise_std is not None:
        from dataclasses import replace
        scenario = replace(scenario, noise_std=args.noise_std)
    bss, samples = generate_dataset(scenario, args.n_bs, args.samples_per_bs,
                                    seed=args.seed)
    write_bs_table(bss, args.out_bs)
    write_measurements(samples, args.out_meas, scenario.m_beams)
    logger.info("wrote %d stations to %s, %d samples to %s",
                len(bss), args.out_bs, len(samples), args.out_meas)
    return EXIT_OK


def _cmd_train(args) -> int:
    bss = parse_bs_table(args.bs_file)
    samples = parse_measurements(args.meas_file, args.m_beams)
    table = assemble_feature_table(bss, samples, args.m_beams)
    train_ids, val_ids, test_ids = split_by_bs(
        {b.bs_id for b in bss}, SplitSpec(args.rate, seed=args.seed))
    cfg = _train_config(args, args.seed)
    model, history = fit_variant(
        table, table.rows_for(train_ids), table.rows_for(val_ids),
        args.variant, cfg, hidden_width=args.width,
        exclude_aau=args.exclude_aau)
    save_model(model, args.out)
    test_rows = table.rows_for(test_ids)
    if test_rows.size:
        pred = predict_table_rows(model, table, test_rows)
        truth = table.p_raw[test_rows]
        mask = table.mask[test_rows]
        dist = error_distribution(np.abs(pred - truth)[mask])
        logger.info(
            "test MAE %.3f dB, MAPE %.2f%%, %.1f%% of errors below 8 dB",
            mae(truth, pred, mask), mape(truth, pred, mask),
            100.0 * dist.frac_below[8.0])
    logger.info("trained %s for %d epochs (best epoch %d); bundle at %s",
                args.variant, len(history.train_losses), history.best_epoch,
                args.out)
    return EXIT_OK


def _cmd_eval_grid(args) -> int:
    bss = parse_bs_table(args.bs_file)
    samples = parse_measurements(args.meas_file, args.m_beams)
    grid = ExperimentGrid(
        variants=[v.strip() for v in args.variants.split(",") if v.strip()],
        rates=[float(r) for r in args.rates.split(",")],
        seeds=_parse_seeds(args.seeds),
        bss=bss, samples=samples, m_beams=args.m_beams,
        hidden_width=args.width,
        train_config=TrainConfig(learning_rate=args.learning_rate,
                                 max_epochs=args.max_epochs,
                                 batch_size=args.batch_size),
        exclude_aau=args.exclude_aau,
        knn_k=args.knn_k, lasso_lambda=args.lasso_lambda)
    table = run_grid(grid, jobs=args.jobs)
    write_results_csv(table, args.out)
    if args.summary_out:
        write_summary_csv(table, args.summary_out)
    if args.timings_out:
        write_timings_csv(table, args.timings_out)
    failed = [r for r in table.rows if r.status != "ok"]
    logger.info("%d cells, %d failed", len(table.rows), len(failed))
    return EXIT_OK


def _cmd_predict_map(args) -> int:
    model = load_model(args.model)
    bss = parse_bs_table(args.bs_file)
    if args.bs_ids:
        wanted = {s.strip() for s in args.bs_ids.split(",")}
        missing = wanted - {b.bs_id for b in bss}
        if missing:
            raise AircovError(f"unknown bs_ids: {', '.join(sorted(missing))}")
        bss = [b for b in bss if b.bs_id in wanted]
    if not bss:
        raise AircovError("no stations selected")

    explicit = [args.origin_lon, args.origin_lat, args.extent_east,
                args.extent_north]
    if any(v is not None for v in explicit) and not all(v is not None for v in explicit):
        raise AircovError("origin/extent flags must be given together")
    if all(v is not None for v in explicit):
        spec = covmap.GridSpec(args.origin_lon, args.origin_lat,
                               args.extent_east, args.extent_north,
                               args.resolution, args.altitude)
    else:
        # bounding box of the selected stations, padded by the radius
        import math
        lats = [b.location.latitude for b in bss]
        lons = [b.location.longitude for b in bss]
        cos_lat = math.cos(math.radians(min(lats)))
        pad_lon = args.radius / (111320.0 * cos_lat)
        pad_lat = args.radius / 111320.0
        origin_lon = min(lons) - pad_lon
        origin_lat = min(lats) - pad_lat
        extent_east = (max(lons) - origin_lon + pad_lon) * 111320.0 * cos_lat
        extent_north = (max(lats) - origin_lat + pad_lat) * 111320.0
        spec = covmap.GridSpec(origin_lon, origin_lat, extent_east,
                               extent_north, args.resolution, args.altitude)

    grids = [covmap.predict_grid(model, bs, spec, args.radius) for bs in bss]
    fused = covmap.fuse_max(grids)
    covmap.export_csv(fused, args.out_csv)
    if args.out_image:
        covmap.export_image(fused, args.out_image)
    covered = int(np.isfinite(fused.values).sum())
    logger.info("fused %d stations onto a %dx%d grid (%d covered cells)",
                len(bss), spec.ny, spec.nx, covered)
    return EXIT_OK


def _cmd_sample_map(args) -> int:
    grid = covmap.import_csv(args.map_csv)
    points = []
    with open(args.points, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["lon", "lat"]:
            raise AircovError(f"{args.points}: expected lon,lat header")
        for line in fh:
            lon, lat = line.strip().split(",")[:2]
            points.append((float(lon), float(lat)))
    values = covmap.sample_at(grid, np.array(points))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        fh.write("lon,lat,ss_rsrp_dbm\n")
        for (lon, lat), v in zip(points, values):
            cell = "" if np.isnan(v) else repr(float(v))
            fh.write(f"{lon!r},{lat!r},{cell}\n")
    logger.info("sampled %d points from %s", len(points), args.map_csv)
    return EXIT_OK


def _cmd_inspect_model(args) -> int:
    model = load_model(args.model)
    enc = model.encoding
    summary = {
        "variant": model.variant,
        "m_beams": model.m_beams,
        "hidden_width": model.hidden_width,
        "parameters": param_count(model),
        "target_kind": enc.target_kind,
        "exclude_aau": enc.exclude_aau,
        "subnets": [
            {"inputs": group, "input_dim": net.spec.input_dim,
             "hidden_layers": net.spec.hidden_layers}
            for group, net in zip(model.groups, model.nets)
        ],
        "aau_vocabulary": enc.vocab_aau,
        "scenario_vocabulary": enc.vocab_scenario,
    }
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval-grid": _cmd_eval_grid,
    "predict-map": _cmd_predict_map,
    "sample-map": _cmd_sample_map,
    "inspect-model": _cmd_inspect_model,
}


def run(args: argparse.Namespace) -> int:
    """Dispatch a parsed command; maps error classes to exit codes."""
    try:
        return _COMMANDS[args.command](args)
    except ConvergenceError as exc:
        logger.error("%s", exc)
        return EXIT_CONVERGENCE
    except AircovError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = parse_args(sys.argv[1:] if argv is None else argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
