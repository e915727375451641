"""Command-line entry point.

Subcommands
-----------
run       fit the requested site-effect methods end to end from a config file
synth     generate a seeded synthetic two-site dataset with known truth
transfer  score a saved single-site ensemble on another dataset

Exit codes: 0 success, 1 numerical failure, 2 configuration error,
3 data error. Every failure prints a single diagnostic line to stderr.
"""

import argparse
import glob
import os
import shutil
import sys
from types import SimpleNamespace

import numpy as np

from . import artifacts
from .config import ENV_OUTPUT_DIR, METHOD_LABELS, load_run_config, load_synth_spec
from .ensemble import tally_selection, write_selection_csv, write_size_histogram_csv
from .errors import ConfigError, DataError, NumericalError, SiteLassoError
from .features import write_removal_log
from .gridpredict import predict_raster, predict_raster_two_stage
from .pipeline import (
    COMBINED,
    covariate_support_report,
    evaluate_transfer,
    run_method1,
    run_method2,
    run_method3,
    run_method4,
    write_method_comparison_csv,
    write_residuals_csv,
    write_support_csv,
)
from .pointdata import PointDataset, format_float, read_points_csv
from .rasters import read_ascii_grid, write_ascii_grid
from .splits import make_splits, plan_to_dict
from .standardize import write_transform_csv
from .synthetic import generate_synthetic

_EXIT_BY_ERROR = ((ConfigError, 2), (DataError, 3), (NumericalError, 1))


def _tag(label):
    return label.replace("-", "_")


def _read_rasters(rasters_dir):
    grids = {}
    for path in sorted(glob.glob(os.path.join(rasters_dir, "*.asc"))):
        name = os.path.splitext(os.path.basename(path))[0]
        grids[name] = read_ascii_grid(path)
    if not grids:
        raise DataError(f"no .asc rasters found in {rasters_dir}")
    return grids


def _quota_for(config, site, n_rows):
    if site in config.train_quota_by_site:
        return config.train_quota_by_site[site]
    if config.train_quota > 0:
        return config.train_quota
    return max(1, round(2 * n_rows / 3))


def _write_ensemble_files(run_dir, label, run, outputs_note):
    """Selection tallies, size histograms, transform audits, artifacts."""
    for sub_label, ens in run.ensembles_by_label():
        tag = _tag(label) if not sub_label else f"{_tag(label)}_{sub_label}"
        freq, sizes = tally_selection(ens)
        write_selection_csv(os.path.join(run_dir, f"selection_{tag}.csv"), freq)
        write_size_histogram_csv(
            os.path.join(run_dir, f"subset_sizes_{tag}.csv"), sizes
        )
        write_transform_csv(
            os.path.join(run_dir, f"transforms_{tag}_v1.csv"), ens.transforms[0]
        )
        payload = artifacts.ensemble_to_dict(ens)
        payload["method"] = label
        payload["site"] = run.site or sub_label.replace("stage2_", "") or None
        artifacts.write_json(os.path.join(run_dir, f"ensemble_{tag}.json"), payload)
    write_removal_log(
        os.path.join(run_dir, f"removal_log_{_tag(label)}.csv"), run.removal_records
    )
    outputs_note.append(label)


def _write_prediction_raster(run_dir, label, run, rasters, site_grid, site_codes):
    path = os.path.join(run_dir, f"prediction_{_tag(label)}.asc")
    if run.method == "m3":
        if site_grid is None:
            return f"{label}: needs site_raster"
        grid = predict_raster_two_stage(
            run.stage1.ensemble, run.stage2, rasters, site_grid, site_codes
        )
    elif run.ensemble.needs_site_information():
        if site_grid is None:
            return f"{label}: needs site_raster"
        grid = predict_raster(
            run.ensemble, rasters, site_grid=site_grid, site_codes=site_codes
        )
    else:
        grid = predict_raster(run.ensemble, rasters)
    write_ascii_grid(path, grid)
    return None


def cmd_run(args):
    config = load_run_config(args.config, args.output_dir)
    data = read_points_csv(config.points)
    sites = data.sites()
    if len(sites) != 2:
        raise DataError(f"run expects exactly two sites, found {len(sites)}")
    quotas = {s: _quota_for(config, s, len(data.site_rows(s))) for s in sites}
    plan = make_splits(data, quotas, config.n_splits, config.seed)

    rasters = site_grid = None
    site_codes = dict(config.site_codes) or {1.0: sites[0], 2.0: sites[1]}
    if config.rasters_dir:
        rasters = _read_rasters(config.rasters_dir)
    if config.site_raster:
        site_grid = read_ascii_grid(config.site_raster)

    run_dir = config.output_dir
    os.makedirs(run_dir, exist_ok=True)
    shutil.copyfile(config.points, os.path.join(run_dir, "points.csv"))
    artifacts.write_json(os.path.join(run_dir, "splits.json"), plan_to_dict(plan))

    hierarchy = config.hierarchy or None
    shared = dict(
        threshold=config.correlation_threshold,
        hierarchy=hierarchy,
        max_order=config.max_order,
        filter_seed=config.seed,
        workers=config.workers,
    )
    site_by_label = {"m1-b1": sites[0], "m1-b2": sites[1]}
    requested = [m for m in METHOD_LABELS if m in config.methods]

    table = {}
    columns = []
    notes = {}
    runs = {}
    written = []
    m2_run = None
    for label in requested:
        if label.startswith("m1-"):
            run = run_method1(data, site_by_label[label], plan, **shared)
            other = sites[1] if run.site == sites[0] else sites[0]
            transfer = evaluate_transfer(run, data.subset(data.site_rows(other)))
            table[label] = dict(run.metrics)
            table[label][other] = transfer.metrics
        elif label == "m2":
            run = m2_run = run_method2(data, plan, **shared)
            table[label] = dict(run.metrics)
        elif label == "m3":
            run = run_method3(data, plan, stage1=m2_run, **shared)
            notes["m3_stage1_source"] = "m2" if m2_run is not None else "internal"
            table[label] = dict(run.metrics)
            table["m3-oos"] = dict(run.metrics_oos)
        else:
            run = run_method4(data, plan, **shared)
            table[label] = dict(run.metrics)
        runs[label] = run
        columns.append(label)
        if label == "m3":
            columns.append("m3-oos")
        _write_ensemble_files(run_dir, label, run, written)
        write_residuals_csv(
            os.path.join(run_dir, f"residuals_{_tag(label)}.csv"),
            data,
            run.row_ids,
            run.predictions,
        )
        if label == "m3":
            write_residuals_csv(
                os.path.join(run_dir, "residuals_m3_oos.csv"),
                data,
                run.row_ids,
                run.predictions_oos,
            )

    targets = sites + [COMBINED]
    write_method_comparison_csv(
        os.path.join(run_dir, "metrics.csv"), table, targets, columns
    )

    skipped = []
    if rasters is not None:
        for label, run in runs.items():
            note = _write_prediction_raster(
                run_dir, label, run, rasters, site_grid, site_codes
            )
            if note:
                skipped.append(note)
    if skipped:
        notes["rasters_skipped"] = skipped

    manifest = artifacts.build_manifest(
        run_dir,
        config.echo(),
        extra={
            "sites": sites,
            "quotas": quotas,
            "method_sites": {m: site_by_label[m] for m in requested if m in site_by_label},
            **notes,
        },
    )
    artifacts.write_json(os.path.join(run_dir, "manifest.json"), manifest)

    for label in columns:
        cells = table[label]
        summary = "  ".join(
            f"{t}: R2={cells[t].r2:.4f} RMSE={cells[t].rmse:.4f}"
            for t in targets
            if t in cells
        )
        print(f"{label:7s} {summary}")
    print(f"run complete: {len(manifest['outputs'])} files in {run_dir}")
    return 0


def cmd_synth(args):
    spec, out_dir = load_synth_spec(args.spec, args.output_dir)
    points, rasters, site_raster, truth = generate_synthetic(spec)
    os.makedirs(out_dir, exist_ok=True)
    rasters_dir = os.path.join(out_dir, "rasters")
    os.makedirs(rasters_dir, exist_ok=True)
    from .pointdata import write_points_csv

    write_points_csv(os.path.join(out_dir, "points.csv"), points)
    for name in sorted(rasters):
        write_ascii_grid(os.path.join(rasters_dir, f"{name}.asc"), rasters[name])
    write_ascii_grid(os.path.join(out_dir, "site.asc"), site_raster)
    artifacts.write_json(os.path.join(out_dir, "truth.json"), truth)
    manifest = artifacts.build_manifest(out_dir, truth)
    artifacts.write_json(os.path.join(out_dir, "manifest.json"), manifest)
    n1, n2 = spec.n_site1, spec.n_site2
    print(
        f"synthetic dataset: {n1}+{n2} points, {len(rasters)} covariate rasters "
        f"({spec.ncols}x{spec.nrows}) in {out_dir}"
    )
    return 0


def _combined_for_support(source_data, source_site, target_data, target_site):
    """One two-site dataset from the source site's rows plus the target's."""
    names = [
        n for n in source_data.covariate_names if n in target_data.covariate_names
    ]
    src_rows = source_data.site_rows(source_site)
    tgt_rows = target_data.site_rows(target_site)
    src = source_data.subset(src_rows)
    tgt = target_data.subset(tgt_rows)
    src_cols = {n: src.covariate(n) for n in names}
    tgt_cols = {n: tgt.covariate(n) for n in names}
    return PointDataset(
        site_ids=np.concatenate([src.site_ids, tgt.site_ids]),
        x=np.concatenate([src.x, tgt.x]),
        y=np.concatenate([src.y, tgt.y]),
        response=np.concatenate([src.response, tgt.response]),
        covariate_names=names,
        covariate_values=np.column_stack(
            [np.concatenate([src_cols[n], tgt_cols[n]]) for n in names]
        )
        if names
        else np.empty((len(src.site_ids) + len(tgt.site_ids), 0)),
    )


def cmd_transfer(args):
    target = read_points_csv(args.target)
    paths = sorted(glob.glob(os.path.join(args.run_dir, "ensemble_m1_*.json")))
    if not paths:
        raise DataError(f"no method-1 ensemble artifacts in {args.run_dir}")
    out_dir = args.output_dir or os.environ.get(ENV_OUTPUT_DIR, "") or args.run_dir
    os.makedirs(out_dir, exist_ok=True)
    source_points_path = os.path.join(args.run_dir, "points.csv")
    source_data = (
        read_points_csv(source_points_path)
        if os.path.exists(source_points_path)
        else None
    )
    rows = []
    support_written = False
    for path in paths:
        payload = artifacts.read_json(path)
        ens = artifacts.ensemble_from_dict(payload)
        source_site = payload.get("site") or os.path.splitext(
            os.path.basename(path)
        )[0].replace("ensemble_m1_", "")
        shim = SimpleNamespace(method="m1", site=source_site, ensemble=ens)
        result = evaluate_transfer(shim, target)
        rows.append(
            (
                source_site,
                result.target_site,
                result.metrics.r2,
                result.metrics.rmse,
                result.metrics.n,
            )
        )
        if source_data is not None and not support_written:
            for tsite in target.sites():
                if tsite == source_site or source_site not in source_data.sites():
                    continue
                report = covariate_support_report(
                    _combined_for_support(source_data, source_site, target, tsite),
                    ens.terms,
                )
                write_support_csv(
                    os.path.join(out_dir, "support_report.csv"), report
                )
                support_written = True
                break
    metrics_path = os.path.join(out_dir, "transfer_metrics.csv")
    with open(metrics_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("source_site,target,r2,rmse,n\n")
        for source_site, tgt, r2, rmse, n in rows:
            handle.write(
                f"{source_site},{tgt},{format_float(r2)},{format_float(rmse)},{n}\n"
            )
    for source_site, tgt, r2, rmse, n in rows:
        print(f"{source_site} -> {tgt}: R2={r2:.4f} RMSE={rmse:.4f} (n={n})")
    print(f"transfer metrics in {metrics_path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sitelasso",
        description=(
            "Two-site interpolation with LASSO-regularized multiple linear "
            "regression: cross-validated model selection, inverse-SSE model "
            "averaging, and full-cover raster prediction."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="fit methods from a config file")
    p_run.add_argument("config", help="key-value run configuration file")
    p_run.add_argument(
        "--output-dir", default=None, help="override output_dir / " + ENV_OUTPUT_DIR
    )
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("spec", help="key-value generator spec file")
    p_synth.add_argument(
        "--output-dir", default=None, help="override output_dir / " + ENV_OUTPUT_DIR
    )
    p_synth.set_defaults(func=cmd_synth)

    p_tr = sub.add_parser("transfer", help="score a saved m1 ensemble elsewhere")
    p_tr.add_argument("run_dir", help="a completed run directory")
    p_tr.add_argument("target", help="target points CSV")
    p_tr.add_argument(
        "--output-dir", default=None, help="where to write transfer outputs"
    )
    p_tr.set_defaults(func=cmd_transfer)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SiteLassoError as exc:
        for err_type, code in _EXIT_BY_ERROR:
            if isinstance(exc, err_type):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
