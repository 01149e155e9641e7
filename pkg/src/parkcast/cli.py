"""Command-line surface: ingest, analyze, simulate, fit, forecast, backtest.

Every command takes a YAML config file as its positional argument; unknown
keys are rejected and the fully-resolved settings are written to
``<out-dir>/effective-config.yaml`` so any run can be reproduced from that
artifact alone. All randomness flows through explicit seeds.

Exit codes: 0 success, 2 config error, 3 missing file, 4 data/schema error,
5 model or runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import yaml

from .basis import ANNUAL_STEPS, BSplineSpec, interaction_basis
from .design import (
    DesignContext,
    build_power_mean_design,
    build_power_vol_design,
    build_speed_mean_design,
    build_speed_vol_design,
    compute_threshold_set,
    dump_columns_csv,
    index_sets_from,
)
from .evaluation import BacktestSpec, run_backtest, write_report
from .forecast import Forecaster, simulate_synthetic
from .lasso import LassoSettings
from .model import ModelConfig, fit_joint_model, load_model, save_model
from .panel import (
    CalendarIndex,
    PanelError,
    PanelSchema,
    TurbinePanel,
    fill_gaps_linear,
    load_panel,
    seasonal_mean_profile,
    smoothed_periodogram,
)
from .presets import example_generator

EXIT_CONFIG, EXIT_MISSING, EXIT_DATA, EXIT_RUNTIME = 2, 3, 4, 5


class ConfigError(Exception):
    pass


DEFAULT_CONFIG = {
    "schema": {"timestamp": "ts", "turbines": "auto"},
    "output_dir": "out",
    "seed": 0,
    "workers": 1,
    "model": {
        "k_max": 2,
        "vol_floor_fraction": 1e-3,
        "min_rows": 5000,
        "threshold_policy": "deciles",
        "degree": 3,
        "diurnal_basis": 12,
        "annual_basis": 4,
        "annual_season": ANNUAL_STEPS,
        "own_short_max": 40,
        "own_long_band": [140, 150],
        "cross_max": 6,
        "time_varying": True,
        "lasso": {
            "grid_count": 100,
            "grid_ratio": 1e-4,
            "tol": 1e-7,
            "max_sweeps": 10000,
        },
    },
    "ingest": {"input": "", "fill_gaps": True},
    "simulate": {"n": 20000, "d": 2, "start": "2010-11-01T00:00:00"},
    "analyze": {
        "what": "periodogram",
        "turbine": "",
        "variable": "speed",
        "span": 101,
        "equation": "speed_mean",
        "basis_kind": "cumulative",
    },
    "forecast": {"origin": -1, "horizon": 288, "n_paths": 1000, "bootstrap": True},
    "backtest": {
        "n_origins": 1000,
        "max_horizon": 288,
        "in_sample": 52830,
        "models": ["persistence", "ar"],
    },
}


def _merge(defaults, user, path=""):
    if not isinstance(user, dict):
        raise ConfigError(f"expected a mapping at {path or 'top level'}")
    out = {}
    for key, dval in defaults.items():
        if key in user:
            uval = user[key]
            if isinstance(dval, dict):
                out[key] = _merge(dval, uval, f"{path}{key}.")
            else:
                out[key] = uval
        else:
            out[key] = dval
    unknown = set(user) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config key(s): "
                          f"{', '.join(path + k for k in sorted(unknown))}")
    return out


def load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file {path!r} not found")
    with open(path) as fh:
        user = yaml.safe_load(fh) or {}
    return _merge(DEFAULT_CONFIG, user)


def write_effective_config(cfg: dict, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "effective-config.yaml"), "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)


def model_config_from(cfg: dict) -> ModelConfig:
    m = cfg["model"]
    band = m["own_long_band"]
    sets = index_sets_from(int(m["own_short_max"]),
                           None if band in (None, []) else (int(band[0]), int(band[1])),
                           int(m["cross_max"]), bool(m["time_varying"]))
    return ModelConfig(
        sets=sets,
        threshold_policy=m["threshold_policy"],
        diurnal=BSplineSpec(int(m["degree"]), 144.0, int(m["diurnal_basis"]),
                            strict_partition=True),
        annual=BSplineSpec(int(m["degree"]), float(m["annual_season"]),
                           int(m["annual_basis"])),
        k_max=int(m["k_max"]),
        vol_floor_fraction=float(m["vol_floor_fraction"]),
        min_rows=int(m["min_rows"]),
        lasso=LassoSettings(
            grid_count=int(m["lasso"]["grid_count"]),
            grid_ratio=float(m["lasso"]["grid_ratio"]),
            tol=float(m["lasso"]["tol"]),
            max_sweeps=int(m["lasso"]["max_sweeps"]),
        ),
    )


def _infer_turbines(path: str, timestamp: str) -> tuple[str, ...]:
    """Read turbine labels off the header: every <label>_speed/<label>_power
    column pair, in order of appearance."""
    with open(path) as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    cols = set(header)
    labels = []
    for name in header:
        if name.endswith("_speed"):
            label = name[: -len("_speed")]
            if f"{label}_power" in cols:
                labels.append(label)
    if not labels:
        raise PanelError(f"{path}: no <label>_speed/<label>_power column pairs")
    return tuple(labels)


def panel_schema_from(cfg: dict, path: str | None = None) -> PanelSchema:
    s = cfg["schema"]
    turbines = s["turbines"]
    if turbines in ("auto", None, []):
        if path is None:
            raise ConfigError("schema.turbines is 'auto' but no panel to inspect")
        turbines = _infer_turbines(path, str(s["timestamp"]))
    return PanelSchema(str(s["timestamp"]), tuple(str(t) for t in turbines))


def _read_panel(path: str | None, cfg: dict) -> TurbinePanel:
    if not path:
        raise ConfigError("a panel CSV is required; pass --panel PATH")
    if not os.path.exists(path):
        raise FileNotFoundError(f"panel file {path!r} not found")
    return load_panel(path, panel_schema_from(cfg, path))


def write_panel_csv(panel: TurbinePanel, path: str) -> None:
    """Canonical panel CSV: ISO timestamps, <label>_speed/<label>_power pairs,
    empty cells for masked values."""
    from datetime import datetime, timezone

    with open(path, "w") as fh:
        cols = ["ts"]
        for lab in panel.labels:
            cols += [f"{lab}_speed", f"{lab}_power"]
        fh.write(",".join(cols) + "\n")
        for r in range(panel.n):
            ts = datetime.fromtimestamp(int(panel.timestamps[r]), tz=timezone.utc)
            cells = [ts.strftime("%Y-%m-%dT%H:%M:%S")]
            for i in range(panel.d):
                cells.append("" if panel.speed_mask[r, i]
                             else repr(float(panel.speed[r, i])))
                cells.append("" if panel.power_mask[r, i]
                             else repr(float(panel.power[r, i])))
            fh.write(",".join(cells) + "\n")


def _write_forecast_csv(result, path: str) -> None:
    qcols = ",".join(f"p{q:02d}" for q in range(1, 100))
    with open(path, "w") as fh:
        fh.write(f"origin_ts,horizon,turbine,variable,point,{qcols}\n")
        for var, point, quant in (("speed", result.speed_point, result.speed_quantiles),
                                  ("power", result.power_point, result.power_quantiles)):
            for h in range(result.horizon):
                for i, lab in enumerate(result.labels):
                    row = [str(result.origin_timestamp), str(h + 1), lab, var,
                           repr(float(point[h, i]))]
                    if quant is None:
                        row += [""] * 99
                    else:
                        row += [repr(float(v)) for v in quant[h, i]]
                    fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# command handlers


def cmd_ingest(cfg: dict, args) -> int:
    src = args.input or cfg["ingest"]["input"]
    if not src:
        raise ConfigError("ingest.input (or --input) is required")
    panel = _read_panel(src, cfg)
    if cfg["ingest"]["fill_gaps"]:
        panel = fill_gaps_linear(panel)
    out = os.path.join(cfg["output_dir"], "panel.csv")
    write_panel_csv(panel, out)
    print(f"wrote {out}: {panel.n} rows x {panel.d} turbines")
    return 0


def cmd_simulate(cfg: dict, args) -> int:
    from .panel import parse_timestamp
    from .presets import demo_config

    sim = cfg["simulate"]
    n, d = int(sim["n"]), int(sim["d"])
    start = parse_timestamp(str(sim["start"]), 0)
    gen_cfg = demo_config(n)
    labels = tuple(chr(ord("A") + i) for i in range(d))
    panel = simulate_synthetic(gen_cfg, example_generator(d), n, int(cfg["seed"]),
                               labels=labels, start_epoch=start)
    out = os.path.join(cfg["output_dir"], "panel.csv")
    write_panel_csv(panel, out)
    print(f"wrote {out}: {panel.n} rows x {panel.d} turbines (seed {cfg['seed']})")
    return 0


def _analyze_design(cfg, panel, outdir) -> str:
    config = model_config_from(cfg)
    equation = cfg["analyze"]["equation"]
    label = cfg["analyze"]["turbine"] or panel.labels[0]
    i = panel.labels.index(label)
    cal = CalendarIndex.from_timestamps(panel.timestamps)
    mean_b = interaction_basis(cal.time_of_day, cal.time_of_year,
                               config.diurnal, config.annual, "cumulative")
    vol_b = interaction_basis(cal.time_of_day, cal.time_of_year,
                              config.diurnal, config.annual, "plain")
    thresholds = compute_threshold_set(panel.speed, panel.power, config.sets,
                                       config.threshold_policy)
    n, d = panel.n, panel.d
    ones = np.ones((n, d))
    ctx = DesignContext(panel.speed, panel.power, ones, ones, ones, ones,
                        mean_b.values, vol_b.values, config.sets.max_lag())
    builders = {
        "speed_mean": lambda: build_speed_mean_design(ctx, i, config.sets, thresholds),
        "power_mean": lambda: build_power_mean_design(ctx, i, config.sets, thresholds),
        "speed_vol": lambda: build_speed_vol_design(ctx, i, config.sets),
        "power_vol": lambda: build_power_vol_design(ctx, i, config.sets),
    }
    if equation not in builders:
        raise ConfigError(f"analyze.equation must be one of {sorted(builders)}")
    dm, _ = builders[equation]()
    out = os.path.join(outdir, f"design_{equation}_{label}.csv")
    dump_columns_csv(dm.columns, out)
    return out


def cmd_analyze(cfg: dict, args) -> int:
    what = args.what or cfg["analyze"]["what"]
    panel = _read_panel(args.panel, cfg)
    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    if what == "periodogram":
        label = cfg["analyze"]["turbine"] or panel.labels[0]
        i = panel.labels.index(label)
        var = cfg["analyze"]["variable"]
        series = panel.speed[:, i] if var == "speed" else panel.power[:, i]
        freqs, dens = smoothed_periodogram(series, int(cfg["analyze"]["span"]))
        out = os.path.join(outdir, f"periodogram_{label}_{var}.csv")
        with open(out, "w") as fh:
            fh.write("frequency,density\n")
            for f, v in zip(freqs, dens):
                fh.write(f"{float(f)!r},{float(v)!r}\n")
    elif what == "profiles":
        prof = seasonal_mean_profile(panel)
        out = os.path.join(outdir, "profiles.csv")
        with open(out, "w") as fh:
            fh.write("season,tod,turbine,variable,mean\n")
            for s in range(prof.shape[0]):
                for tau in range(prof.shape[1]):
                    for i, lab in enumerate(panel.labels):
                        fh.write(f"{s},{tau},{lab},speed,"
                                 f"{float(prof[s, tau, i, 0])!r}\n")
                        fh.write(f"{s},{tau},{lab},power,"
                                 f"{float(prof[s, tau, i, 1])!r}\n")
    elif what == "design":
        out = _analyze_design(cfg, panel, outdir)
    elif what == "basis":
        config = model_config_from(cfg)
        kind = cfg["analyze"]["basis_kind"]
        cal = CalendarIndex.from_timestamps(panel.timestamps)
        bs = interaction_basis(cal.time_of_day, cal.time_of_year,
                               config.diurnal, config.annual, kind)
        out = os.path.join(outdir, f"basis_{kind}.csv")
        with open(out, "w") as fh:
            names = [f"b{a}_{b}" for a, b in bs.pairs]
            fh.write("ts," + ",".join(names) + "\n")
            for r in range(panel.n):
                fh.write(str(int(panel.timestamps[r])) + ","
                         + ",".join(repr(float(v)) for v in bs.values[r]) + "\n")
    else:
        raise ConfigError(
            "analyze.what must be one of periodogram, profiles, design, basis")
    print(f"wrote {out}")
    return 0


def cmd_fit(cfg: dict, args) -> int:
    panel = _read_panel(args.panel, cfg)
    if panel.has_missing():
        panel = fill_gaps_linear(panel)
    model = fit_joint_model(panel, model_config_from(cfg))
    out = os.path.join(cfg["output_dir"], "model.txt")
    save_model(model, out)
    nz = sum(len(v) for v in model.terms.values())
    print(f"wrote {out}: {nz} nonzero coefficients across "
          f"{len(model.terms)} equations")
    return 0


def cmd_forecast(cfg: dict, args) -> int:
    if not args.model or not os.path.exists(args.model):
        raise FileNotFoundError(f"model file {args.model!r} not found")
    model = load_model(args.model)
    panel = _read_panel(args.panel, cfg)
    if panel.has_missing():
        panel = fill_gaps_linear(panel)
    fcfg = cfg["forecast"]
    origin = int(fcfg["origin"])
    if origin < 0:
        origin = panel.n + origin
    fore = Forecaster(model, panel)
    if fcfg["bootstrap"]:
        result = fore.bootstrap(origin, int(fcfg["horizon"]),
                                int(fcfg["n_paths"]), int(cfg["seed"]))
    else:
        result = fore.point(origin, int(fcfg["horizon"]))
    out = os.path.join(cfg["output_dir"], "forecast.csv")
    _write_forecast_csv(result, out)
    print(f"wrote {out}")
    return 0


def cmd_backtest(cfg: dict, args) -> int:
    panel = _read_panel(args.panel, cfg)
    if panel.has_missing():
        panel = fill_gaps_linear(panel)
    b = cfg["backtest"]
    spec = BacktestSpec(
        n_origins=int(b["n_origins"]),
        horizons=tuple(range(1, int(b["max_horizon"]) + 1)),
        in_sample=int(b["in_sample"]),
        seed=int(cfg["seed"]),
        models=tuple(str(m) for m in b["models"]),
    )
    report = run_backtest(panel, spec, lasso_config=model_config_from(cfg),
                          workers=int(cfg["workers"]))
    files = write_report(report, cfg["output_dir"])
    print("wrote " + ", ".join(files))
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parkcast",
        description="Joint wind speed/power forecasting toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="YAML config file")
        p.add_argument("--out-dir", default=None, help="override output_dir")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--panel", default=None, help="panel CSV path")
        if name == "ingest":
            p.add_argument("--input", default=None, help="raw input CSV")
        if name == "analyze":
            p.add_argument("--what", default=None,
                           choices=["periodogram", "profiles", "design", "basis"])
        if name == "forecast":
            p.add_argument("--model", required=True, help="serialized model file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out_dir is not None:
            cfg["output_dir"] = args.out_dir
        if args.seed is not None:
            cfg["seed"] = int(args.seed)
        if args.workers is not None:
            cfg["workers"] = int(args.workers)
        write_effective_config(cfg, cfg["output_dir"])
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: missing-file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except PanelError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - single exit point
        print(f"error: runtime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
