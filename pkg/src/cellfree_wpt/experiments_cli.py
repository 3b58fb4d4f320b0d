"""Experiment harness and command line entry point.

Sweeps random network setups through the channel -> estimation -> power
optimization -> SE pipeline and writes flat CSV tables. Each setup is
reproducible from (seed, setup index) alone, so runs that share a seed see
identical channel statistics and comparisons between runs are paired.
Plotting stays outside the package; every output is a plain table with a
stable header.
"""

import argparse
import csv
import dataclasses
import json
import multiprocessing
import os
import sys

import numpy as np

from .channel import NetworkConfig, generate_geometry, large_scale_stats
from .energy import (ap_tx_power, eh_model_presets, input_power_coefficients,
                     precoder_norms)
from .estimation import assign_pilots, estimator_statistics
from .maxmin_optimizer import algorithm1, fpc_baseline
from .spectral_efficiency import se_coefficients


def dbm_to_watt(dbm):
    return 10.0 ** ((float(dbm) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(watt) + 30.0


SCHEMES = {"c": "coherent", "nc": "noncoherent",
           "coherent": "coherent", "noncoherent": "noncoherent"}
ESTIMATORS = ("lmmse", "ls")
EH_MODELS = {"m1": "M1", "m2": "M2", "l": "L"}
POWER_MODES = ("mmf", "fpc")

# full-scale system; 500 setups of L=36 APs with N=8 antennas each.
# coherent max-min runs at this scale are very expensive (dense KKT systems
# over K lifted L x L power matrices); the non-coherent scheme is practical.
FULL_SCALE = {
    "setups": 500,
    "area_side": 100.0,
    "num_aps": 36,
    "antennas_per_ap": 8,
    "num_ues": 20,
    "tau_p": 5,
    "tau_d": 25,
    "tau_u": 170,
}

NETWORK_KEYS = tuple(f.name for f in dataclasses.fields(NetworkConfig))
DBM_KEYS = {"noise_dbm": "noise_power", "pilot_power_dbm": "pilot_power"}
RUN_KEYS = ("setups", "seed", "scheme", "estimator", "eh", "power", "jobs")


class ConfigError(ValueError):
    pass


def load_config(path):
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}")
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    return raw


def resolve_config(raw):
    """Split a flat config dict into (NetworkConfig, run settings).

    Raises ConfigError naming the offending field on any problem.
    """
    run = {"setups": 20, "seed": 0, "scheme": "noncoherent",
           "estimator": "lmmse", "eh": "M1", "power": "mmf", "jobs": 1}
    net = {}
    for key, value in raw.items():
        if key in DBM_KEYS:
            net[DBM_KEYS[key]] = dbm_to_watt(value)
        elif key in NETWORK_KEYS:
            net[key] = value
        elif key in RUN_KEYS:
            run[key] = value
        else:
            raise ConfigError(f"unknown config field '{key}'")

    for key in ("setups", "seed", "jobs"):
        try:
            run[key] = int(run[key])
        except (TypeError, ValueError):
            raise ConfigError(f"field '{key}' must be an integer")
    if run["setups"] < 1:
        raise ConfigError("field 'setups' must be >= 1")
    if run["jobs"] < 1:
        raise ConfigError("field 'jobs' must be >= 1")

    scheme = str(run["scheme"]).lower()
    if scheme not in SCHEMES:
        raise ConfigError("field 'scheme' must be one of c, nc")
    run["scheme"] = SCHEMES[scheme]
    estimator = str(run["estimator"]).lower()
    if estimator not in ESTIMATORS:
        raise ConfigError("field 'estimator' must be one of lmmse, ls")
    run["estimator"] = estimator
    eh = str(run["eh"]).lower()
    if eh not in EH_MODELS:
        raise ConfigError("field 'eh' must be one of m1, m2, l")
    run["eh"] = EH_MODELS[eh]
    power = str(run["power"]).lower()
    if power not in POWER_MODES:
        raise ConfigError("field 'power' must be one of mmf, fpc")
    run["power"] = power

    try:
        cfg = NetworkConfig(**net)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err))
    return cfg, run


def setup_artifacts(cfg, seed, setup_index, estimator):
    """Draw one random setup and precompute everything the optimizer needs.

    The RNG stream depends only on (seed, setup_index), never on the
    estimator or scheme, which is what keeps matrix cells paired.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, setup_index]))
    geometry = generate_geometry(cfg, rng)
    stats = large_scale_stats(geometry, cfg, rng)
    assignment = assign_pilots(cfg.num_ues, cfg.tau_p, rng)
    est = estimator_statistics(stats, assignment, cfg)
    coeffs = se_coefficients(stats, est, assignment, cfg, estimator)
    inputs = input_power_coefficients(stats, est, assignment, cfg, estimator)
    norms = precoder_norms(est, estimator)
    return coeffs, inputs, norms


def _run_setup(task):
    cfg, seed, setup_index, estimator, scheme, eh, power = task
    model = eh_model_presets()[eh]
    coeffs, inputs, norms = setup_artifacts(cfg, seed, setup_index, estimator)
    if power == "mmf":
        res = algorithm1(coeffs, inputs, norms, model, cfg, scheme=scheme)
    else:
        res = fpc_baseline(coeffs, inputs, norms, model, cfg, scheme=scheme)
    return {
        "setup": setup_index,
        "status": res.status,
        "se": [float(v) for v in res.se],
        "min_se": float(res.min_se),
        "t_star": float(res.t_star),
        "tmax": float(res.tmax),
        "solves": int(res.solves),
        "eta": [float(v) for v in res.eta],
        "per_ap": [float(v) for v in ap_tx_power(res.p, norms)],
        "log": [(s.solve_index, s.t_test, s.feasible, s.t_star,
                 s.t_lo, s.t_hi, s.reverted) for s in res.log],
    }


def collect_records(cfg, run):
    tasks = [(cfg, run["seed"], s, run["estimator"], run["scheme"],
              run["eh"], run["power"]) for s in range(run["setups"])]
    if run["jobs"] > 1:
        with multiprocessing.Pool(run["jobs"]) as pool:
            return pool.map(_run_setup, tasks)
    return [_run_setup(t) for t in tasks]


DEFAULT_QUANTILES = (0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95)


def emit_cdf(samples, grid=None):
    """Empirical CDF inverse at the requested quantile levels.

    Left-continuous order statistics, so constant samples give a flat table
    at that value. The 0.05 and 0.10 levels are the 95% and 90% likely ones.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("emit_cdf needs at least one sample")
    if grid is None:
        grid = DEFAULT_QUANTILES
    rows = []
    for q in grid:
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile {q} outside [0, 1]")
        rows.append((q, float(np.quantile(x, q, method="inverted_cdf"))))
    return rows


def build_tables(records):
    """Flatten per-setup records into named (header, rows) CSV tables."""
    se_rows, min_rows, down_rows, up_rows, conv_rows = [], [], [], [], []
    all_se = []
    for rec in records:
        s = rec["setup"]
        for k, v in enumerate(rec["se"]):
            se_rows.append((s, k, v))
            all_se.append(v)
        min_rows.append((s, rec["status"], rec["min_se"], rec["t_star"],
                         rec["tmax"], rec["solves"]))
        for l, v in enumerate(rec["per_ap"]):
            down_rows.append((s, l, v))
        for k, v in enumerate(rec["eta"]):
            up_rows.append((s, k, v))
        for row in rec["log"]:
            conv_rows.append((s,) + tuple(row))
    return {
        "se_per_ue": (("setup", "ue", "se_bit_per_hz"), se_rows),
        "min_se": (("setup", "status", "min_se_bit_per_hz", "t_star",
                    "t_max", "solves"), min_rows),
        "powers_downlink": (("setup", "ap", "power_watt"), down_rows),
        "powers_uplink": (("setup", "ue", "power_watt"), up_rows),
        "convergence": (("setup", "solve_index", "t_test", "feasible",
                         "t_star", "t_lo", "t_hi", "reverted"), conv_rows),
        "cdf_se": (("quantile", "se_bit_per_hz"), emit_cdf(all_se)),
    }


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_tables(tables, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for name, (header, rows) in tables.items():
        path = os.path.join(out_dir, name + ".csv")
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    return out_dir


def run_experiment(config, out_dir=None, jobs=None):
    """Run one cell of the experiment matrix, optionally writing its tables.

    config is a JSON file path or an already-loaded dict. Returns the table
    dict; with out_dir set the CSV files land there too.
    """
    raw = load_config(config) if isinstance(config, (str, os.PathLike)) \
        else dict(config)
    cfg, run = resolve_config(raw)
    if jobs is not None:
        run["jobs"] = int(jobs)
    records = collect_records(cfg, run)
    tables = build_tables(records)
    if out_dir is not None:
        write_tables(tables, out_dir)
    return tables


def compare_schemes(config, cells=None, jobs=None):
    """Run several matrix cells against the same random setups.

    cells is an iterable of (estimator, scheme, eh, power) tuples, default
    the full cross product. All cells consume the same per-setup seed
    stream, so any difference between two cells is a paired comparison.
    Returns {cell: record list}.
    """
    raw = load_config(config) if isinstance(config, (str, os.PathLike)) \
        else dict(config)
    cfg, run = resolve_config(raw)
    if jobs is not None:
        run["jobs"] = int(jobs)
    if cells is None:
        cells = [(e, s, m, p)
                 for e in ESTIMATORS
                 for s in ("coherent", "noncoherent")
                 for m in ("M1", "M2", "L")
                 for p in POWER_MODES]
    out = {}
    for cell in cells:
        estimator, scheme, eh, power = cell
        sub = dict(run, estimator=estimator, scheme=SCHEMES[scheme.lower()],
                   eh=EH_MODELS[eh.lower()], power=power)
        out[cell] = collect_records(cfg, sub)
    return out


def build_parser():
    p = argparse.ArgumentParser(
        prog="cellfree-wpt",
        description="Run wireless-powered cell-free MIMO experiments and "
                    "write CSV tables (SE per UE, min-SE, powers, "
                    "convergence, SE CDF).")
    p.add_argument("--config", metavar="PATH",
                   help="JSON config; keys are NetworkConfig fields, "
                        "noise_dbm/pilot_power_dbm, or run fields "
                        "(setups, seed, scheme, estimator, eh, power, jobs)")
    p.add_argument("--out", metavar="DIR", default="results",
                   help="output directory for the CSV tables")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--setups", type=int,
                   help="number of random setups (default 20, full 500)")
    p.add_argument("--scheme", choices=["c", "nc"],
                   help="energy transmission: c=coherent, nc=non-coherent")
    p.add_argument("--estimator", choices=["lmmse", "ls"])
    p.add_argument("--eh", choices=["m1", "m2", "l"],
                   help="energy harvesting model preset")
    p.add_argument("--power", choices=["mmf", "fpc"],
                   help="max-min fairness optimization or the fractional "
                        "power control baseline")
    p.add_argument("--jobs", type=int,
                   help="worker processes; results are reduced in setup "
                        "order either way (default 1)")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk", action="store_true",
                       help="small 9-AP/4-UE system, 20 setups (default)")
    scale.add_argument("--full", action="store_true",
                       help="full-scale 36-AP/20-UE system, 500 setups; "
                            "coherent max-min runs are very slow here")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    raw = {}
    if args.full:
        raw.update(FULL_SCALE)
    if args.config:
        try:
            raw.update(load_config(args.config))
        except (ConfigError, OSError) as err:
            parser.error(str(err))
    for key in ("seed", "setups", "jobs", "scheme", "estimator", "eh",
                "power"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    try:
        cfg, run = resolve_config(raw)
    except ConfigError as err:
        parser.error(str(err))

    records = collect_records(cfg, run)
    tables = build_tables(records)
    write_tables(tables, args.out)

    min_se = np.array([r["min_se"] for r in records])
    solves = sum(r["solves"] for r in records)
    print(f"{run['estimator']}/{run['scheme']}/{run['eh']}/{run['power']}: "
          f"{len(records)} setups, median min-SE {np.median(min_se):.4f} "
          f"bit/s/Hz, {solves} subproblem solves")
    print(f"tables written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
