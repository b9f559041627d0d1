"""Experiment runner: executes the configured pipelines and persists records.

A run produces one JSON record plus CSV sidecars (curves and rates).  Stages
are isolated: a failure inside one stage is recorded under its name and the
remaining stages still run.  Identical configs reproduce identical integer
counts for any thread count.
"""

from __future__ import annotations

import csv
import datetime
import json
import os
import platform
import sys
from dataclasses import asdict

import numpy as np

from toruslab import basin as basin_mod
from toruslab import lyapunov as lyap_mod
from toruslab import markov as markov_mod
from toruslab.basin import Verdict, default_threads
from toruslab.config import (ExperimentConfig, TargetSpec, config_hash,
                             moment_vector_for_target, target_measure)
from toruslab.dynamics import NotHyperbolic, verify_hyperbolicity
from toruslab.weakstar import LEBESGUE, DiscreteMeasure


class MissingRecord(FileNotFoundError):
    pass


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).replace(
        microsecond=0).isoformat()


def environment_stamp(threads: int) -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
        "threads": threads,
    }


def _unstable_integral_for_target(target: TargetSpec, cfg: ExperimentConfig
                                  ) -> float:
    warm = cfg.lyapunov["warmup"]
    quad = cfg.lyapunov["quad_grid"]
    if target.kind == "mixture":
        return float(sum(
            w * _unstable_integral_for_target(c, cfg)
            for c, w in zip(target.components, target.weights)))
    measure = target_measure(target, cfg.map)
    return lyap_mod.unstable_integral(cfg.map, measure, warmup_n=warm,
                                      grid_resolution=quad)


def run(cfg: ExperimentConfig, threads: int | None = None) -> dict:
    """Execute all configured stages; returns the record (also written to
    disk under cfg.output_dir)."""
    nthreads = threads if threads is not None else (
        cfg.threads if cfg.threads is not None else default_threads())
    record: dict = {
        "schema": "toruslab-record-v1",
        "label": cfg.label,
        "config": cfg.raw,
        "config_hash": cfg.hash,
        "created_utc": _utc_now(),
        "family": {"truncation": cfg.family.truncation,
                   "version": cfg.family.version},
        "env": environment_stamp(nthreads),
        "stages": {},
        "warnings": [],
    }
    stages = record["stages"]

    # map verification gates everything else
    try:
        rep = verify_hyperbolicity(cfg.map, cfg.verify_grid)
        stages["verify_map"] = asdict(rep)
        if not rep.passed:
            record["warnings"].append("cone report did not pass")
    except NotHyperbolic as exc:
        stages["verify_map"] = {"error": str(exc)}
        record["warnings"].append("map failed hyperbolicity verification; "
                                  "dependent stages skipped")
        _persist(record, cfg)
        return record

    target_mv = moment_vector_for_target(cfg.target, cfg.map, cfg.family)
    h_exact = cfg.target.h_exact()

    if cfg.basin is not None:
        try:
            stages["basin"] = _run_basin(cfg, target_mv, nthreads)
        except Exception as exc:  # recorded, remaining stages still run
            stages["basin"] = {"error": f"{type(exc).__name__}: {exc}"}

    if cfg.entropy is not None:
        try:
            stages["entropy"] = _run_entropy(cfg)
        except Exception as exc:
            stages["entropy"] = {"error": f"{type(exc).__name__}: {exc}"}

    if cfg.lyapunov.get("enabled"):
        try:
            stages["lyapunov"] = _run_lyapunov(cfg)
        except Exception as exc:
            stages["lyapunov"] = {"error": f"{type(exc).__name__}: {exc}"}

    # rate identity residuals when the pieces are available
    try:
        stages["residuals"] = _run_residuals(cfg, stages, h_exact)
    except Exception as exc:
        stages["residuals"] = {"error": f"{type(exc).__name__}: {exc}"}

    _persist(record, cfg)
    return record


def _run_basin(cfg: ExperimentConfig, target_mv, nthreads: int) -> dict:
    b = cfg.basin
    sweep = basin_mod.epsilon_sweep(
        cfg.map, target_mv, b["epsilons"], b["n_values"], cfg.grid,
        cfg.family, b["window"], b["min_hits"], threads=nthreads)
    out = {
        "samples": cfg.grid.size,
        "curves": [
            {
                "epsilon": c.epsilon,
                "rows": [
                    [int(n), int(h), int(c.samples), _logf(h, c.samples)]
                    for n, h in zip(c.ns, c.hits)
                ],
            }
            for c in sweep.curves
        ],
        "rates": [
            {
                "epsilon": e.epsilon, "slope": e.slope, "stderr": e.stderr,
                "window": list(e.window), "rows_used": e.rows_used,
                "censored": e.censored, "min_hits": e.min_hits,
            }
            for e in sweep.estimates
        ],
        "rate_errors": {str(k): v for k, v in sweep.errors.items()},
    }
    if sweep.estimates:
        verdict = basin_mod.weak_pseudo_physical_verdict(
            sweep.estimates, b["verdict_tol"])
        out["verdict"] = verdict.value
        out["verdict_tol"] = b["verdict_tol"]
        out["final_slope"] = sweep.estimates[-1].slope
        trend = [e.slope for e in sweep.estimates]
        out["slope_trend"] = trend
    else:
        out["verdict"] = None
    return out


def _entropy_source(cfg: ExperimentConfig):
    src = cfg.entropy["source"]
    if src == "target_atoms":
        return target_measure(cfg.target, cfg.map)
    return src


def _run_entropy(cfg: ExperimentConfig) -> dict:
    part = markov_mod.cat_map_partition()
    if not np.array_equal(cfg.map.matrix, np.array(markov_mod.CAT_MATRIX)):
        raise ValueError("the Markov partition is built for the cat matrix "
                         "[[2,1],[1,1]]")
    source = _entropy_source(cfg)
    est = markov_mod.entropy_rate_estimate(cfg.map, part, source,
                                           cfg.entropy["depths"])
    rates = markov_mod.cylinder_count_rate(part, cfg.entropy["count_depths"])
    out = {
        "h_est": est.h_est,
        "depth_used": est.depth_used,
        "sequence": [
            {"depth": d, "h_over_n": h, "observed": obs, "adequate": ok}
            for d, h, obs, ok in est.sequence
        ],
        "count_rates": [{"depth": n, "rate": r} for n, r in rates.rates],
        "k0_est": rates.k0_est,
        "word_counts": rates.counts,
        "partition": {"k": part.k, "max_diameter": part.max_diameter,
                      "expansion": part.expansion},
        "non_exact_partition": not cfg.map.is_linear,
    }
    bc = cfg.entropy.get("bound_check")
    if bc:
        margin = markov_mod.entropy_count_bound_check(
            cfg.map, part, source, bc["epsilon"], bc["depth"])
        out["bound_check"] = {**bc, "margin": margin,
                              "ok": margin >= -bc["tolerance"]}
    return out


def _run_lyapunov(cfg: ExperimentConfig) -> dict:
    ly = cfg.lyapunov
    spec = lyap_mod.lyapunov_spectrum_qr(cfg.map, ly["qr_point"],
                                         ly["qr_steps"])
    integral = _unstable_integral_for_target(cfg.target, cfg)
    return {
        "chi_plus": spec.chi_plus,
        "chi_minus": spec.chi_minus,
        "qr_steps": spec.n_steps,
        "unstable_integral_target": integral,
        "warmup": ly["warmup"],
        "quad_grid": ly["quad_grid"],
    }


def _run_residuals(cfg: ExperimentConfig, stages: dict,
                   h_exact: float | None) -> dict:
    out: dict = {}
    basin_st = stages.get("basin") or {}
    lyap_st = stages.get("lyapunov") or {}
    entropy_st = stages.get("entropy") or {}
    a_est = basin_st.get("final_slope")
    integral = lyap_st.get("unstable_integral_target")
    if h_exact is not None:
        h_est, h_src = h_exact, "point_mass_exact"
    elif "h_est" in entropy_st:
        h_est, h_src = entropy_st["h_est"], "cylinder_pipeline"
    else:
        h_est, h_src = None, None
    if h_est is not None and integral is not None:
        out["pesin_defect"] = basin_mod.pesin_defect(h_est, integral)
        out["h_est"] = h_est
        out["h_est_source"] = h_src
        out["unstable_integral"] = integral
    if a_est is not None and h_est is not None and integral is not None:
        out["rate_residual"] = basin_mod.rate_residual(a_est, h_est, integral)
        out["a_est"] = a_est
    return out


def _logf(hits: int, samples: int) -> float:
    if hits == 0:
        return float("-inf")
    import math
    return math.log(hits / samples)


# -- persistence and reporting ------------------------------------------------

def record_path(cfg_label: str, outdir: str) -> str:
    return os.path.join(outdir, f"{cfg_label}.json")


def _persist(record: dict, cfg: ExperimentConfig) -> None:
    outdir = cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    path = record_path(cfg.label, outdir)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, allow_nan=True)
        fh.write("\n")
    record["record_path"] = path
    basin_st = record["stages"].get("basin")
    if basin_st and "curves" in basin_st:
        _write_curves_csv(os.path.join(outdir, f"{cfg.label}_curves.csv"),
                          basin_st["curves"])
        _write_rates_csv(os.path.join(outdir, f"{cfg.label}_rates.csv"),
                         basin_st.get("rates", []))


def _write_curves_csv(path: str, curves: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "n", "hits", "samples", "log_fraction"])
        for c in curves:
            for n, hits, samples, logf in c["rows"]:
                w.writerow([c["epsilon"], n, hits, samples, repr(logf)])


def _write_rates_csv(path: str, rates: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "slope", "stderr", "n_min", "n_max",
                    "rows_used", "min_hits"])
        for r in rates:
            w.writerow([r["epsilon"], repr(r["slope"]), repr(r["stderr"]),
                        r["window"][0], r["window"][1], r["rows_used"],
                        r["min_hits"]])


def load_record(path: str) -> dict:
    if not os.path.exists(path):
        raise MissingRecord(path)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def report(record_paths: list[str], fmt: str, outdir: str) -> list[str]:
    """Merge records into report files.

    Distance-dependent tables (basin curves and rates) are only merged for
    records sharing the test-function family; mixed families are written
    separately with a warning row in the manifest.
    """
    records = [load_record(p) for p in record_paths]
    os.makedirs(outdir, exist_ok=True)
    written: list[str] = []
    if fmt == "json":
        path = os.path.join(outdir, "report.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(records, fh, indent=2, allow_nan=True)
        return [path]

    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        key = (rec["family"]["truncation"], rec["family"]["version"])
        groups.setdefault(key, []).append(rec)
    multiple = len(groups) > 1
    if multiple:
        manifest = os.path.join(outdir, "report_warnings.txt")
        with open(manifest, "w", encoding="utf-8") as fh:
            fh.write("records use different test families; distance tables "
                     "were not merged across families\n")
            for key, recs in groups.items():
                fh.write(f"family K={key[0]} {key[1]}: "
                         + ", ".join(r["label"] for r in recs) + "\n")
        written.append(manifest)

    for (k, _version), recs in groups.items():
        suffix = f"_K{k}" if multiple else ""
        if fmt == "csv":
            path = os.path.join(outdir, f"curves{suffix}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["label", "epsilon", "n", "hits", "samples",
                            "log_fraction"])
                for rec in recs:
                    st = rec["stages"].get("basin") or {}
                    for c in st.get("curves", []):
                        for n, hits, samples, logf in c["rows"]:
                            w.writerow([rec["label"], c["epsilon"], n, hits,
                                        samples, repr(logf)])
            written.append(path)
            path = os.path.join(outdir, f"rates{suffix}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["label", "epsilon", "slope", "stderr", "n_min",
                            "n_max", "rows_used"])
                for rec in recs:
                    st = rec["stages"].get("basin") or {}
                    for r in st.get("rates", []):
                        w.writerow([rec["label"], r["epsilon"],
                                    repr(r["slope"]), repr(r["stderr"]),
                                    r["window"][0], r["window"][1],
                                    r["rows_used"]])
            written.append(path)
        elif fmt == "plotdata":
            for rec in recs:
                st = rec["stages"].get("basin") or {}
                for c in st.get("curves", []):
                    path = os.path.join(
                        outdir,
                        f"{rec['label']}_eps{c['epsilon']}{suffix}_curve.csv")
                    with open(path, "w", newline="", encoding="utf-8") as fh:
                        w = csv.writer(fh)
                        w.writerow(["n", "log_fraction"])
                        for n, _h, _s, logf in c["rows"]:
                            w.writerow([n, repr(logf)])
                    written.append(path)
                if st.get("rates"):
                    path = os.path.join(outdir,
                                        f"{rec['label']}{suffix}_sweep.csv")
                    with open(path, "w", newline="", encoding="utf-8") as fh:
                        w = csv.writer(fh)
                        w.writerow(["epsilon", "slope", "stderr"])
                        for r in st["rates"]:
                            w.writerow([r["epsilon"], repr(r["slope"]),
                                        repr(r["stderr"])])
                    written.append(path)
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    return written


def check_expectations(record: dict, expect: dict) -> list[str]:
    """Compare a record against declared expectations; returns failures."""
    failures = []
    basin_st = record["stages"].get("basin") or {}
    res = record["stages"].get("residuals") or {}
    if "verdict" in expect:
        got = basin_st.get("verdict")
        if got != expect["verdict"]:
            failures.append(f"verdict {got!r} != expected {expect['verdict']!r}")
    if "max_abs_slope" in expect:
        for r in basin_st.get("rates", []):
            if abs(r["slope"]) > expect["max_abs_slope"]:
                failures.append(
                    f"|slope|={abs(r['slope']):.5f} at eps={r['epsilon']} "
                    f"exceeds {expect['max_abs_slope']}")
    if "max_abs_rate_residual" in expect:
        rr = res.get("rate_residual")
        if rr is None or abs(rr) > expect["max_abs_rate_residual"]:
            failures.append(f"rate residual {rr!r} exceeds "
                            f"{expect['max_abs_rate_residual']}")
    if "bound_margin_min" in expect:
        bc = (record["stages"].get("entropy") or {}).get("bound_check") or {}
        margin = bc.get("margin")
        if margin is None or margin < expect["bound_margin_min"]:
            failures.append(f"bound margin {margin!r} below "
                            f"{expect['bound_margin_min']}")
    return failures
