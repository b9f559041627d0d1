import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from toruslab.config import (ConfigInvalid, config_hash, load_config,
                             moment_vector_for_target, parse_config)
from toruslab.runner import check_expectations, report, run, MissingRecord


def minimal_config(tmpdir, **overrides):
    cfg = {
        "label": "mini",
        "map": {"matrix": [[2, 1], [1, 1]]},
        "family": {"truncation": 33},
        "grid": {"resolution": 64},
        "target": {"kind": "lebesgue"},
        "basin": {"epsilons": [0.2], "n_values": [10, 20, 30, 40, 50],
                  "window": [10, 50]},
        "output_dir": str(tmpdir),
    }
    cfg.update(overrides)
    return cfg


class TestConfigValidation:
    def test_identity_matrix_names_hyperbolicity(self, tmp_path):
        cfg = minimal_config(tmp_path, map={"matrix": [[1, 0], [0, 1]]})
        with pytest.raises(ConfigInvalid, match="hyperbolic"):
            parse_config(cfg)

    def test_increasing_epsilons_rejected(self, tmp_path):
        cfg = minimal_config(tmp_path)
        cfg["basin"]["epsilons"] = [0.1, 0.2]
        with pytest.raises(ConfigInvalid, match="decreasing"):
            parse_config(cfg)

    def test_mixture_weights_must_sum(self, tmp_path):
        cfg = minimal_config(tmp_path, target={
            "kind": "mixture",
            "components": [{"kind": "lebesgue"},
                           {"kind": "dirac", "point": [0, 0]}],
            "weights": [0.5, 0.4]})
        with pytest.raises(ConfigInvalid, match="sum to 1"):
            parse_config(cfg)

    def test_periodic_point_verified(self, tmp_path):
        cfg = minimal_config(tmp_path, target={
            "kind": "periodic", "point": [0.3, 0.3], "period": 2})
        with pytest.raises(ConfigInvalid, match="not periodic"):
            parse_config(cfg)
        good = minimal_config(tmp_path, target={
            "kind": "periodic", "point": [0.4, 0.8], "period": 2})
        parsed = parse_config(good)
        assert parsed.target.period == 2

    def test_hash_stable_and_sensitive(self, tmp_path):
        cfg = minimal_config(tmp_path)
        h1 = config_hash(cfg)
        h2 = config_hash(json.loads(json.dumps(cfg)))
        assert h1 == h2
        cfg["grid"]["resolution"] = 65
        assert config_hash(cfg) != h1

    def test_mixture_moments_affine(self, tmp_path):
        cfg = minimal_config(tmp_path, target={
            "kind": "mixture",
            "components": [{"kind": "lebesgue"},
                           {"kind": "dirac", "point": [0.0, 0.0]}],
            "weights": [0.25, 0.75]})
        parsed = parse_config(cfg)
        mv = moment_vector_for_target(parsed.target, parsed.map,
                                      parsed.family)
        from toruslab.weakstar import (LEBESGUE, DiscreteMeasure, moments)
        leb = moments(LEBESGUE, parsed.family).values
        dirac = moments(DiscreteMeasure.dirac((0.0, 0.0)),
                        parsed.family).values
        assert np.allclose(mv.values, 0.25 * leb + 0.75 * dirac)


@pytest.fixture(scope="module")
def record(tmp_path_factory):
    tmpdir = tmp_path_factory.mktemp("rec")
    cfg = parse_config(minimal_config(tmpdir))
    return run(cfg, threads=1), tmpdir


class TestRunner:

    def test_minimal_run_high_fraction(self, record):
        rec, _ = record
        rows = rec["stages"]["basin"]["curves"][0]["rows"]
        last = rows[-1]
        assert last[0] == 50
        assert last[1] / last[2] >= 0.9

    def test_verdict_and_rates_present(self, record):
        rec, _ = record
        st = rec["stages"]["basin"]
        assert st["verdict"] == "consistent_with_zero"
        assert len(st["rates"]) == 1

    def test_csv_sidecars(self, record):
        rec, tmpdir = record
        curves = os.path.join(str(tmpdir), "mini_curves.csv")
        rates = os.path.join(str(tmpdir), "mini_rates.csv")
        header = open(curves).readline().strip()
        assert header == "epsilon,n,hits,samples,log_fraction"
        assert open(rates).readline().startswith("epsilon,slope,stderr")

    def test_rerun_identical_counts(self, record):
        # same config, different thread count: identical counts and hash
        rec, _ = record
        cfg = parse_config(json.loads(json.dumps(rec["config"])))
        rec2 = run(cfg, threads=2)
        assert (rec2["stages"]["basin"]["curves"]
                == rec["stages"]["basin"]["curves"])
        assert rec2["config_hash"] == rec["config_hash"]

    def test_expectations(self, record):
        rec, _ = record
        assert check_expectations(rec, {"verdict": "consistent_with_zero"}) == []
        fails = check_expectations(rec, {"verdict": "negative_rate"})
        assert fails and "verdict" in fails[0]

    def test_dirac_residual_pipeline(self, tmp_path):
        cfg = parse_config(minimal_config(
            tmp_path, label="dirac-mini",
            target={"kind": "dirac", "point": [0.0, 0.0]},
            basin={"epsilons": [0.2, 0.1], "n_values": list(range(4, 11)),
                   "window": [4, 10], "min_hits": 5},
            grid={"resolution": 128}))
        rec = run(cfg, threads=1)
        res = rec["stages"]["residuals"]
        assert res["h_est"] == 0.0
        assert res["h_est_source"] == "point_mass_exact"
        assert abs(res["unstable_integral"]
                   - math.log((3 + math.sqrt(5)) / 2)) < 1e-9
        assert "rate_residual" in res

    def test_entropy_stage_with_bound_check(self, tmp_path):
        cfg = parse_config(minimal_config(
            tmp_path, label="ent-mini",
            entropy={"source": {"kind": "orbit",
                                "point": [0.2137214321, 0.5721347123],
                                "length": 200000},
                     "depths": list(range(1, 9)),
                     "count_depths": list(range(1, 15)),
                     "bound_check": {"epsilon": 0.1, "depth": 6,
                                     "tolerance": 0.05}}))
        rec = run(cfg, threads=1)
        ent = rec["stages"]["entropy"]
        assert ent["non_exact_partition"] is False
        assert ent["bound_check"]["ok"]
        assert abs(dict((r["depth"], r["rate"])
                        for r in ent["count_rates"])[14]
                   - 0.9624236501192069) <= 0.09624236501192069


class TestReport:
    def _two_records(self, tmpdir):
        recs = []
        for label, k in (("a", 33), ("b", 17)):
            cfg = parse_config(minimal_config(
                tmpdir, label=label, family={"truncation": k},
                basin={"epsilons": [0.3], "n_values": [5, 10, 15, 20],
                       "window": [5, 20]},
                grid={"resolution": 32}))
            rec = run(cfg, threads=1)
            recs.append(rec["record_path"])
        return recs

    def test_csv_merge_same_family(self, tmp_path):
        cfg = parse_config(minimal_config(tmp_path, label="one"))
        rec = run(cfg, threads=1)
        out = report([rec["record_path"]], "csv", str(tmp_path / "rep"))
        assert any(p.endswith("curves.csv") for p in out)

    def test_family_mismatch_not_merged(self, tmp_path):
        paths = self._two_records(tmp_path)
        out = report(paths, "csv", str(tmp_path / "rep"))
        names = [os.path.basename(p) for p in out]
        assert "report_warnings.txt" in names
        assert any("curves_K33" in n for n in names)
        assert any("curves_K17" in n for n in names)

    def test_plotdata_columns(self, tmp_path):
        cfg = parse_config(minimal_config(tmp_path, label="pd"))
        rec = run(cfg, threads=1)
        out = report([rec["record_path"]], "plotdata", str(tmp_path / "rep"))
        curve = [p for p in out if p.endswith("curve.csv")][0]
        assert open(curve).readline().strip() == "n,log_fraction"
        sweep = [p for p in out if p.endswith("sweep.csv")][0]
        assert open(sweep).readline().strip() == "epsilon,slope,stderr"

    def test_missing_record(self, tmp_path):
        with pytest.raises(MissingRecord):
            report([str(tmp_path / "nope.json")], "csv", str(tmp_path))


class TestCli:
    def _run(self, *args, env=None):
        e = dict(os.environ)
        if env:
            e.update(env)
        return subprocess.run([sys.executable, "-m", "toruslab.cli", *args],
                              capture_output=True, text=True, env=e)

    def test_run_and_exit_codes(self, tmp_path):
        cfg = minimal_config(tmp_path, expect={"verdict":
                                               "consistent_with_zero"})
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        r = self._run("run", str(path))
        assert r.returncode == 0, r.stderr
        cfg["expect"] = {"verdict": "negative_rate"}
        path.write_text(json.dumps(cfg))
        assert self._run("run", str(path)).returncode == 2

    def test_invalid_config_exit_1(self, tmp_path):
        cfg = minimal_config(tmp_path, map={"matrix": [[1, 0], [0, 1]]})
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg))
        r = self._run("run", str(path))
        assert r.returncode == 1
        assert "hyperbolic" in r.stderr

    def test_verify_map(self, tmp_path):
        cfg = minimal_config(tmp_path)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        r = self._run("verify-map", str(path))
        assert r.returncode == 0
        out = json.loads(r.stdout)
        assert out["passed"] is True

    def test_threads_env_var(self, tmp_path):
        cfg = minimal_config(tmp_path, label="envthreads")
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        r = self._run("run", str(path), env={"TORUSLAB_THREADS": "2"})
        assert r.returncode == 0
        rec = json.load(open(tmp_path / "envthreads.json"))
        assert rec["env"]["threads"] == 2
