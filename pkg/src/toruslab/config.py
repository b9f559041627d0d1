"""Experiment configuration: one JSON document, validated with field paths.

A config names a map, a test-function family, a sample grid, a target
measure, and the pipelines to run (basin sweep, entropy pipeline, Lyapunov
data).  Records echo the config and its hash so every reported number is
traceable to its inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from toruslab.basin import SampleGrid
from toruslab.dynamics import HyperbolicToralMap, torus_distance
from toruslab.markov import OrbitSource
from toruslab.weakstar import (DEFAULT_TRUNCATION, LEBESGUE, DiscreteMeasure,
                               TestFunctionFamily)

PERIODIC_TOL = 1e-9


class ConfigInvalid(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


def config_hash(raw: dict) -> str:
    """Content hash of the canonical JSON form."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class TargetSpec:
    kind: str
    point: tuple | None = None
    period: int | None = None
    length: int | None = None
    components: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def h_exact(self) -> float | None:
        """Entropy known without estimation: point masses carry none."""
        if self.kind in ("dirac", "periodic"):
            return 0.0
        return None


@dataclass
class ExperimentConfig:
    label: str
    raw: dict
    map: HyperbolicToralMap
    family: TestFunctionFamily
    grid: SampleGrid
    target: TargetSpec
    basin: dict | None
    entropy: dict | None
    lyapunov: dict
    expect: dict
    output_dir: str
    threads: int | None
    verify_grid: int

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigInvalid(f"{path}.{key}", "missing required field")
    return d[key]


def parse_target(spec: dict, map: HyperbolicToralMap, path: str = "target"
                 ) -> TargetSpec:
    kind = _require(spec, "kind", path)
    if kind == "lebesgue":
        return TargetSpec(kind="lebesgue")
    if kind == "dirac":
        pt = tuple(float(v) for v in _require(spec, "point", path))
        return TargetSpec(kind="dirac", point=pt)
    if kind == "periodic":
        pt = tuple(float(v) for v in _require(spec, "point", path))
        period = int(_require(spec, "period", path))
        if period < 1:
            raise ConfigInvalid(f"{path}.period", "must be >= 1")
        back = map.orbit(pt, period + 1)[-1]
        err = float(torus_distance(back, np.asarray(pt)))
        if err > PERIODIC_TOL:
            raise ConfigInvalid(
                f"{path}.point",
                f"not periodic with period {period}: returns {err:.2e} away")
        return TargetSpec(kind="periodic", point=pt, period=period)
    if kind == "empirical_orbit":
        pt = tuple(float(v) for v in _require(spec, "point", path))
        length = int(_require(spec, "length", path))
        if length < 1:
            raise ConfigInvalid(f"{path}.length", "must be >= 1")
        return TargetSpec(kind="empirical_orbit", point=pt, length=length)
    if kind == "mixture":
        comps = _require(spec, "components", path)
        weights = [float(w) for w in _require(spec, "weights", path)]
        if len(comps) != len(weights):
            raise ConfigInvalid(f"{path}.weights",
                                "one weight per component")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ConfigInvalid(f"{path}.weights",
                                f"must sum to 1, got {sum(weights)!r}")
        parsed = [parse_target(c, map, f"{path}.components[{i}]")
                  for i, c in enumerate(comps)]
        if any(p.kind == "mixture" for p in parsed):
            raise ConfigInvalid(f"{path}.components",
                                "nested mixtures are not supported")
        return TargetSpec(kind="mixture", components=parsed, weights=weights)
    raise ConfigInvalid(f"{path}.kind", f"unknown target kind {kind!r}")


def target_measure(target: TargetSpec, map: HyperbolicToralMap):
    """Materialize the measure object (mixtures stay as component lists)."""
    if target.kind == "lebesgue":
        return LEBESGUE
    if target.kind == "dirac":
        return DiscreteMeasure.dirac(target.point)
    if target.kind == "periodic":
        return DiscreteMeasure(map.orbit(target.point, target.period))
    if target.kind == "empirical_orbit":
        return DiscreteMeasure(map.orbit(target.point, target.length))
    if target.kind == "mixture":
        return [target_measure(c, map) for c in target.components]
    raise ValueError(target.kind)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigInvalid("$", "config must be a JSON object")
    label = str(raw.get("label", "experiment"))

    mspec = _require(raw, "map", "$")
    try:
        map = HyperbolicToralMap(
            _require(mspec, "matrix", "map"),
            amplitude=float(mspec.get("amplitude", 0.0)),
            perturbation=[(t["coeff"], t["freq"])
                          for t in mspec.get("perturbation", [])],
        )
    except ValueError as exc:
        raise ConfigInvalid("map", str(exc)) from exc

    fam_spec = raw.get("family", {})
    try:
        family = TestFunctionFamily(int(fam_spec.get("truncation",
                                                     DEFAULT_TRUNCATION)))
    except ValueError as exc:
        raise ConfigInvalid("family.truncation", str(exc)) from exc

    gspec = raw.get("grid", {})
    try:
        grid = SampleGrid(resolution=int(gspec.get("resolution", 256)),
                          jitter=bool(gspec.get("jitter", False)),
                          seed=int(gspec.get("seed", 0)))
    except ValueError as exc:
        raise ConfigInvalid("grid", str(exc)) from exc

    target = parse_target(_require(raw, "target", "$"), map)

    basin = raw.get("basin")
    if basin is not None:
        eps = [float(e) for e in _require(basin, "epsilons", "basin")]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigInvalid("basin.epsilons",
                                "must be strictly decreasing")
        ns = [int(n) for n in _require(basin, "n_values", "basin")]
        if any(b <= a for a, b in zip(ns, ns[1:])) or not ns or ns[0] < 1:
            raise ConfigInvalid("basin.n_values",
                                "must be strictly increasing and >= 1")
        win = basin.get("window", [ns[0], ns[-1]])
        if len(win) != 2 or win[0] > win[1]:
            raise ConfigInvalid("basin.window", "must be [n_min, n_max]")
        basin = {
            "epsilons": eps,
            "n_values": ns,
            "window": (int(win[0]), int(win[1])),
            "min_hits": int(basin.get("min_hits", 30)),
            "verdict_tol": float(basin.get("verdict_tol", 0.01)),
        }

    entropy = raw.get("entropy")
    if entropy is not None:
        src = _require(entropy, "source", "entropy")
        kind = _require(src, "kind", "entropy.source")
        if kind == "orbit":
            source = OrbitSource(
                point=tuple(float(v) for v in _require(src, "point",
                                                       "entropy.source")),
                length=int(_require(src, "length", "entropy.source")))
        elif kind == "grid":
            source = SampleGrid(resolution=int(src.get("resolution", 256)),
                                jitter=bool(src.get("jitter", False)),
                                seed=int(src.get("seed", 0)))
        elif kind == "target_atoms":
            if target.kind not in ("dirac", "periodic", "empirical_orbit"):
                raise ConfigInvalid("entropy.source",
                                    "target_atoms needs an atomic target")
            source = "target_atoms"
        else:
            raise ConfigInvalid("entropy.source.kind",
                                f"unknown source kind {kind!r}")
        depths = [int(d) for d in entropy.get("depths", list(range(1, 13)))]
        if min(depths) < 1:
            raise ConfigInvalid("entropy.depths", "must be >= 1")
        entropy = {
            "source": source,
            "depths": sorted(set(depths)),
            "count_depths": [int(d) for d in entropy.get(
                "count_depths", list(range(1, 15)))],
            "bound_check": entropy.get("bound_check"),
        }
        bc = entropy["bound_check"]
        if bc is not None:
            e = float(_require(bc, "epsilon", "entropy.bound_check"))
            if not 0 < e < 0.25:
                raise ConfigInvalid("entropy.bound_check.epsilon",
                                    "must be in (0, 1/4)")
            entropy["bound_check"] = {
                "epsilon": e,
                "depth": int(_require(bc, "depth", "entropy.bound_check")),
                "tolerance": float(bc.get("tolerance", 0.05)),
            }

    lyap = raw.get("lyapunov", {})
    lyapunov = {
        "warmup": int(lyap.get("warmup", 60)),
        "quad_grid": int(lyap.get("quad_grid", 512)),
        "qr_steps": int(lyap.get("qr_steps", 10000)),
        "qr_point": tuple(float(v) for v in lyap.get("qr_point",
                                                     (0.2, 0.7))),
        "enabled": bool(lyap) or basin is not None,
    }

    threads = raw.get("threads")
    return ExperimentConfig(
        label=label,
        raw=raw,
        map=map,
        family=family,
        grid=grid,
        target=target,
        basin=basin,
        entropy=entropy,
        lyapunov=lyapunov,
        expect=raw.get("expect", {}),
        output_dir=str(raw.get("output_dir", "records")),
        threads=int(threads) if threads is not None else None,
        verify_grid=int(raw.get("verify_grid", 64)),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid("$", f"invalid JSON: {exc}") from exc
    return parse_config(raw)


def moment_vector_for_target(target: TargetSpec, map: HyperbolicToralMap,
                             family: TestFunctionFamily):
    from toruslab.weakstar import moments
    if target.kind == "mixture":
        parts = [moment_vector_for_target(c, map, family).values
                 for c in target.components]
        vals = np.zeros(family.truncation)
        for w, v in zip(target.weights, parts):
            vals += w * v
        from toruslab.weakstar import MomentVector
        return MomentVector(values=vals, truncation=family.truncation,
                            version=family.version)
    return moments(target_measure(target, map), family)
