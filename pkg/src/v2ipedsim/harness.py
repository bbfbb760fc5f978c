"""Experiment orchestration: config ingestion, batch runs, and persistence.

Outputs per run directory:
    manifest.json            written once, before any episode output
    records_<mode>.jsonl     one EpisodeRecord per line, episode-index order
    report_<mode>.json       full SafetyReport
    report.csv               one row per mode, fixed column order
    COMPLETE                 written last; its absence marks an aborted run

A run is a pure function of its config: records and reports are byte-stable
across repeats and worker counts.
"""
from __future__ import annotations

import concurrent.futures
import copy
import dataclasses
import datetime
import json
import math
import os
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import __version__
from .safety import SafetyParams, SafetyReport, aggregate, injury_probability
from .stochastic import (
    KEY_SCENE,
    MODE_IDS,
    DemographicsTable,
    ExponentialModel,
    LogNormalModel,
    derive_seed,
    make_stream,
    sample_initial_scene,
)
from .world import (
    BehaviorParams,
    ConfigError as ScenarioError,
    EpisodeRecord,
    ScenarioConfig,
    SCENARIO_TUNING,
    builtin_scenario,
    run_episode,
)
from .perception import SensorRig, SensorSpec
from .geometry import intrinsics_from_spec

ENV_OUT_DIR = "V2IPEDSIM_OUT_DIR"
MODES = ("single_vehicle", "v2i")


class ConfigError(ValueError):
    """Raised for unparseable or invalid experiment configs."""


DEFAULT_CONFIG: dict = {
    "scenario": "jaywalking",
    "modes": list(MODES),
    "episodes": 1000,
    "master_seed": 0,
    "out_dir": None,
    "workers": 1,
    "dt": 0.05,
    "max_frames": 600,
    "distributions": {
        "headway_lambda": 0.1742,
        "midblock_speed_mu": 1.8304,
        "midblock_speed_sigma": 0.4857,
        "intersection_speed_mu": 1.5853,
        "intersection_speed_sigma": 0.3827,
    },
    "demographics": None,
    "sensors": {
        "onboard": None,
        "roadside": None,
    },
    "behavior": {
        "a_brake": 6.0,
        "a_accel": 2.0,
        "awareness_radius": 15.0,
        "pass_first_multiplier": 1.5,
        "yield_back_max_s": 2.0,
        "corridor_halfwidth": 1.5,
        "conflict_horizon_s": 5.0,
    },
    "safety": {
        "horizon": 5.0,
        "combined_radius": 1.2,
        "time_threshold": 1.5,
        "speed_threshold": 1.0,
        "proximity_gate": 3.0,
        "injury_speed_unit": "kmh",
    },
    "scenario_overrides": {
        "trigger_range": None,
        "ego_start_range": None,
        "speed_limit": None,
    },
}

_SENSOR_KEYS = {
    "width", "height", "fov_deg", "max_range", "tau_vis",
    "blend_delta", "blend_detect_prob", "depth_noise",
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated, default-filled experiment description."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    @property
    def out_dir(self) -> Path:
        env = os.environ.get(ENV_OUT_DIR)
        if env:
            return Path(env)
        base = self.data["out_dir"] or f"runs/{self.data['scenario']}"
        return Path(base)


def _reject_unknown(given: Mapping, allowed: set, path: str):
    for key in given:
        if key not in allowed:
            raise ConfigError(f"unknown config key {path}{key!r}")


def validate_config(raw: Mapping) -> ExperimentConfig:
    """Fill defaults and validate; unknown keys anywhere are errors."""
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, set(DEFAULT_CONFIG), "")
    cfg = copy.deepcopy(DEFAULT_CONFIG)

    for key in ("scenario", "modes", "episodes", "master_seed", "out_dir", "workers", "dt", "max_frames"):
        if key in raw:
            cfg[key] = copy.deepcopy(raw[key])
    for section in ("distributions", "behavior", "safety", "scenario_overrides", "sensors"):
        if section in raw:
            block = raw[section]
            if not isinstance(block, Mapping):
                raise ConfigError(f"config field {section!r} must be an object")
            _reject_unknown(block, set(cfg[section]), f"{section}.")
            for k, v in block.items():
                cfg[section][k] = copy.deepcopy(v)
    if "demographics" in raw and raw["demographics"] is not None:
        demo = raw["demographics"]
        if not isinstance(demo, Mapping):
            raise ConfigError("config field 'demographics' must be an object")
        _reject_unknown(demo, {"weights", "group_speeds", "speed_sd", "min_speed"}, "demographics.")
        try:
            DemographicsTable.from_dict(demo)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid demographics: {exc}") from exc
        cfg["demographics"] = copy.deepcopy(dict(demo))

    if cfg["scenario"] not in SCENARIO_TUNING:
        raise ConfigError(
            f"config field 'scenario': unknown scenario {cfg['scenario']!r}"
        )
    if not isinstance(cfg["episodes"], int) or cfg["episodes"] < 1:
        raise ConfigError("config field 'episodes' must be an integer >= 1")
    if not isinstance(cfg["master_seed"], int):
        raise ConfigError("config field 'master_seed' must be an integer")
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("config field 'workers' must be an integer >= 1")
    modes = cfg["modes"]
    if not isinstance(modes, list) or not modes or any(m not in MODES for m in modes):
        raise ConfigError(f"config field 'modes' must be a nonempty subset of {list(MODES)}")
    if len(set(modes)) != len(modes):
        raise ConfigError("config field 'modes' has duplicates")
    if not (isinstance(cfg["dt"], (int, float)) and cfg["dt"] > 0):
        raise ConfigError("config field 'dt' must be a positive number")
    if not (isinstance(cfg["max_frames"], int) and cfg["max_frames"] >= 1):
        raise ConfigError("config field 'max_frames' must be an integer >= 1")
    for side in ("onboard", "roadside"):
        block = cfg["sensors"][side]
        if block is None:
            continue
        if not isinstance(block, Mapping):
            raise ConfigError(f"config field 'sensors.{side}' must be an object")
        _reject_unknown(block, _SENSOR_KEYS, f"sensors.{side}.")
    for key in ("trigger_range", "ego_start_range"):
        rng = cfg["scenario_overrides"][key]
        if rng is not None:
            if (not isinstance(rng, list)) or len(rng) != 2 or rng[0] > rng[1]:
                raise ConfigError(
                    f"config field 'scenario_overrides.{key}' must be [low, high] with low <= high"
                )
    unit = cfg["safety"]["injury_speed_unit"]
    if unit not in ("kmh", "mps"):
        raise ConfigError("config field 'safety.injury_speed_unit' must be 'kmh' or 'mps'")
    return ExperimentConfig(cfg)


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return validate_config(raw)


def safety_params(config: ExperimentConfig) -> SafetyParams:
    s = config["safety"]
    return SafetyParams(
        horizon=float(s["horizon"]),
        combined_radius=float(s["combined_radius"]),
        time_threshold=float(s["time_threshold"]),
        speed_threshold=float(s["speed_threshold"]),
        proximity_gate=float(s["proximity_gate"]),
        injury_speed_unit=s["injury_speed_unit"],
    )


def _sensor_with_overrides(base: SensorSpec, block: Optional[Mapping]) -> SensorSpec:
    if not block:
        return base
    intr = base.intrinsics
    if any(k in block for k in ("width", "height", "fov_deg")):
        intr = intrinsics_from_spec(
            int(block.get("width", intr.width)),
            int(block.get("height", intr.height)),
            float(block.get("fov_deg", intr.fov_deg)),
        )
    return dataclasses.replace(
        base,
        intrinsics=intr,
        max_range=float(block.get("max_range", base.max_range)),
        tau_vis=float(block.get("tau_vis", base.tau_vis)),
        blend_delta=float(block.get("blend_delta", base.blend_delta)),
        blend_detect_prob=float(block.get("blend_detect_prob", base.blend_detect_prob)),
        depth_noise=bool(block.get("depth_noise", base.depth_noise)),
    )


def build_scenario(config: ExperimentConfig) -> ScenarioConfig:
    """The builtin scenario with every config override applied."""
    demo = (
        DemographicsTable.from_dict(config["demographics"])
        if config["demographics"]
        else DemographicsTable.default()
    )
    scenario = builtin_scenario(config["scenario"], demographics=demo)

    dist = config["distributions"]
    rules = dataclasses.replace(
        scenario.rules,
        headway=ExponentialModel(rate=float(dist["headway_lambda"])),
        midblock_speed=LogNormalModel(
            mu=float(dist["midblock_speed_mu"]), sigma=float(dist["midblock_speed_sigma"])
        ),
        intersection_speed=LogNormalModel(
            mu=float(dist["intersection_speed_mu"]), sigma=float(dist["intersection_speed_sigma"])
        ),
    )
    overrides = config["scenario_overrides"]
    if overrides["speed_limit"] is not None:
        rules = dataclasses.replace(rules, speed_limit=float(overrides["speed_limit"]))

    vehicles = list(scenario.vehicles)
    if overrides["ego_start_range"] is not None:
        lo, hi = overrides["ego_start_range"]
        for i, v in enumerate(vehicles):
            if v.role == "ego":
                vehicles[i] = dataclasses.replace(v, placement=("uniform", float(lo), float(hi)))
    pedestrians = scenario.pedestrians
    if overrides["trigger_range"] is not None:
        lo, hi = overrides["trigger_range"]
        pedestrians = tuple(
            dataclasses.replace(p, trigger_range=(float(lo), float(hi))) for p in pedestrians
        )

    behavior = BehaviorParams(**{k: float(v) for k, v in config["behavior"].items()})
    rig = SensorRig(
        onboard=_sensor_with_overrides(scenario.rig.onboard, config["sensors"]["onboard"]),
        roadside=_sensor_with_overrides(scenario.rig.roadside, config["sensors"]["roadside"]),
    )
    return dataclasses.replace(
        scenario,
        vehicles=tuple(vehicles),
        pedestrians=pedestrians,
        rules=rules,
        behavior=behavior,
        rig=rig,
        dt=float(config["dt"]),
        max_frames=int(config["max_frames"]),
    )


# --- episode execution ---------------------------------------------------------

_WORKER_SCENARIO: Optional[ScenarioConfig] = None
_WORKER_CONFIG: Optional[dict] = None


def _worker_init(config_data: dict):
    global _WORKER_SCENARIO, _WORKER_CONFIG
    _WORKER_CONFIG = config_data
    _WORKER_SCENARIO = build_scenario(ExperimentConfig(config_data))


def run_one_episode(scenario: ScenarioConfig, master_seed: int, mode: str, index: int) -> EpisodeRecord:
    """Sample the scene for episode ``index`` and roll it in the given mode."""
    episode_seed = derive_seed(master_seed, MODE_IDS[mode], index)
    theta = sample_initial_scene(scenario, make_stream(episode_seed, KEY_SCENE))
    return run_episode(scenario, theta, mode, episode_seed, episode_index=index)


def _episode_line(scenario: ScenarioConfig, master_seed: int, mode: str, index: int) -> str:
    record = run_one_episode(scenario, master_seed, mode, index)
    return json.dumps(record.to_dict(), separators=(",", ":"))


def _worker_task(args: tuple) -> tuple:
    mode, index, master_seed = args
    return mode, index, _episode_line(_WORKER_SCENARIO, master_seed, mode, index)


def run_experiment(config: ExperimentConfig):
    """Run every (mode, episode) pair, write records and reports, return both.

    Episode ``i`` in mode ``m`` is seeded by mix(master_seed, mode_id, i), so
    output is independent of worker count and completion order.
    """
    scenario = build_scenario(config)
    params = safety_params(config)
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    modes = list(config["modes"])
    n = config["episodes"]
    master_seed = config["master_seed"]
    record_paths = {mode: out_dir / f"records_{mode}.jsonl" for mode in modes}
    report_paths = {mode: out_dir / f"report_{mode}.json" for mode in modes}

    manifest = {
        "tool": "v2ipedsim",
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "master_seed": master_seed,
        "config": config.to_dict(),
        "records": {m: str(p) for m, p in record_paths.items()},
        "reports": {m: str(p) for m, p in report_paths.items()},
        "report_csv": str(out_dir / "report.csv"),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    lines: dict[str, list] = {mode: [None] * n for mode in modes}
    tasks = [(mode, i, master_seed) for mode in modes for i in range(n)]
    workers = config["workers"]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(config.to_dict(),)
        ) as pool:
            for mode, index, line in pool.map(_worker_task, tasks, chunksize=32):
                lines[mode][index] = line
    else:
        for mode, index, seed in tasks:
            lines[mode][index] = _episode_line(scenario, seed, mode, index)

    reports: dict[str, SafetyReport] = {}
    for mode in modes:
        path = record_paths[mode]
        with path.open("w", encoding="utf-8") as fh:
            for line in lines[mode]:
                fh.write(line + "\n")
        records = [EpisodeRecord.from_dict(json.loads(line)) for line in lines[mode]]
        report = aggregate(records, config["scenario"], mode, params)
        reports[mode] = report
        report_paths[mode].write_text(
            json.dumps(report.to_dict(), separators=(",", ":")) + "\n", encoding="utf-8"
        )

    _write_report_csv(out_dir / "report.csv", [reports[m] for m in modes])
    (out_dir / "COMPLETE").write_text("complete\n", encoding="utf-8")
    return manifest, reports


def _write_report_csv(path: Path, reports: Sequence[SafetyReport]):
    rows = [",".join(SafetyReport.CSV_COLUMNS)]
    for report in reports:
        rows.append(",".join("" if v is None else str(v) for v in report.csv_row()))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def load_records(path) -> list[EpisodeRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EpisodeRecord.from_dict(json.loads(line)))
    return records


def recompute_report(records_path, config: ExperimentConfig) -> SafetyReport:
    """Rebuild a SafetyReport from a records file; bit-identical to the original."""
    records = load_records(records_path)
    if not records:
        raise ConfigError(f"no records in {records_path}")
    return aggregate(records, records[0].scenario, records[0].mode, safety_params(config))


def emit_plot_data(reports: Sequence[SafetyReport], kind: str, path) -> Path:
    """Write plot-ready CSV: an injury surface or a detection-distance histogram.

    Column layout is fixed; a mode absent from ``reports`` leaves its column
    empty.
    """
    by_mode = {r.mode: r for r in reports}
    path = Path(path)
    if kind == "injury_surface":
        base = reports[0]
        out = ["V,A,P_I_single_vehicle,P_I_v2i"]
        for v, a, _ in base.injury_surface:
            cells = [f"{v:g}", f"{a:g}"]
            for mode in MODES:
                rep = by_mode.get(mode)
                if rep is None:
                    cells.append("")
                else:
                    cells.append(repr(injury_probability(rep.collision_rate, v, a)))
            out.append(",".join(cells))
    elif kind == "detection_histogram":
        edges_hi = 0
        for rep in reports:
            if rep.fdd_values:
                edges_hi = max(edges_hi, math.ceil(max(rep.fdd_values)))
        out = ["bin_left_m,bin_right_m,count_sv,count_v2i"]
        for left in range(edges_hi):
            right = left + 1
            cells = [str(left), str(right)]
            for mode in MODES:
                rep = by_mode.get(mode)
                if rep is None:
                    cells.append("")
                else:
                    cells.append(str(sum(1 for v in rep.fdd_values if left <= v < right)))
            out.append(",".join(cells))
    else:
        raise ConfigError(f"unknown plot kind {kind!r}")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
