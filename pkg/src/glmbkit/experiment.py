"""Monte Carlo experiment harness for the controlled-sensor scenarios.

Each replicate ``run`` draws its ground truth from ``(seed, run)`` so that
every controller faces the same target trajectories. Replicates are
independent and may be spread over worker processes; results are merged in
``(controller, run)`` order so output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .control import Decision, Platform, feasible, random_action, select_action
from .errors import CapExceededWarning, FilterDivergence, GlmbError
from .filter import estimate_state, predict, update
from .models import POSITION_DIMS
from .rfs import GlmbDensity
from .scenario import CONTROLLERS, ScenarioConfig, config_to_dict, ospa, simulate_truth

MAX_ABORT_FRACTION = 0.10
# a recomputed void probability may differ from the logged one by this much
AUDIT_TOL = 1e-9


@dataclass
class ReplicateResult:
    controller: str
    run: int
    ospa_rows: List[tuple] = field(default_factory=list)
    sensor_track: List[Tuple[float, float]] = field(default_factory=list)
    decisions: List[dict] = field(default_factory=list)
    aborted: bool = False
    error: str = ""

    @property
    def mean_ospa(self) -> float:
        return float(np.mean([r[3] for r in self.ospa_rows])) if self.ospa_rows else math.nan


class ExperimentFailure(GlmbError):
    """Too many replicates aborted."""


def _seed(*key: int) -> np.random.Generator:
    return np.random.default_rng([*key])


def _control_seed(seed: int, run: int) -> int:
    return int(np.random.SeedSequence([seed, run, 3]).generate_state(1)[0])


def _decision_rows(cfg, run, controller, k, index, dec: Decision, audit) -> List[dict]:
    rows = []
    for i, a in enumerate(dec.actions):
        f = dec.feasibility[i]
        r = dec.rewards[i] if dec.rewards else None
        chosen = a == dec.action
        rows.append({
            "run": run, "controller": controller, "decision": index,
            "time": cfg.step_time(k), "action_deg": round(math.degrees(a), 9),
            "feasible": int(f.feasible), "min_void": f.min_void,
            "void_probabilities": ";".join(repr(q) for q in f.void_probabilities),
            "reward": "" if r is None else r.mean,
            "stderr": "" if r is None else r.stderr,
            "chosen": int(chosen), "relaxed": int(dec.relaxed),
            "audit_min_void": audit.min_void if chosen and audit is not None else "",
        })
    return rows


def run_replicate(cfg: ScenarioConfig, controller: str, run: int,
                  seed: Optional[int] = None, audit: bool = True) -> ReplicateResult:
    """One filter run with the given controller over the whole scenario."""
    if controller not in CONTROLLERS:
        raise ValueError(f"unknown controller {controller!r}")
    seed = cfg.seed if seed is None else seed
    truth = simulate_truth(cfg, _seed(seed, run, 0))
    meas_rng = _seed(seed, run, 1)
    random_rng = _seed(seed, run, 2)
    motion = cfg.motion_model()
    birth = cfg.birth_model()
    sensor0 = cfg.sensor_model()
    caps = cfg.filter.caps()
    planning = cfg.planning_models()
    space = cfg.action_space()
    ccfg = cfg.control_config(_control_seed(seed, run))
    decisions = set(cfg.decision_steps())

    out = ReplicateResult(controller, run)
    pos = np.asarray(cfg.platform.position, dtype=float)
    heading = math.radians(cfg.platform.heading_deg)
    moving = False
    dens = GlmbDensity.certain_empty(4)
    c, p = cfg.ospa.cutoff, cfg.ospa.order
    n_decision = 0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CapExceededWarning)
            for k in range(1, cfg.num_steps + 1):
                if moving:
                    pos = pos + cfg.filter_interval * cfg.platform.speed * np.array(
                        [math.cos(heading), math.sin(heading)])
                sensor = sensor0.at(pos)
                states = np.array([x for _, x in truth[k - 1]]).reshape(-1, 4)
                Z = sensor.simulate(states, meas_rng)
                dens = predict(dens, motion, birth, k, caps)
                dens = update(dens, Z, sensor, caps)
                est = estimate_state(dens)
                est_pos = np.array([x[list(POSITION_DIMS)] for _, x in est]).reshape(-1, 2)
                res = ospa(est_pos, states[:, list(POSITION_DIMS)], c, p)
                out.ospa_rows.append((k, cfg.step_time(k), run, res.distance,
                                      res.localization, res.cardinality, len(states), len(est)))
                out.sensor_track.append((float(pos[0]), float(pos[1])))
                if k in decisions and controller != "stationary":
                    platform = Platform((float(pos[0]), float(pos[1])), heading)
                    step0 = k + 10**6  # lookahead birth labels never meet real ones
                    if controller == "csd":
                        dec = select_action(dens, planning, space, ccfg, platform,
                                            n_decision, step0)
                    else:
                        dec = random_action(dens, planning, space, ccfg, platform,
                                            random_rng, step0)
                    check = None
                    if audit:
                        check = feasible(dec.action, dens, planning, space, ccfg, platform)
                    out.decisions.extend(_decision_rows(cfg, run, controller, k, n_decision,
                                                        dec, check))
                    heading = heading + dec.action
                    moving = True
                    n_decision += 1
                if controller != "stationary" and cfg.step_time(k) >= cfg.platform.start_time - 1e-9:
                    moving = True
    except FilterDivergence as e:
        out.aborted = True
        out.error = str(e)
    return out


def _task(args):
    cfg, controller, run, seed = args
    return run_replicate(cfg, controller, run, seed)


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    replicates: List[ReplicateResult]

    def by_controller(self, controller: str) -> List[ReplicateResult]:
        return [r for r in self.replicates if r.controller == controller]

    def summary(self) -> Dict[str, Tuple[float, float, int, int]]:
        """controller -> (mean of per-run time-averaged OSPA, its standard error,
        completed runs, aborted runs)."""
        out = {}
        for ctrl in self.config.controllers:
            reps = self.by_controller(ctrl)
            vals = np.array([r.mean_ospa for r in reps if not r.aborted])
            n = len(vals)
            mean = float(vals.mean()) if n else math.nan
            se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
            out[ctrl] = (mean, se, n, len(reps) - n)
        return out


def run_experiment(cfg: ScenarioConfig, jobs: int = 1, seed: Optional[int] = None,
                   runs: Optional[int] = None,
                   controllers: Optional[Sequence[str]] = None) -> ExperimentResult:
    seed = cfg.seed if seed is None else seed
    runs = cfg.monte_carlo_runs if runs is None else runs
    controllers = tuple(cfg.controllers if controllers is None else controllers)
    tasks = [(cfg, ctrl, r, seed) for ctrl in controllers for r in range(runs)]
    if jobs <= 1:
        reps = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reps = list(ex.map(_task, tasks))
    for ctrl in controllers:
        aborted = sum(r.aborted for r in reps if r.controller == ctrl)
        if aborted > MAX_ABORT_FRACTION * runs:
            raise ExperimentFailure(f"{aborted} of {runs} {ctrl} replicates aborted")
    return ExperimentResult(cfg, reps)


# --- outputs ----------------------------------------------------------------------

def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def heatmap_counts(cfg: ScenarioConfig, tracks: Sequence[Sequence[Tuple[float, float]]]
                   ) -> np.ndarray:
    nx, ny = cfg.heatmap.bins
    lo, hi = cfg.region.lower, cfg.region.upper
    pts = np.array([p for t in tracks for p in t]).reshape(-1, 2)
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=[nx, ny],
                                  range=[[lo[0], hi[0]], [lo[1], hi[1]]])
    return counts.astype(int)


PLOT_SCRIPT = '''"""Render mean OSPA and sensor heatmaps from the CSV files in this directory."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name)) as fh:
        return list(csv.DictReader(fh))


rows = read("mean_ospa.csv")
fig, ax = plt.subplots(figsize=(7, 4))
for ctrl in sorted({r["controller"] for r in rows}):
    sel = [r for r in rows if r["controller"] == ctrl]
    ax.plot([float(r["time"]) for r in sel], [float(r["mean_ospa"]) for r in sel], label=ctrl)
ax.set_xlabel("time (s)")
ax.set_ylabel("mean OSPA (m)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "ospa.png"), dpi=150)

for name in sorted(os.listdir(here)):
    if not (name.startswith("heatmap_") and name.endswith(".csv")):
        continue
    cells = read(name)
    nx = 1 + max(int(c["x_bin"]) for c in cells)
    ny = 1 + max(int(c["y_bin"]) for c in cells)
    grid = np.zeros((ny, nx))
    for c in cells:
        grid[int(c["y_bin"]), int(c["x_bin"])] = int(c["count"])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(grid, origin="lower", cmap="hot")
    ax.set_title(name[8:-4])
    fig.savefig(os.path.join(here, name[:-4] + ".png"), dpi=150)
'''


def write_outputs(result: ExperimentResult, out_dir: str,
                  overrides: Sequence[str] = ()) -> None:
    cfg = result.config
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.yaml"), "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)
    with open(os.path.join(out_dir, "overrides.txt"), "w") as fh:
        fh.writelines(o + "\n" for o in overrides)

    rows = []
    for r in result.replicates:
        for (k, t, run, d, loc, card, nt, ne) in r.ospa_rows:
            rows.append((k, t, run, r.controller, d, loc, card, nt, ne))
    _write_csv(os.path.join(out_dir, "ospa.csv"),
               ["step", "time", "run", "controller", "ospa", "localization",
                "cardinality_error", "cardinality_truth", "cardinality_est"], rows)

    mean_rows = []
    for ctrl in cfg.controllers:
        reps = [r for r in result.by_controller(ctrl) if not r.aborted]
        if not reps:
            continue
        arr = np.array([[row[3] for row in r.ospa_rows] for r in reps])
        se = arr.std(axis=0, ddof=1) / math.sqrt(len(reps)) if len(reps) > 1 else np.full(arr.shape[1], math.nan)
        for j, row in enumerate(reps[0].ospa_rows):
            mean_rows.append((row[0], row[1], ctrl, float(arr[:, j].mean()), float(se[j])))
    _write_csv(os.path.join(out_dir, "mean_ospa.csv"),
               ["step", "time", "controller", "mean_ospa", "stderr"], mean_rows)

    summ = result.summary()
    _write_csv(os.path.join(out_dir, "summary.csv"),
               ["controller", "time_averaged_ospa", "stderr", "runs", "aborted"],
               [(c, *summ[c]) for c in cfg.controllers])

    track_rows = []
    for r in result.replicates:
        for k, (x, y) in enumerate(r.sensor_track, start=1):
            track_rows.append((r.run, r.controller, k, x, y))
    _write_csv(os.path.join(out_dir, "sensor_tracks.csv"),
               ["run", "controller", "step", "x", "y"], track_rows)

    for ctrl in cfg.controllers:
        counts = heatmap_counts(cfg, [r.sensor_track for r in result.by_controller(ctrl)])
        _write_csv(os.path.join(out_dir, f"heatmap_{ctrl}.csv"), ["x_bin", "y_bin", "count"],
                   [(i, j, int(counts[i, j])) for i in range(counts.shape[0])
                    for j in range(counts.shape[1])])

    log = [d for r in result.replicates for d in r.decisions]
    header = ["run", "controller", "decision", "time", "action_deg", "feasible", "min_void",
              "void_probabilities", "reward", "stderr", "chosen", "relaxed", "audit_min_void"]
    _write_csv(os.path.join(out_dir, "control_log.csv"), header,
               [[d[h] for h in header] for d in log])

    _write_csv(os.path.join(out_dir, "aborted.csv"), ["controller", "run", "error"],
               [(r.controller, r.run, r.error) for r in result.replicates if r.aborted])

    with open(os.path.join(out_dir, "plot_figures.py"), "w") as fh:
        fh.write(PLOT_SCRIPT)


def audit_decisions(result: ExperimentResult) -> List[str]:
    """Violations of the void-probability constraint by non-relaxed choices."""
    thr = result.config.control.void_threshold
    bad = []
    for r in result.replicates:
        for d in r.decisions:
            if not d["chosen"] or d["relaxed"]:
                continue
            qs = [float(q) for q in d["void_probabilities"].split(";")]
            audit = d["audit_min_void"]
            if min(qs) <= thr or (audit != "" and (audit <= thr or abs(audit - min(qs)) > AUDIT_TOL)):
                bad.append(f"{r.controller} run {r.run} decision {d['decision']}")
    return bad
