"""Experiment runner: every (scheme, beamforming kind, seed) cell trains or
evaluates its controller on the same episode sequence and emits CSV rows.

Output files, one set per cell, all in the plan's output directory::

    metrics_<scheme>_<bf>_seed<seed>.csv   per-episode rows + one summary row
    records_<scheme>_<bf>_seed<seed>.csv   every handover record
    metalog_HiDQL_<bf>_seed<seed>.csv      HiDQL meta-decisions
    ckpt_<scheme>_<bf>_seed<seed>.bin      final networks + run metadata
    summary.csv                            one summary row per cell

Each CSV starts with a ``#`` comment line carrying the schema version and a
timestamp; everything after it is deterministic for a fixed plan.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, dynamic_ttt_policy, fixed_ttt_policy
from .channel import BfKind
from .dc_core import RECORD_COLUMNS
from .env import DcEnv, RewardWeights
from .hidql import Goal, HidqlAgent, HidqlConfig, IntrinsicMode, MetaLogRow, goal_distance, hidql_episode
from .hidql import done as goal_done
from .metrics import EpisodeMetrics, Scheme
from .rl import checkpoint
from .rl.cdql import CdqlAgent, CdqlConfig, epsilon_at
from .scenario import ScenarioConfig, default_scenario, load_scenario, scenario_from_dict, scenario_to_dict

log = logging.getLogger(__name__)

CSV_VERSION = 1
OUTPUT_DIR_ENV = "DUALCONN_OUTPUT_DIR"
SUMMARY_FRACTION = 0.2


class PlanError(ValueError):
    """Experiment plan could not be parsed or is inconsistent."""


# ------------------------------------------------------------------ plan

@dataclass(frozen=True)
class ExperimentPlan:
    schemes: tuple
    bf_kinds: tuple
    seeds: tuple
    episodes: int
    scenario_path: str | None = None  # None: bundled default scenario
    context_enabled: bool = False
    output_dir: str = "results"
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    cdql: CdqlConfig = field(default_factory=CdqlConfig)
    hidql: HidqlConfig = field(default_factory=HidqlConfig)
    reward: RewardWeights = field(default_factory=RewardWeights)
    write_records: bool = True
    save_checkpoints: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.schemes:
            raise PlanError("plan needs at least one scheme")
        if not self.seeds:
            raise PlanError("plan needs at least one seed")
        if not self.bf_kinds:
            raise PlanError("plan needs at least one beamforming kind")
        if self.episodes < 1:
            raise PlanError("episodes must be >= 1")
        if self.workers < 1:
            raise PlanError("workers must be >= 1")

    def scenario(self) -> ScenarioConfig:
        return default_scenario() if self.scenario_path is None else load_scenario(self.scenario_path)

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def cells(self) -> list:
        return [(s, b, seed) for s in self.schemes for b in self.bf_kinds for seed in self.seeds]


def _hidql_from_dict(d: dict) -> HidqlConfig:
    d = dict(d)
    meta = CdqlConfig.from_dict(d.pop("meta", {}))
    ctrl = CdqlConfig.from_dict(d.pop("controller", {}))
    if "intrinsic" in d:
        d["intrinsic"] = IntrinsicMode(d["intrinsic"])
    return HidqlConfig(meta=meta, controller=ctrl, **d)


def _hidql_to_dict(h: HidqlConfig) -> dict:
    return {
        "c_max": h.c_max, "kappa": h.kappa, "intrinsic": h.intrinsic.value,
        "meta": h.meta.to_dict(), "controller": h.controller.to_dict(),
    }


def plan_from_dict(raw: dict, base_dir: Path | None = None) -> ExperimentPlan:
    if not isinstance(raw, dict):
        raise PlanError("plan must be a JSON object")
    known = {
        "scenario", "schemes", "bf_kinds", "seeds", "episodes", "context_enabled", "output_dir",
        "baseline", "cdql", "hidql", "reward", "write_records", "save_checkpoints", "workers",
    }
    unknown = set(raw) - known
    if unknown:
        raise PlanError(f"unknown plan keys: {sorted(unknown)}")
    try:
        scenario = raw.get("scenario")
        if scenario is not None and base_dir is not None and not Path(scenario).is_absolute():
            scenario = str(base_dir / scenario)
        schemes = tuple(Scheme.parse(s).value for s in raw.get("schemes", [s.value for s in Scheme]))
        kinds = tuple(BfKind(k).value for k in raw.get("bf_kinds", [k.value for k in BfKind]))
        seeds = tuple(int(s) for s in raw["seeds"])
        return ExperimentPlan(
            schemes=schemes,
            bf_kinds=kinds,
            seeds=seeds,
            episodes=int(raw["episodes"]),
            scenario_path=scenario,
            context_enabled=bool(raw.get("context_enabled", False)),
            output_dir=str(raw.get("output_dir", "results")),
            baseline=BaselineConfig(**raw.get("baseline", {})),
            cdql=CdqlConfig.from_dict(raw.get("cdql", {})),
            hidql=_hidql_from_dict(raw.get("hidql", {})),
            reward=RewardWeights(**raw.get("reward", {})),
            write_records=bool(raw.get("write_records", True)),
            save_checkpoints=bool(raw.get("save_checkpoints", True)),
            workers=int(raw.get("workers", 1)),
        )
    except KeyError as exc:
        raise PlanError(f"missing required plan key {exc.args[0]!r}") from None
    except PlanError:
        raise
    except (TypeError, ValueError) as exc:
        raise PlanError(str(exc)) from exc


def plan_to_dict(plan: ExperimentPlan) -> dict:
    return {
        "scenario": plan.scenario_path,
        "schemes": list(plan.schemes),
        "bf_kinds": list(plan.bf_kinds),
        "seeds": list(plan.seeds),
        "episodes": plan.episodes,
        "context_enabled": plan.context_enabled,
        "output_dir": plan.output_dir,
        "baseline": plan.baseline.to_dict(),
        "cdql": plan.cdql.to_dict(),
        "hidql": _hidql_to_dict(plan.hidql),
        "reward": {k: getattr(plan.reward, k) for k in ("w_latency", "w_outage", "w_pingpong", "latency_norm")},
        "write_records": plan.write_records,
        "save_checkpoints": plan.save_checkpoints,
        "workers": plan.workers,
    }


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise PlanError(f"cannot read plan {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PlanError(f"malformed plan JSON {path}: {exc}") from exc
    return plan_from_dict(raw, base_dir=path.parent)


# -------------------------------------------------------------- episodes

def make_env(scenario: ScenarioConfig, bf_kind: str, seed: int, context_enabled: bool,
             weights: RewardWeights = RewardWeights()) -> DcEnv:
    bf = replace(scenario.beamforming, kind=BfKind(bf_kind))
    ctx = replace(scenario.context, enabled=bool(context_enabled))
    return DcEnv(scenario, seed, bf=bf, context=ctx, weights=weights)


def baseline_episode(env: DcEnv, scheme: str, cfg: BaselineConfig, episode: int) -> None:
    env.reset(episode)
    grid = env.grid
    if scheme == Scheme.FIXED.value:
        fixed = grid.index(*fixed_ttt_policy(cfg, grid).grid_index)
    while not env.done:
        if scheme == Scheme.FIXED.value:
            a = fixed
        else:
            act = dynamic_ttt_policy(env.current_crt(), cfg, grid, env.state.serving_gnb)
            a = grid.index(*act.grid_index)
        env.step(a)


def cdql_episode(env: DcEnv, agent: CdqlAgent, total_steps: int, episode: int) -> None:
    s = env.reset(episode)
    while not env.done:
        a = agent.act(s, epsilon_at(agent.env_steps, total_steps, agent.cfg))
        s_next, r, d, _ = env.step(a)
        agent.store(s, a, r, s_next, d)
        agent.train_step()
        agent.env_steps += 1
        s = s_next


@dataclass
class CellResult:
    scheme: str
    bf_kind: str
    seed: int
    metrics: list
    records: list  # (episode, *record row)
    meta_log: list
    networks: dict
    run_meta: dict


def run_cell(plan: ExperimentPlan, scheme: str, bf_kind: str, seed: int,
             scenario: ScenarioConfig | None = None) -> CellResult:
    """Train (RL) or run (baselines) one cell over ``plan.episodes`` episodes."""
    scenario = scenario or plan.scenario()
    env = make_env(scenario, bf_kind, seed, plan.context_enabled, plan.reward)
    total = plan.episodes * scenario.n_windows
    metrics, records, meta_log = [], [], []
    networks = {}
    agent = None
    if scheme == Scheme.CDQL.value:
        agent = CdqlAgent(env.n_features, env.n_actions, plan.cdql, seed)
        networks = agent.networks()
    elif scheme == Scheme.HIDQL.value:
        agent = HidqlAgent(env.n_features, env.grid, plan.hidql, seed)
        networks = agent.networks()
    for ep in range(plan.episodes):
        if scheme in (Scheme.FIXED.value, Scheme.DYNAMIC.value):
            baseline_episode(env, scheme, plan.baseline, ep)
        elif scheme == Scheme.CDQL.value:
            cdql_episode(env, agent, total, ep)
        else:
            hidql_episode(env, agent, total, ep, meta_log, bf_kind, seed)
        m = EpisodeMetrics.from_summary(env.episode_summary(), ep, scheme, bf_kind, seed)
        metrics.append(m)
        if plan.write_records:
            records.extend([ep] + r.row() for r in env.records)
        if (ep + 1) % max(1, plan.episodes // 10) == 0:
            log.info("%s/%s/seed %d: episode %d/%d reward %.3f latency %.4f",
                     scheme, bf_kind, seed, ep + 1, plan.episodes, m.cumulative_reward, m.mean_latency)
    run_meta = {
        "scheme": scheme, "bf_kind": bf_kind, "seed": seed, "episodes": plan.episodes,
        "context_enabled": plan.context_enabled, "scenario": scenario_to_dict(scenario),
        "plan": plan_to_dict(plan),
    }
    return CellResult(scheme, bf_kind, seed, metrics, records, meta_log, networks, run_meta)


# ------------------------------------------------------------------ CSV

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _header_line(kind: str) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return f"# dualconn {kind} v{CSV_VERSION} generated {stamp}\n"


def _write_csv(path: Path, kind: str, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(_header_line(kind) + buf.getvalue())


def read_csv(path) -> tuple[list, list]:
    """Columns and rows of a harness CSV, skipping ``#`` comment lines."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


METRIC_COLUMNS = ["row_type"] + EpisodeMetrics.columns()
_NUMERIC = [c for c in EpisodeMetrics.columns() if c not in ("episode", "scheme", "bf_kind", "seed")]


def summary_values(metrics: list) -> dict:
    """Mean of every numeric column over the final 20% of episodes.

    Latency columns skip episodes without a matched handover (NaN).
    """
    n = len(metrics)
    k = max(1, math.ceil(SUMMARY_FRACTION * n))
    tail = metrics[n - k:]
    out = {}
    for col in _NUMERIC:
        vals = np.array([getattr(m, col) for m in tail], dtype=float)
        finite = vals[~np.isnan(vals)]
        out[col] = float(finite.mean()) if finite.size else math.nan
    out["first_episode"] = tail[0].episode
    out["n_episodes"] = k
    return out


def _summary_row(res: CellResult) -> list:
    s = summary_values(res.metrics)
    row = ["summary"]
    for col in EpisodeMetrics.columns():
        if col == "episode":
            row.append(f"{s['first_episode']}-{res.metrics[-1].episode}")
        elif col == "scheme":
            row.append(res.scheme)
        elif col == "bf_kind":
            row.append(res.bf_kind)
        elif col == "seed":
            row.append(res.seed)
        else:
            row.append(s[col])
    return row


def cell_stem(scheme: str, bf_kind: str, seed: int) -> str:
    return f"{scheme}_{bf_kind}_seed{seed}"


def write_cell(out_dir: Path, res: CellResult, plan: ExperimentPlan) -> list:
    stem = cell_stem(res.scheme, res.bf_kind, res.seed)
    written = []
    rows = [["episode"] + m.values() for m in res.metrics] + [_summary_row(res)]
    p = out_dir / f"metrics_{stem}.csv"
    _write_csv(p, "metrics", METRIC_COLUMNS, rows)
    written.append(p)
    if plan.write_records:
        p = out_dir / f"records_{stem}.csv"
        _write_csv(p, "records", ["episode"] + RECORD_COLUMNS, res.records)
        written.append(p)
    if res.scheme == Scheme.HIDQL.value:
        p = out_dir / f"metalog_{stem}.csv"
        _write_csv(p, "metalog", list(MetaLogRow.COLUMNS), [r.values() for r in res.meta_log])
        written.append(p)
    if plan.save_checkpoints:
        p = out_dir / f"ckpt_{stem}.bin"
        checkpoint.save(p, res.networks, res.run_meta)
        written.append(p)
    return written


def _run_cell_job(args):
    plan, scheme, bf, seed = args
    return run_cell(plan, scheme, bf, seed)


def run_experiment(plan: ExperimentPlan) -> list:
    """Run every cell of the plan and write its CSVs; returns written paths."""
    scenario = plan.scenario()  # fail early on a bad scenario
    out_dir = plan.resolved_output_dir()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out_dir} is not writable: {exc}") from exc
    cells = plan.cells()
    if plan.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(_run_cell_job, [(plan, *c) for c in cells]))
    else:
        results = [run_cell(plan, *c, scenario=scenario) for c in cells]
    written = []
    summaries = []
    for res in results:  # single collector: files are written in plan order
        written += write_cell(out_dir, res, plan)
        summaries.append(_summary_row(res))
    p = out_dir / "summary.csv"
    _write_csv(p, "summary", METRIC_COLUMNS, summaries)
    written.append(p)
    return written


# ---------------------------------------------------------------- replay

REPLAY_COLUMNS = [
    "window", "t_start", "action", "outage_db", "ttt_s", "goal", "reward", "serving", "on_lte",
    "handovers", "pingpongs", "mean_latency", "outage_fraction", "mean_sweep_delay",
]


def replay(checkpoint_path, episode: int | None = None, output=None) -> list:
    """Re-run one episode greedily from a checkpoint; returns per-window rows.

    Rows are also written as CSV to ``output`` when given.
    """
    nets, meta = checkpoint.load(checkpoint_path)
    try:
        scheme = meta["scheme"]
        bf_kind = meta["bf_kind"]
        seed = int(meta["seed"])
        scenario = scenario_from_dict(meta["scenario"])
        plan = plan_from_dict(meta["plan"])
    except KeyError as exc:
        raise checkpoint.CheckpointError(f"checkpoint metadata lacks {exc.args[0]!r}") from None
    if episode is None:
        episode = int(meta.get("episodes", 0))
    env = make_env(scenario, bf_kind, seed, meta.get("context_enabled", False), plan.reward)
    grid = env.grid
    agent = None
    if scheme == Scheme.CDQL.value:
        agent = CdqlAgent(env.n_features, env.n_actions, plan.cdql, seed)
        agent.load_networks(nets)
    elif scheme == Scheme.HIDQL.value:
        agent = HidqlAgent(env.n_features, grid, plan.hidql, seed)
        agent.meta.load_networks({k[len("meta_"):]: v for k, v in nets.items() if k.startswith("meta_")})
        agent.controller.load_networks(
            {k[len("controller_"):]: v for k, v in nets.items() if k.startswith("controller_")})
    s = env.reset(episode)
    rows = []
    goal = None
    c = 0
    while not env.done:
        t_start = env.step_index * scenario.sim_step
        if scheme == Scheme.FIXED.value:
            a = grid.index(*fixed_ttt_policy(plan.baseline, grid).grid_index)
        elif scheme == Scheme.DYNAMIC.value:
            a = grid.index(*dynamic_ttt_policy(env.current_crt(), plan.baseline, grid, env.state.serving_gnb).grid_index)
        elif scheme == Scheme.CDQL.value:
            a = agent.act(s, 0.0)
        else:
            if goal is None:
                goal = Goal.from_index(grid, agent.meta.act(s, 0.0))
                c = 0
            a = agent.greedy_action(s, goal)
        s, r, _, wm = env.step(a)
        act = grid[a]
        rows.append([
            env.window - 1, t_start, a, act.outage_threshold, act.ttt,
            "" if goal is None else goal.index, r, env.state.serving_gnb, int(env.state.on_lte_fallback),
            len(wm.records), wm.pingpong_count, wm.mean_latency, wm.outage_fraction,
            float(np.mean(wm.sweep_delays)) if wm.sweep_delays else math.nan,
        ])
        if goal is not None:
            c += 1
            dist = goal_distance(act.grid_index, goal.grid_index, grid.k_o, grid.k_ttt)
            if goal_done(c, plan.hidql.c_max, dist, plan.hidql.kappa):
                goal = None
    if output is not None:
        _write_csv(Path(output), "replay", REPLAY_COLUMNS, rows)
    return rows
