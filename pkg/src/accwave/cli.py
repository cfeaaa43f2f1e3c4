"""Command line entry points: train, simulate, evaluate, sweep."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics, ppo, sim
from .config import ConfigError, RunConfig, load_config
from .control import (FixedGainController, GainAction, OpenLoopController,
                      PpoPolicyController)
from .model import equilibrium
from .nn import ActorNet, CheckpointError, CriticNet, actor_spec, critic_spec, \
    load_checkpoint, save_checkpoint

log = logging.getLogger("accwave")

INDICES_SCHEMA = "accwave-indices-v1"
META_SCHEMA = "accwave-run-meta-v1"
SWEEP_SCHEMA = "accwave-l2-comparison-v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_RUN_FAILURE = 4


class AlphaSampler:
    """Clamped Gaussian resampling of the plant-side ACC penetration."""

    def __init__(self, mean: float, std: float, mode: str, seed: int):
        self.mean = mean
        self.std = std
        self.mode = mode
        self.rng = np.random.default_rng(seed)
        self._frozen = None

    def reset(self):
        self._frozen = None

    def __call__(self) -> float:
        if self.mode == "per_episode":
            if self._frozen is None:
                self._frozen = self._draw()
            return self._frozen
        return self._draw()

    def _draw(self) -> float:
        return float(np.clip(self.rng.normal(self.mean, self.std), 0.0, 1.0))


def _make_grid(cfg: RunConfig):
    params = cfg.traffic
    g = cfg["grid"]
    horizon = cfg["scenario"]["horizon_s"]
    return params, sim.make_grid(params, g["dx_m"], g["dt_s"], horizon,
                                 worst_case_speed=g["worst_case_speed_m_s"])


def _alpha_sampler(cfg: RunConfig):
    sc = cfg["scenario"]
    if sc["alpha_noise_std"] <= 0.0:
        return None
    return AlphaSampler(sc["alpha_noise_mean"], sc["alpha_noise_std"],
                        sc["alpha_noise_resample"], seed=sc["seed"] + 7919)


def _build_controller(cfg: RunConfig, grid, rng: np.random.Generator):
    c = cfg["controller"]
    if c["kind"] == "open_loop":
        return OpenLoopController()
    if c["kind"] == "fixed_gain":
        return FixedGainController(GainAction(*c["gains"]))
    if not c["checkpoint"]:
        raise ConfigError("controller.checkpoint is required for kind=ppo_policy")
    actor, _critic, meta = load_checkpoint(c["checkpoint"],
                                           expect_input_dim=3 * (grid.M + 1))
    assumed = cfg["scenario"]["delay_assumed_s"]
    trained = meta.get("trained_delay_s")
    if trained is not None and abs(trained - assumed) > 1e-9:
        log.warning("checkpoint was trained with a %.3g s delay but the scenario "
                    "assumes %.3g s", trained, assumed)
    return PpoPolicyController(actor, deterministic=c["deterministic"], rng=rng)


def _write_run_outputs(out: Path, cfg: RunConfig, trace: sim.Trace, eq) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(cfg.snapshot_json())
    o = cfg["output"]
    sim.write_trace_csv(trace, out / "trace.csv",
                        t_stride=o["trace_t_stride"], x_stride=o["trace_x_stride"])
    sim.write_norms_csv(trace, eq, out / "norms.csv")
    n = len(trace.x)
    rho_l2 = np.sqrt(np.sum((trace.rho - eq.rho_bar) ** 2, axis=1) / n)
    v_l2 = np.sqrt(np.sum((trace.v - eq.v_bar) ** 2, axis=1) / n)
    rewards = -(np.sum(((trace.rho - eq.rho_bar) / eq.rho_bar) ** 2, axis=1)
                + np.sum(((trace.v - eq.v_bar) / eq.v_bar) ** 2, axis=1))
    meta = {
        "schema": META_SCHEMA,
        "scenario": cfg["scenario"]["name"],
        "controller": cfg["controller"]["kind"],
        "seed": cfg["scenario"]["seed"],
        "delay_actual_s": cfg["scenario"]["delay_actual_s"],
        "delay_assumed_s": cfg["scenario"]["delay_assumed_s"],
        "alpha_noise_std": cfg["scenario"]["alpha_noise_std"],
        "diverged": trace.diverged,
        "horizon_s": float(trace.times[-1]),
        "initial_l2": {"rho": float(rho_l2[0]), "v": float(v_l2[0])},
        "final_l2": {"rho": float(rho_l2[-1]), "v": float(v_l2[-1])},
        "reward_min": float(rewards.min()),
        "reward_max": float(rewards.max()),
        "reward_mean": float(rewards.mean()),
        "reward_reached_stop_threshold": bool(rewards.max() >= -0.1),
        "clamp_events": int(trace.clamp_counts.sum()),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return meta


def run_scenario(cfg: RunConfig, out: Path) -> dict:
    """Simulate one configured scenario and write its run directory."""
    params, grid = _make_grid(cfg)
    eq = equilibrium(params)
    rng = np.random.default_rng(cfg["scenario"]["seed"])
    controller = _build_controller(cfg, grid, rng)
    sampler = _alpha_sampler(cfg)
    initial = sim.initial_state(
        params, eq, grid,
        amplitude=cfg["scenario"]["initial_wave_amplitude_veh_per_m"])
    trace = sim.simulate(controller, params, grid, eq=eq, initial=initial,
                         alpha_sampler=sampler)
    meta = _write_run_outputs(out, cfg, trace, eq)
    log.info("scenario %-18s controller=%-10s final L2(rho)=%.3e L2(v)=%.3e%s",
             meta["scenario"], meta["controller"], meta["final_l2"]["rho"],
             meta["final_l2"]["v"], " DIVERGED" if meta["diverged"] else "")
    return meta


def cmd_train(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(cfg.snapshot_json())

    params, grid = _make_grid(cfg)
    tr = cfg["training"]
    hidden = tuple(int(h) for h in tr["hidden"])
    input_dim = 3 * (grid.M + 1)
    actor = ActorNet(actor_spec(input_dim, seed=tr["seed"], hidden=hidden),
                     mu_init=tr["mu_init"], sigma_init=tr["sigma_init"])
    critic = CriticNet(critic_spec(input_dim, seed=tr["seed"] + 1,
                                   value_bound=tr["value_bound"], hidden=hidden))
    env = ppo.TrafficEnv(params, grid, alpha_sampler=_alpha_sampler(cfg))

    def progress(update_idx, episode, stats):
        log.info("update %4d  episode %3d  batch reward %9.4f  actor %9.5f  "
                 "critic %10.4f  clip %.2f", update_idx, episode,
                 stats.mean_reward, stats.actor_loss, stats.critic_loss,
                 stats.clip_fraction)

    result = ppo.train(env, actor, critic, cfg.hyper, seed=tr["seed"],
                       curve_path=out / "learning_curve.csv", progress=progress)
    meta = {
        "trained_delay_s": cfg["scenario"]["delay_actual_s"],
        "alpha": cfg["traffic"]["acc_penetration"],
        "seed": tr["seed"],
        "converged": result.converged,
        "updates": result.updates,
        "episodes": result.episodes,
        "final_episode_mean": result.final_episode_mean,
        "best_episode_mean": result.best_episode_mean,
    }
    save_checkpoint(out / "checkpoint.npz", actor, critic, meta)
    (out / "train_result.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    log.info("training %s after %d updates (%d episodes, best episode mean %.4f, "
             "%.1f s)", "converged" if result.converged else "did NOT converge",
             result.updates, result.episodes, result.best_episode_mean,
             result.wall_time_s)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg["output"]["dir"])
    run_scenario(cfg, out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    root = Path(args.trace_dir)
    runs = sorted(p for p in root.iterdir() if (p / "meta.json").is_file())
    if not runs:
        log.error("no run directories with meta.json under %s", root)
        return EXIT_RUN_FAILURE
    entries = []
    for p in runs:
        meta = json.loads((p / "meta.json").read_text())
        trace = sim.read_trace_csv(p / "trace.csv")
        idx = metrics.indices(trace, window=args.window, fuel_model=args.fuel_model)
        entries.append({"dir": p.name, "scenario": meta["scenario"],
                        "controller": meta["controller"], "indices": idx})
    baseline = next((e for e in entries if e["controller"] == "open_loop"), None)
    if baseline is None:
        log.error("no open_loop baseline among %s", [e["dir"] for e in entries])
        return EXIT_RUN_FAILURE
    b = baseline["indices"]
    report = {"schema": INDICES_SCHEMA, "window_s": args.window, "runs": []}
    for e in entries:
        i = e["indices"]
        report["runs"].append({
            "scenario": e["scenario"],
            "controller": e["controller"],
            "j_ttt": i.j_ttt, "j_fuel": i.j_fuel, "j_comfort": i.j_comfort,
            "improvement_vs_open_loop_percent": {
                "j_ttt": metrics.improvement_percent(b.j_ttt, i.j_ttt),
                "j_fuel": metrics.improvement_percent(b.j_fuel, i.j_fuel),
                "j_comfort": metrics.improvement_percent(b.j_comfort, i.j_comfort),
            },
        })
    out = Path(args.out) if args.out else root / "indices.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True))
    for r in report["runs"]:
        imp = r["improvement_vs_open_loop_percent"]
        log.info("%-18s J_TTT %.4g (%+.2f%%)  J_fuel %.4g (%+.2f%%)  "
                 "J_comfort %.4g (%+.2f%%)", r["scenario"], r["j_ttt"],
                 imp["j_ttt"], r["j_fuel"], imp["j_fuel"], r["j_comfort"],
                 imp["j_comfort"])
    return EXIT_OK


SWEEP_SCENARIOS = (
    # (name, delay_actual_s, delay_assumed_s, alpha_noise_std)
    ("delay4_matched", 4.0, 4.0, 0.0),
    ("delay3_assumed4", 3.0, 4.0, 0.0),
    ("delay5_assumed4", 5.0, 4.0, 0.0),
    ("delay4_alpha_noise", 4.0, 4.0, 0.15),
)


def _sweep_config(cfg: RunConfig, name, actual, assumed, noise_std,
                  checkpoint: str) -> RunConfig:
    raw = json.loads(json.dumps(cfg.raw))  # deep copy
    raw["scenario"].update({
        "name": name, "delay_actual_s": actual, "delay_assumed_s": assumed,
        "alpha_noise_std": noise_std,
    })
    raw["controller"].update({"kind": "ppo_policy", "checkpoint": checkpoint,
                              "deterministic": True})
    return RunConfig(raw=raw)


def _sweep_task(raw_json: str, out_dir: str) -> dict:
    cfg = RunConfig(raw=json.loads(raw_json))
    return run_scenario(cfg, Path(out_dir))


def cmd_sweep(args) -> int:
    cfg = _load(args)
    checkpoint = args.checkpoint or cfg["controller"]["checkpoint"]
    if not checkpoint:
        raise ConfigError("sweep needs a pre-trained checkpoint "
                          "(--checkpoint or controller.checkpoint)")
    out = Path(args.out or cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)

    tasks = []
    for name, actual, assumed, noise in SWEEP_SCENARIOS:
        scfg = _sweep_config(cfg, name, actual, assumed, noise, checkpoint)
        tasks.append((name, scfg.snapshot_json(), str(out / name)))

    failures = {}
    results = {}
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            futs = {name: ex.submit(_sweep_task, raw, d) for name, raw, d in tasks}
            for name, fut in futs.items():
                try:
                    results[name] = fut.result()
                except Exception as exc:  # per-run failures recorded, sweep continues
                    failures[name] = repr(exc)
    else:
        for name, raw, d in tasks:
            try:
                results[name] = _sweep_task(raw, d)
            except Exception as exc:
                failures[name] = repr(exc)

    _write_l2_comparison(out, [n for n, _, _ in tasks if n in results])
    if failures:
        (out / "failures.json").write_text(json.dumps(failures, indent=2))
        for name, err in failures.items():
            log.error("scenario %s failed: %s", name, err)
        return EXIT_RUN_FAILURE
    return EXIT_OK


def _write_l2_comparison(out: Path, names):
    """Merge per-scenario norms.csv files into one wide comparison table."""
    series = {}
    t = None
    for name in names:
        path = out / name / "norms.csv"
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        t = data[:, 0] if t is None or len(data) < len(t) else t
        series[name] = data
    if not series:
        return
    n = min(len(s) for s in series.values())
    with open(out / "l2_comparison.csv", "w") as f:
        f.write(f"# schema={SWEEP_SCHEMA}\n")
        cols = ["t"]
        for name in names:
            cols += [f"{name}_rho_l2", f"{name}_v_l2"]
        f.write(",".join(cols) + "\n")
        for k in range(n):
            row = [f"{t[k]:.6g}"]
            for name in names:
                row += [f"{series[name][k, 1]:.10g}", f"{series[name][k, 2]:.10g}"]
            f.write(",".join(row) + "\n")


def _load(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("scenario", {})["seed"] = args.seed
        overrides.setdefault("training", {})["seed"] = args.seed
    if getattr(args, "checkpoint", None):
        overrides.setdefault("controller", {})["checkpoint"] = args.checkpoint
    return load_config(args.config, overrides=overrides)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="accwave",
                                description="Mixed-traffic wave-suppression lab")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="override scenario and training seeds")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--checkpoint", help="policy checkpoint (.npz)")

    sp = sub.add_parser("train", help="run PPO training")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("simulate", help="roll one scenario and export the trace")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("evaluate", help="score run directories against open loop")
    sp.add_argument("trace_dir", help="directory containing run subdirectories")
    sp.add_argument("--out", help="report path (default <trace_dir>/indices.json)")
    sp.add_argument("--window", type=float, default=300.0)
    sp.add_argument("--fuel-model", choices=("paper", "cubic"), default="paper")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="robustness sweep with a trained checkpoint")
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
