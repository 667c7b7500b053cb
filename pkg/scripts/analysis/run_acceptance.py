#!/usr/bin/env python3
"""
Closed-Loop Acceptance Runner

Statistical checks that are too slow for the unit test suite. Each check
prints a short report and a PASS/FAIL line:

    tracking     gp_recursive vs baseline mean |cte| on kidney, L and oval tracks
    departure    banked oval where the nominal controller leaves the track
    samples      N = 1024 beats N = 16 on a flat regulator task
    nominal      online learning on a nominal plant does not change tracking
    difficulty   stronger terrain couplings never reduce baseline error
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Sequence

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from scripts.path_utils import get_default_config, setup_project_paths

project_root = setup_project_paths()

import numpy as np  # noqa: E402
from scipy.stats import mannwhitneyu  # noqa: E402

from dynamics.composed import wrap_angle  # noqa: E402
from gp.training import train_residual_model  # noqa: E402
from models.config import RunConfig, load_run_config, with_overrides  # noqa: E402
from pipelines.closed_loop import RunLog, run_episodes  # noqa: E402
from pipelines.collection import collect_dataset  # noqa: E402
from simulation.tracks import GeneratedTrack, generate_track  # noqa: E402
from utils.logging_config import setup_logging  # noqa: E402

TRACK_CASES = [
    ("kidney", "sinusoidal_hills"),
    ("l_shape", "sinusoidal_hills"),
    ("oval", "banked_ring"),
]
CHECKS = ("tracking", "departure", "samples", "nominal", "difficulty")


def parse_args():
    parser = argparse.ArgumentParser(
        description="Run the closed-loop acceptance checks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--config", type=Path, default=get_default_config())
    parser.add_argument("--check", choices=CHECKS, action="append", help="Default: all")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--log-level", default="WARNING")
    return parser.parse_args()


def build_track(cfg: RunConfig, shape: str, profile: str, params=None) -> GeneratedTrack:
    return generate_track(
        shape, cfg.track.scale, profile, cfg.vehicle, cfg.track, params or {}
    )


def trained_model(cfg: RunConfig, track: GeneratedTrack):
    data = collect_dataset(track.reference, track.grid, cfg, seed=1000)
    return train_residual_model(data.inputs, data.targets, cfg.gp).model


def mean_abs_cte(log: RunLog) -> float:
    return float(np.mean(np.abs([r.cte for r in log.records]))) if log.records else np.nan


def run_modes(
    cfg: RunConfig,
    track: GeneratedTrack,
    modes: Sequence[str],
    seeds: Sequence[int],
    model=None,
    jobs: int = 1,
) -> Dict[str, List[RunLog]]:
    logs = run_episodes(track.reference, track.grid, cfg, modes, seeds, model, jobs)
    return {mode: [log for log in logs if log.mode == mode] for mode in modes}


def report(name: str, passed: bool, lines: List[str]) -> bool:
    print(f"\n=== {name} ===")
    for line in lines:
        print(line)
    print(f"{'PASS' if passed else 'FAIL'}: {name}")
    return passed


def check_tracking(cfg: RunConfig, seeds: List[int], jobs: int) -> bool:
    lines, ok = [], True
    for shape, profile in TRACK_CASES:
        track = build_track(cfg, shape, profile)
        model = trained_model(cfg, track)
        logs = run_modes(cfg, track, ["baseline", "gp_recursive"], seeds, model, jobs)
        base = np.array([mean_abs_cte(log) for log in logs["baseline"]])
        learned = np.array([mean_abs_cte(log) for log in logs["gp_recursive"]])
        ratio = learned.mean() / base.mean()
        per_seed = float(np.mean(learned < base))
        ok &= bool(ratio <= 0.7 and per_seed >= 0.8)
        lines.append(
            f"{shape:8s} {profile:17s} baseline {base.mean():.3f} m, "
            f"gp_recursive {learned.mean():.3f} m, ratio {ratio:.2f}, per-seed wins {per_seed:.0%}"
        )
    return report("tracking", ok, lines)


def check_departure(cfg: RunConfig, seeds: List[int], jobs: int) -> bool:
    cfg = with_overrides(cfg, "plant", k_beta=1.5)
    track = build_track(cfg, "oval", "banked_ring", {"bank_deg": 15.0})
    model = trained_model(cfg, track)
    logs = run_modes(cfg, track, ["baseline", "gp_recursive"], seeds, model, jobs)
    departed = sum(log.departed for log in logs["baseline"])
    completed = sum(log.lap_completed for log in logs["gp_recursive"])
    ok = departed >= 3 * len(seeds) / 5 and completed == len(seeds)
    return report(
        "departure",
        ok,
        [
            f"baseline departures: {departed}/{len(seeds)}",
            f"gp_recursive laps completed: {completed}/{len(seeds)}",
        ],
    )


def closed_loop_cost(cfg: RunConfig, log: RunLog) -> float:
    q = np.asarray(cfg.mppi.q)
    frame = log.to_frame()
    err = np.column_stack(
        [
            frame["p_x"] - frame["ref_x"],
            frame["p_y"] - frame["ref_y"],
            frame["v"] - frame["ref_v"],
            wrap_angle(frame["psi"] - frame["ref_psi"]),
        ]
    )
    return float(np.mean(np.sum(q * err**2, axis=1)))


def check_samples(cfg: RunConfig, jobs: int, num_seeds: int = 20) -> bool:
    cfg = with_overrides(cfg, steps=300)
    track = build_track(cfg, cfg.track.shape, "flat")
    seeds = list(range(num_seeds))
    costs: Dict[int, float] = {}
    for samples in (16, 1024):
        sized = with_overrides(cfg, "mppi", samples=samples)
        logs = run_modes(sized, track, ["baseline"], seeds, jobs=jobs)["baseline"]
        costs[samples] = float(np.mean([closed_loop_cost(sized, log) for log in logs]))
    return report(
        "samples",
        costs[1024] <= costs[16],
        [f"N = {n:5d}: mean closed-loop cost {c:.4f}" for n, c in costs.items()],
    )


def check_nominal(cfg: RunConfig, jobs: int, num_seeds: int = 10) -> bool:
    cfg = with_overrides(cfg, "plant", k_a=0.0, k_beta=0.0, k_r=0.0)
    track = build_track(cfg, cfg.track.shape, cfg.track.profile, cfg.track.profile_params)
    seeds = list(range(num_seeds))
    logs = run_modes(cfg, track, ["baseline", "gp_recursive"], seeds, jobs=jobs)
    base = [mean_abs_cte(log) for log in logs["baseline"]]
    learned = [mean_abs_cte(log) for log in logs["gp_recursive"]]
    p_value = float(mannwhitneyu(base, learned, alternative="two-sided").pvalue)

    inside = []
    for log in logs["gp_recursive"]:
        frame = log.to_frame()
        for head in ("dv", "dbeta", "dr"):
            inside.append(
                np.all(np.abs(frame[f"gp_{head}"]) <= 3.0 * frame[f"gp_std_{head}"] + 1e-12)
            )
    ok = p_value > 0.05 and all(inside)
    return report(
        "nominal",
        ok,
        [f"rank test p = {p_value:.3f}", f"GP means within 3 sigma of 0: {all(inside)}"],
    )


def check_difficulty(cfg: RunConfig, seeds: List[int], jobs: int) -> bool:
    track = build_track(cfg, cfg.track.shape, cfg.track.profile, cfg.track.profile_params)
    errors = []
    for factor in (1.0, 4.0):
        scaled = with_overrides(
            cfg, "plant", k_a=factor * cfg.plant.k_a, k_beta=factor * cfg.plant.k_beta
        )
        logs = run_modes(scaled, track, ["baseline"], seeds, jobs=jobs)["baseline"]
        errors.append(float(np.mean([mean_abs_cte(log) for log in logs])))
    return report(
        "difficulty",
        errors[1] >= errors[0],
        [f"gain x1: {errors[0]:.3f} m", f"gain x4: {errors[1]:.3f} m"],
    )


def main():
    args = parse_args()
    setup_logging(args.log_level)
    cfg = load_run_config(args.config)
    seeds = list(range(args.seeds))
    checks = args.check or list(CHECKS)

    results = {}
    for check in checks:
        if check == "tracking":
            results[check] = check_tracking(cfg, seeds, args.jobs)
        elif check == "departure":
            results[check] = check_departure(cfg, seeds, args.jobs)
        elif check == "samples":
            results[check] = check_samples(cfg, args.jobs)
        elif check == "nominal":
            results[check] = check_nominal(cfg, args.jobs)
        elif check == "difficulty":
            results[check] = check_difficulty(cfg, seeds, args.jobs)

    print("\n=== Acceptance Summary ===")
    for check, passed in results.items():
        print(f"{check:12s} {'PASS' if passed else 'FAIL'}")
    sys.exit(0 if all(results.values()) else 1)


if __name__ == "__main__":
    main()
