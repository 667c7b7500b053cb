#!/usr/bin/env python3
"""
MPPI Solve-Time Benchmark

Times repeated controller steps with the GP residual model in the loop and
reports the median against the 20 ms real-time target. Missing the target is
reported, not treated as a failure.
"""

import argparse
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from scripts.path_utils import get_default_config, setup_project_paths

project_root = setup_project_paths()

import numpy as np  # noqa: E402

from controllers.mppi import MPPIController  # noqa: E402
from gp.residual_model import ResidualModel  # noqa: E402
from gp.training import prior_inducing_points  # noqa: E402
from models.config import load_run_config, with_overrides  # noqa: E402
from models.state import PSI, STATE_DIM, V  # noqa: E402
from simulation.tracks import generate_track  # noqa: E402
from utils.logging_config import setup_logging  # noqa: E402

TARGET_MS = 20.0


def parse_args():
    parser = argparse.ArgumentParser(description="Benchmark one MPPI step with the GP model")
    parser.add_argument("--config", type=Path, default=get_default_config())
    parser.add_argument("--steps", type=int, default=100, help="Timed control steps")
    parser.add_argument("--warmup", type=int, default=5)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--samples", type=int, default=1024)
    parser.add_argument("--horizon", type=int, default=20)
    parser.add_argument("--inducing", type=int, default=30)
    parser.add_argument("--no-gp", action="store_true", help="Benchmark the nominal model")
    return parser.parse_args()


def main():
    args = parse_args()
    setup_logging("WARNING")
    cfg = load_run_config(args.config)
    cfg = with_overrides(
        cfg, "mppi", samples=args.samples, horizon=args.horizon, workers=args.workers
    )
    cfg = with_overrides(cfg, "gp", inducing_points=args.inducing)

    track = generate_track(
        cfg.track.shape,
        cfg.track.scale,
        cfg.track.profile,
        cfg.vehicle,
        cfg.track,
        cfg.track.profile_params,
    )
    model = None
    if not args.no_gp:
        inducing = prior_inducing_points(args.inducing, cfg.vehicle, seed=cfg.gp.kmeans_seed)
        model = ResidualModel.from_config(inducing, cfg.gp)

    reference = track.reference
    x = np.zeros(STATE_DIM)
    x[:2] = reference.points[0]
    x[PSI] = reference.headings[0]
    x[V] = reference.speeds[0]
    ref_slice = reference.slice(0.0, cfg.mppi.horizon, cfg.mppi.dt, x[V])

    controller = MPPIController(track.grid, cfg.vehicle, cfg.mppi, model)
    timings = []
    try:
        for k in range(args.warmup + args.steps):
            _, diag = controller.control(x, ref_slice)
            if k >= args.warmup:
                timings.append(diag.solve_ms)
    finally:
        controller.close()

    timings = np.asarray(timings)
    median = float(np.median(timings))
    print("=== MPPI Solve-Time Benchmark ===")
    print(f"Horizon: {cfg.mppi.horizon}, samples: {cfg.mppi.samples}, workers: {args.workers}")
    print(f"Model: {'nominal' if model is None else f'GP with M = {args.inducing}'}")
    print(f"Median solve time: {median:.2f} ms ({1000.0 / median:.1f} Hz)")
    print(f"p10 / p90: {np.percentile(timings, 10):.2f} / {np.percentile(timings, 90):.2f} ms")
    if median <= TARGET_MS:
        print(f"Target of {TARGET_MS:.0f} ms met")
    else:
        print(f"Target of {TARGET_MS:.0f} ms missed on this machine (informational)")


if __name__ == "__main__":
    main()
