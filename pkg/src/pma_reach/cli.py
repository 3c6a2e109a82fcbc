"""``pma-reach`` command line entry point.

Exit status: 0 on success, 1 on a configuration error, 2 when the run hits a
numeric fault (the partial trajectory is still written).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import Mode, RunConfig, parse_config
from .dynamics import run_open_loop
from .errors import ConfigurationError, NumericFault
from .optimizer import direct_search
from .simulation import NO_DISTURBANCE, ise, rejection_metrics, run_closed_loop
from .trajectory import TrajectoryLog, fmt

EXIT_OK, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2


def write_plot_data(traj: TrajectoryLog, prefix: str) -> list[Path]:
    """Time-series and phase-plane tables for external plotting."""
    d = traj.dim
    paths = []
    time_path = Path(f"{prefix}_time.csv")
    with time_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", *(f"xi_{i}" for i in range(d)), *(f"ref_{i}" for i in range(d))])
        for k in range(traj.rows):
            writer.writerow([fmt(v) for v in (traj.t[k], *traj.xi[k], *traj.xi_ref[k])])
    paths.append(time_path)
    if d >= 2:
        phase_path = Path(f"{prefix}_phase.csv")
        with phase_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["xi_0", "xi_1", "ref_0", "ref_1"])
            for k in range(traj.rows):
                writer.writerow([fmt(v) for v in (traj.xi[k, 0], traj.xi[k, 1], traj.xi_ref[k, 0], traj.xi_ref[k, 1])])
        paths.append(phase_path)
    return paths


def _simulate(config: RunConfig) -> TrajectoryLog:
    if config.mode is Mode.OPEN_LOOP:
        return run_open_loop(config.model, config.xi0, config.integrator, target=config.reference.target)
    disturbance = config.disturbance if config.mode is Mode.DISTURB else NO_DISTURBANCE
    return run_closed_loop(
        config.model, config.gains, config.reference, disturbance, config.integrator, config.xi0,
        composition=config.composition,
    )


def run(config: RunConfig, plot_data: bool = False, out=None) -> int:
    out = out or sys.stdout
    prefix = config.output
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    traj_path = Path(f"{prefix}_trajectory.csv")

    summary = []
    if config.mode is Mode.OPTIMIZE:
        settings = config.optimizer
        report = direct_search(settings.space, config.scenario(), settings.budget, settings.mesh_tol)
        Path(f"{prefix}_history.csv").write_text(report.history_csv(), encoding="utf-8")
        config = replace(config, gains=report.best_gains)
        summary.append(report.summary())

    try:
        traj = _simulate(config)
    except NumericFault as fault:
        if fault.log is not None:
            fault.log.write_csv(traj_path)
        print(f"numeric fault: {fault}", file=out)
        return EXIT_FAULT

    traj.write_csv(traj_path)
    if plot_data:
        write_plot_data(traj, prefix)

    if config.mode is not Mode.OPTIMIZE:
        summary.append(f"final_error={fmt(traj.final_error)} ise={fmt(ise(traj))}")
    else:
        summary.append(f"final_error={fmt(traj.final_error)}")
    if config.mode is Mode.DISTURB:
        metrics = rejection_metrics(traj, config.disturbance)
        summary.append(f"peak_error={fmt(metrics.peak_error)} recovery_time={fmt(metrics.recovery_time)}")
    print(f"{config.mode.value}: " + " ".join(summary), file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pma-reach",
        description="Simulate, disturb and tune para-model control of dynamical-system reaching motions.",
    )
    parser.add_argument("config", help="run configuration file (TOML)")
    parser.add_argument("--mode", choices=[m.value for m in Mode], help="override the mode set in the file")
    parser.add_argument("--out", help="output path prefix (overrides 'output' in the file)")
    parser.add_argument("--plot-data", action="store_true", help="also write time-series and phase-plane tables")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        config = parse_config(text, mode=args.mode)
        if args.out:
            config = replace(config, output=args.out)
        return run(config, plot_data=args.plot_data)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
