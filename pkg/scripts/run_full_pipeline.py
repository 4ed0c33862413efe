#!/usr/bin/env python3
"""Drive every pipeline stage in sequence from one config.

Runs design -> simulate -> hom -> heralded -> tofs-sim -> tofs-analyze
-> tomo-sim -> tomo-fit into subdirectories of --out and prints the
headline numbers from each stage.  With --quick the event counts are
scaled down so the whole chain finishes in well under a minute.
"""

import argparse
import os

from qpmforge import cli
from qpmforge.config import parse_config


def run(stage: str, config: str, out_root: str, seed: int | None) -> str:
    out = os.path.join(out_root, stage.replace("-", "_"))
    argv = [stage, "--config", config, "--out", out]
    if seed is not None:
        argv += ["--seed", str(seed)]
    code = cli.main(argv)
    if code != 0:
        raise SystemExit(f"stage {stage} failed with exit code {code}")
    return out


def show(path: str, name: str = "report.txt") -> None:
    full = os.path.join(path, name)
    if not os.path.exists(full):
        return
    print(f"--- {full}")
    with open(full, "r", encoding="ascii") as fh:
        print(fh.read().rstrip())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--config",
        default=os.path.join(os.path.dirname(__file__), "..", "configs", "defaults.cfg"),
    )
    ap.add_argument("--out", default="pipeline_out")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument(
        "--quick",
        action="store_true",
        help="scale event counts down for a fast end-to-end check",
    )
    args = ap.parse_args()

    config = args.config
    if args.quick:
        cfg = parse_config(args.config)
        cfg.sections["spectrometer"]["events"] = 2_000_000
        cfg.sections["spectrometer"]["resamples"] = 50
        cfg.sections["tomography"]["events_per_projection"] = 500_000
        cfg.sections["tomography"]["resamples"] = 100
        cfg.sections["hom"]["counts_per_point"] = 3000
        os.makedirs(args.out, exist_ok=True)
        config = os.path.join(args.out, "quick.cfg")
        with open(config, "w", encoding="ascii") as fh:
            fh.write(cfg.resolved_text())

    for stage in ("design", "simulate", "hom", "heralded"):
        show(run(stage, config, args.out, args.seed))
        if stage == "hom":
            show(os.path.join(args.out, "hom"), "fit.txt")

    tofs = run("tofs-sim", config, args.out, args.seed)
    # the analyzer defaults to counts.csv inside its own --out directory
    show(run_analyze(config, args.out, args.seed, tofs))

    run("tomo-sim", config, args.out, args.seed)
    show(run_tomo_fit(config, args.out, args.seed))


def run_analyze(config: str, out_root: str, seed: int | None, sim_dir: str) -> str:
    out = os.path.join(out_root, "tofs_analyze")
    cfg = parse_config(config)
    cfg.sections["run"]["input"] = os.path.join(sim_dir, "counts.csv")
    os.makedirs(out, exist_ok=True)
    resolved = os.path.join(out, "analyze.cfg")
    with open(resolved, "w", encoding="ascii") as fh:
        fh.write(cfg.resolved_text())
    argv = ["tofs-analyze", "--config", resolved, "--out", out]
    if seed is not None:
        argv += ["--seed", str(seed)]
    if cli.main(argv) != 0:
        raise SystemExit("stage tofs-analyze failed")
    return out


def run_tomo_fit(config: str, out_root: str, seed: int | None) -> str:
    out = os.path.join(out_root, "tomo_fit")
    cfg = parse_config(config)
    cfg.sections["run"]["input"] = os.path.join(out_root, "tomo_sim", "tomo")
    os.makedirs(out, exist_ok=True)
    resolved = os.path.join(out, "fit.cfg")
    with open(resolved, "w", encoding="ascii") as fh:
        fh.write(cfg.resolved_text())
    argv = ["tomo-fit", "--config", resolved, "--out", out]
    if seed is not None:
        argv += ["--seed", str(seed)]
    if cli.main(argv) != 0:
        raise SystemExit("stage tomo-fit failed")
    return out


if __name__ == "__main__":
    main()
