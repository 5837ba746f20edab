"""L-curve of an existing run directory: residual and regularizer over a lambda ladder."""
import argparse
from pathlib import Path

from holrecon.config import ExperimentConfig
from holrecon.pipeline import sweep_lambda


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("run_dir", help="directory produced by `holrecon run`")
    ap.add_argument("--lambdas", default="1e-10,1e-9,1e-8,1e-7,1e-6,1e-5,1e-4,1e-3")
    args = ap.parse_args()
    run = Path(args.run_dir)
    cfg = ExperimentConfig.load(run / "config.json").override({
        "pipeline.mode": "inversion_only",
        "pipeline.data_source": "fourier",
        "pipeline.data_file": str(run / "fourier.txt"),
        "pipeline.output_dir": str(run / "lcurve"),
        "noise.fourier_rho": 0.0,
    })
    for lam, resid, reg, err in sweep_lambda(cfg, [float(t) for t in args.lambdas.split(",")]):
        print(f"{lam:9.1e}  residual {resid:.4e}  regularizer {reg:.4e}  l2 {err:.4f}")


if __name__ == "__main__":
    main()
