"""Singular values of E at desk scale and on a mid-size grid; writes a table and, if possible, a plot."""
import argparse
from pathlib import Path

import numpy as np

from holrecon.fourier_op import assemble_E, build_frequency_grid, build_pixel_grid, singular_spectrum


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/singular_values")
    ap.add_argument("--pixels", type=int, nargs="+", default=[40, 80])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spectra = {}
    for n in args.pixels:
        op = assemble_E(build_pixel_grid(n, n), build_frequency_grid(12, 8, 3.0))
        s = singular_spectrum(op)
        spectra[n] = s
        np.savetxt(out / f"sigma_nx{n}.txt", s, header=f"E shape {op.shape}")
        print(f"nx={n}: shape {op.shape}, sigma_1 {s[0]:.3e}, sigma_K/sigma_1 {s[-1] / s[0]:.2e}")
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for n, s in spectra.items():
        ax.semilogy(s / s[0], ".", label=f"{n}x{n} pixels")
    ax.set_xlabel("index")
    ax.set_ylabel("sigma / sigma_1")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "singular_values.png", dpi=120)


if __name__ == "__main__":
    main()
