"""Plot stub for the CSV tables written by `bsid_cli exp`.

Expected mapping:
  results_agg.csv (exp figure1)
      one panel per rho; x = T, y = mean_err with a +/- std_err band,
      one line per L. y axis is the squared Frobenius error.
  double_descent_agg.csv (exp double-descent)
      x = T, y = mean_err (log scale), one line per L; draw a vertical
      marker where at_threshold == 1.
  Per-trial files (without _agg) carry the raw rows for custom plots.

Usage: python scripts/plot_results.py results_agg.csv [out.png]
"""

import sys

import matplotlib.pyplot as plt
import pandas as pd


def main() -> None:
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else path.rsplit(".", 1)[0] + ".png"
    cells = pd.read_csv(path).drop_duplicates(["rho", "L", "T"])
    rhos = sorted(cells["rho"].unique())
    fig, axes = plt.subplots(1, len(rhos), figsize=(5 * len(rhos), 4), squeeze=False)
    for ax, rho in zip(axes[0], rhos):
        for L, g in cells[cells["rho"] == rho].groupby("L"):
            g = g.sort_values("T")
            ax.plot(g["T"], g["mean_err"], label=f"L={L}")
            ax.fill_between(g["T"], g["mean_err"] - g["std_err"], g["mean_err"] + g["std_err"], alpha=0.2)
            if "at_threshold" in g:
                for T in g.loc[g["at_threshold"] == 1, "T"]:
                    ax.axvline(T, linestyle="--", color="grey")
        ax.set_yscale("log")
        ax.set_title(f"rho <= {rho}")
        ax.set_xlabel("T")
        ax.set_ylabel("||G - G_hat||_F^2")
        ax.legend()
    fig.tight_layout()
    fig.savefig(out)


if __name__ == "__main__":
    main()
