"""Plot a metric against iteration for every replicate CSV in one or more run directories.

    python scripts/plot.py out/four_mode_smc_wfr out/four_mode_bdl_kl --metric mmd -o mmd.png
"""
import argparse
import csv
import pathlib

import matplotlib.pyplot as plt


def read_run(path):
    with open(path, newline="") as f:
        rows = [r for r in csv.DictReader(line for line in f if not line.startswith("#"))]
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dirs", nargs="+", type=pathlib.Path)
    ap.add_argument("--metric", default="mmd",
                    choices=["ess_fraction", "mmd", "w1_marginal_avg", "mse_mean", "mse_cov", "wallclock_s"])
    ap.add_argument("--logy", action="store_true")
    ap.add_argument("-o", "--output", type=pathlib.Path)
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(7, 4))
    for i, d in enumerate(args.dirs):
        color = f"C{i}"
        for k, path in enumerate(sorted(d.glob("replicate_*.csv"))):
            rows = read_run(path)
            x = [int(r["iteration"]) for r in rows]
            y = [float(r[args.metric]) for r in rows]
            ax.plot(x, y, color=color, alpha=0.4, lw=0.8, label=d.name if k == 0 else None)
    ax.set_xlabel("iteration")
    ax.set_ylabel(args.metric)
    if args.logy:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    if args.output:
        fig.savefig(args.output, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
