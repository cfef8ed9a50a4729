#!/usr/bin/env python3
"""Regenerate publication-style figures from wannier-ladder CSV outputs.

Pure post-processing: every recipe reads the documented CSV schemas and
renders images, recomputing no physics.

Usage:
    python figures/render.py --recipe <name> --in <dir> --out <dir>

Recipes:
    pxp_spectrum    sorted projected-position eigenvalues (full + zoom)
    gwf_surface     amplitude surface and log heatmap of sampled states
    charge_centers  charge-center phase curves over transverse momentum
    phase_diagram   winding over a (v, t_prime) parameter scan
"""

import argparse
import csv
import glob
import math
import os
import sys

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from mpl_toolkits.mplot3d import Axes3D  # noqa: F401,E402

LOG_CLAMP = 1e-16


class SchemaMismatch(Exception):
    pass


def read_rows(path, expected_header):
    if not os.path.exists(path):
        raise SchemaMismatch(f"missing input file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise SchemaMismatch(
                f"{os.path.basename(path)} has header {header}, expected {expected_header}")
        return [row for row in reader]


def render_pxp_spectrum(in_dir, out_dir):
    rows = read_rows(os.path.join(in_dir, "pxp_spectrum.csv"),
                     ["index", "eigenvalue", "cluster_id"])
    idx = [int(r[0]) for r in rows]
    vals = [float(r[1]) for r in rows]
    cids = [int(r[2]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.scatter(idx, vals, c=cids, cmap="tab20", s=4)
    ax1.set_xlabel("sorted index")
    ax1.set_ylabel("eigenvalue")
    ax1.set_title("projected-position spectrum")
    zoom = min(100, len(idx))
    ax2.scatter(idx[:zoom], vals[:zoom], c=cids[:zoom], cmap="tab20", s=8)
    ax2.set_xlabel("sorted index")
    ax2.set_title(f"first {zoom} eigenvalues")
    fig.tight_layout()
    out = os.path.join(out_dir, "pxp_spectrum.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _load_gwf(path):
    rows = read_rows(path, ["m", "n", "re_A", "im_A", "re_B", "im_B"])
    nx = max(int(r[0]) for r in rows) + 1
    ny = max(int(r[1]) for r in rows) + 1
    amp = np.zeros((nx, ny))
    for r in rows:
        m, n = int(r[0]), int(r[1])
        amp[m, n] = math.sqrt(float(r[2]) ** 2 + float(r[3]) ** 2
                              + float(r[4]) ** 2 + float(r[5]) ** 2)
    return amp


def render_gwf_surface(in_dir, out_dir, max_states=3):
    paths = sorted(glob.glob(os.path.join(in_dir, "gwf_[0-9]*.csv")))
    if not paths:
        raise SchemaMismatch(f"no gwf_NNNN.csv files in {in_dir}")
    if len(paths) > max_states:
        step = (len(paths) - 1) // (max_states - 1)
        paths = paths[::step][:max_states]
    fig = plt.figure(figsize=(3.2 * len(paths), 6.0))
    for col, path in enumerate(paths):
        amp = _load_gwf(path)
        nx, ny = amp.shape
        ms, ns = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        ax3 = fig.add_subplot(2, len(paths), col + 1, projection="3d")
        ax3.plot_surface(ms, ns, amp, cmap="viridis", linewidth=0)
        ax3.set_title(os.path.basename(path), fontsize=8)
        axl = fig.add_subplot(2, len(paths), len(paths) + col + 1)
        logs = np.log10(np.maximum(amp, LOG_CLAMP))
        im = axl.imshow(logs.T, origin="lower", cmap="viridis", aspect="auto")
        fig.colorbar(im, ax=axl, shrink=0.8)
        axl.set_xlabel("m")
        axl.set_ylabel("n")
    fig.tight_layout()
    out = os.path.join(out_dir, "gwf_surface.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render_charge_centers(in_dir, out_dir):
    rows = read_rows(os.path.join(in_dir, "charge_centers.csv"),
                     ["k2", "band", "phase_continued"])
    curves = {}
    for r in rows:
        curves.setdefault(int(r[1]), []).append((float(r[0]), float(r[2])))
    fig, ax = plt.subplots(figsize=(5, 4))
    for band in sorted(curves):
        pts = sorted(curves[band])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=0.9)
    ax.set_xlabel("k2")
    ax.set_ylabel("charge-center phase")
    ax.set_title("charge-center flow")
    fig.tight_layout()
    out = os.path.join(out_dir, "charge_centers.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render_phase_diagram(in_dir, out_dir):
    path = os.path.join(in_dir, "scan.csv")
    if not os.path.exists(path):
        raise SchemaMismatch(f"missing input file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        for needed in ("v", "t_prime", "winding", "uniform_gap_passed"):
            if header is None or needed not in header:
                raise SchemaMismatch(f"scan.csv header {header} lacks column '{needed}'")
        iv, it, iw = header.index("v"), header.index("t_prime"), header.index("winding")
        rows = [row for row in reader]
    vs = sorted({float(r[iv]) for r in rows})
    ts = sorted({float(r[it]) for r in rows})
    grid = np.full((len(vs), len(ts)), np.nan)
    for r in rows:
        i, j = vs.index(float(r[iv])), ts.index(float(r[it]))
        grid[i, j] = abs(float(r[iw])) if r[iw] != "" else np.nan
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, origin="lower", cmap="coolwarm", aspect="auto",
                   extent=(min(ts), max(ts), min(vs), max(vs)))
    fig.colorbar(im, ax=ax, label="|winding|")
    ax.set_xlabel("t_prime")
    ax.set_ylabel("v")
    ax.set_title("winding phase diagram")
    fig.tight_layout()
    out = os.path.join(out_dir, "phase_diagram.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


RECIPES = {
    "pxp_spectrum": render_pxp_spectrum,
    "gwf_surface": render_gwf_surface,
    "charge_centers": render_charge_centers,
    "phase_diagram": render_phase_diagram,
}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--recipe", required=True, choices=sorted(RECIPES))
    parser.add_argument("--in", dest="in_dir", required=True)
    parser.add_argument("--out", dest="out_dir", required=True)
    args = parser.parse_args(argv)
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        written = RECIPES[args.recipe](args.in_dir, args.out_dir)
    except SchemaMismatch as err:
        print(f"schema mismatch: {err}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
