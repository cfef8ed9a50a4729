"""Command-line driver: deterministic CSV/JSON emission for each stage.

Exit codes: 0 success, 2 configuration/usage error, 3 model-assumption
failure (closed gap, clustering failure), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import lattice as lat
from . import localization as loc
from . import pipeline as pl
from . import spectral, topology
from .config import ExperimentConfig, config_echo, load_config
from .errors import NonPeriodicInput, UsageError, WannierLadderError
from .lattice import BoundaryCondition, PositionLabel


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _model_pieces(cfg: ExperimentConfig):
    geom = lat.LatticeGeometry(cfg.model.nx, cfg.model.ny)
    params = lat.HaldaneParams(cfg.model.t, cfg.model.t_prime, cfg.model.v, cfg.model.phi)
    bc = (cfg.model.bc_x, cfg.model.bc_y)
    disorder = lat.DisorderSpec(cfg.model.sigma2, cfg.model.seed)
    return geom, params, bc, disorder


def _position_pair(cfg: ExperimentConfig, geom: lat.LatticeGeometry):
    kind = cfg.pipeline.position
    if kind == "standard":
        return lat.standard_pair(geom)
    if kind == "rotated":
        return lat.rotated_pair(geom)
    data = np.loadtxt(cfg.pipeline.position_file, delimiter=",", ndmin=2)
    if data.shape != (geom.dim, 2):
        raise UsageError(
            f"custom position file must hold {geom.dim} rows of 'x,y', got shape {data.shape}")
    return (lat.build_position(geom, PositionLabel.CUSTOM, data[:, 0]),
            lat.build_position(geom, PositionLabel.CUSTOM, data[:, 1]))


def _summary(h_gap=None, n_occ=None, report=None, chern=None, residuals=None) -> dict:
    uniform = None
    if report is not None:
        uniform = {"passed": report.passed, "d": report.d, "D": report.D,
                   "n_clusters": report.n_clusters}
    return {"h_gap": h_gap, "n_occ": n_occ, "uniform_gap": uniform,
            "chern": chern, "residuals": residuals or {}}


# ------------------------------------------------------------------ commands

def cmd_spectrum(cfg: ExperimentConfig, args, out_dir: str):
    geom, params, bc, disorder = _model_pieces(cfg)
    H = lat.build_haldane(geom, params, bc, disorder)
    dec = spectral.eigh(H)
    gap = spectral.spectral_gap(dec, cfg.pipeline.fermi_level)
    resid = float(np.abs(H.entries @ dec.eigenvectors
                         - dec.eigenvectors * dec.eigenvalues).max())
    scale = float(np.abs(H.entries).max()) or 1.0
    write_csv(os.path.join(out_dir, "hamiltonian_spectrum.csv"), ["index", "eigenvalue"],
              ((i, w) for i, w in enumerate(dec.eigenvalues)))
    n_occ = int((dec.eigenvalues < cfg.pipeline.fermi_level).sum())
    return _summary(h_gap=gap.value if not gap.unbounded else None, n_occ=n_occ,
                    residuals={"eigh_relative": resid / scale})


def _clustered_pxp(cfg: ExperimentConfig):
    geom, params, bc, disorder = _model_pieces(cfg)
    H = lat.build_haldane(geom, params, bc, disorder)
    dec = spectral.eigh(H)
    P = spectral.fermi_projection(dec, cfg.pipeline.fermi_level)
    x_op, y_op = _position_pair(cfg, geom)
    pxp = pl.project_operator(P, x_op)
    pxp_dec = spectral.eigh(lat.HermitianOperator(pxp.matrix))
    clusters, report = pl.cluster_spectrum(pxp_dec.eigenvalues, cfg.pipeline.gap_threshold,
                                           cfg.pipeline.manual_merges)
    return geom, P, x_op, y_op, pxp_dec, clusters, report


def cmd_pxp(cfg: ExperimentConfig, args, out_dir: str):
    geom, P, _, _, pxp_dec, clusters, report = _clustered_pxp(cfg)
    ids = np.empty(pxp_dec.dim, dtype=int)
    for j, c in enumerate(clusters):
        ids[c.start:c.stop] = j
    write_csv(os.path.join(out_dir, "pxp_spectrum.csv"), ["index", "eigenvalue", "cluster_id"],
              ((i, w, ids[i]) for i, w in enumerate(pxp_dec.eigenvalues)))
    return _summary(h_gap=P.gap, n_occ=P.n_occ, report=report)


def _run_gwf(cfg: ExperimentConfig, force: bool):
    geom, params, bc, disorder = _model_pieces(cfg)
    x_op, y_op = _position_pair(cfg, geom)
    gwf_set = pl.run_pipeline(geom, params, bc, disorder,
                              fermi_level=cfg.pipeline.fermi_level,
                              x_op=x_op, y_op=y_op,
                              gap_threshold=cfg.pipeline.gap_threshold,
                              manual_merges=cfg.pipeline.manual_merges,
                              force=force)
    return geom, gwf_set


def _write_gwf_products(cfg, geom, gwf_set, out_dir, vectors: bool):
    fits = loc.gwf_decay_fits(gwf_set, geom)
    rows = []
    counters = {}
    for g, f in zip(gwf_set.functions, fits):
        k = counters.get(g.band_index, 0)
        counters[g.band_index] = k + 1
        rows.append((g.band_index, k, g.center_a, g.center_b, f.gamma, f.log_c, f.r_squared))
    write_csv(os.path.join(out_dir, "gwf_centers.csv"),
              ["band_j", "m", "center_a", "center_b", "gamma", "log_c", "r2"], rows)
    if vectors:
        for i, g in enumerate(gwf_set.functions):
            resh = g.psi.reshape(geom.ny, geom.nx, 2)
            rows = []
            for m in range(geom.nx):
                for n in range(geom.ny):
                    amp_a, amp_b = resh[n, m, 0], resh[n, m, 1]
                    rows.append((m, n, amp_a.real, amp_a.imag, amp_b.real, amp_b.imag))
            write_csv(os.path.join(out_dir, f"gwf_{i:04d}.csv"),
                      ["m", "n", "re_A", "im_A", "re_B", "im_B"], rows)
    return fits


def cmd_gwf(cfg: ExperimentConfig, args, out_dir: str):
    geom, gwf_set = _run_gwf(cfg, args.force)
    _write_gwf_products(cfg, geom, gwf_set, out_dir, "gwf_vectors" in cfg.outputs.emit)
    return _summary(h_gap=gwf_set.fermi.gap, n_occ=gwf_set.fermi.n_occ, report=gwf_set.report,
                    residuals={"orthonormality": gwf_set.orthonormality_residual,
                               "completeness": gwf_set.completeness_residual})


def cmd_decay(cfg: ExperimentConfig, args, out_dir: str):
    geom, gwf_set = _run_gwf(cfg, args.force)
    fits = _write_gwf_products(cfg, geom, gwf_set, out_dir, vectors=False)
    kernel = loc.kernel_decay_fit(gwf_set.fermi, geom)
    interior = [f for f in loc.interior_fits(fits, geom) if not f.saturated]
    write_json(os.path.join(out_dir, "kernel_decay.json"), {
        "kernel": {"gamma": kernel.gamma, "log_c": kernel.log_c,
                   "r_squared": kernel.r_squared, "saturated": kernel.saturated},
        "gwf_interior": {
            "n": len(interior),
            "gamma_median": float(np.median([f.gamma for f in interior])) if interior else None,
        },
    })
    return _summary(h_gap=gwf_set.fermi.gap, n_occ=gwf_set.fermi.n_occ, report=gwf_set.report,
                    residuals={"orthonormality": gwf_set.orthonormality_residual,
                               "completeness": gwf_set.completeness_residual})


def cmd_chern(cfg: ExperimentConfig, args, out_dir: str):
    geom, params, bc, disorder = _model_pieces(cfg)
    if cfg.model.bc_y is not BoundaryCondition.PERIODIC:
        raise NonPeriodicInput("charge-center flow requires bc_y = periodic")
    fam = topology.bloch_blocks(geom, params, cfg.model.bc_x, disorder,
                                cfg.pipeline.fermi_level)
    flow = topology.charge_center_flow(fam)
    rows = []
    for band in range(flow.phases.shape[0]):
        for k2, phase in zip(flow.k2_grid, flow.phases[band]):
            rows.append((k2, band, phase))
    write_csv(os.path.join(out_dir, "charge_centers.csv"),
              ["k2", "band", "phase_continued"], rows)
    return _summary(chern=flow.winding,
                    residuals={"largest_arc": flow.largest_arc, "max_step": flow.max_step,
                               "gapped": flow.gapped})


_GRID_KEYS = ("t", "t_prime", "v", "phi", "sigma2", "seed")


def parse_grid(specs) -> list:
    """--grid entries 'key=a:b:n' (inclusive linspace) or 'key=value'."""
    axes = []
    for spec in specs or ():
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise UsageError(f"--grid entry '{part}' is not key=value")
            key, value = (p.strip() for p in part.split("=", 1))
            if key not in _GRID_KEYS:
                raise UsageError(f"--grid key '{key}' not one of {_GRID_KEYS}")
            if ":" in value:
                pieces = value.split(":")
                if len(pieces) != 3:
                    raise UsageError(f"--grid range '{value}' must be start:stop:count")
                start, stop, count = float(pieces[0]), float(pieces[1]), int(pieces[2])
                values = np.linspace(start, stop, count).tolist()
            else:
                values = [float(value)]
            axes.append((key, values))
    return axes


def cmd_scan(cfg: ExperimentConfig, args, out_dir: str):
    axes = parse_grid(args.grid)
    if not axes:
        raise UsageError("scan requires at least one --grid axis")
    keys = [k for k, _ in axes]
    periodic = (cfg.model.bc_x is BoundaryCondition.PERIODIC
                and cfg.model.bc_y is BoundaryCondition.PERIODIC)

    def points(level):
        if level == len(axes):
            yield []
            return
        for v in axes[level][1]:
            for rest in points(level + 1):
                yield [v] + rest

    rows = []
    for values in points(0):
        overrides = dict(zip(keys, values))
        m = cfg.model
        params = lat.HaldaneParams(overrides.get("t", m.t), overrides.get("t_prime", m.t_prime),
                                   overrides.get("v", m.v), overrides.get("phi", m.phi))
        sigma2 = overrides.get("sigma2", m.sigma2)
        seed = int(overrides.get("seed", m.seed))
        geom = lat.LatticeGeometry(m.nx, m.ny)
        disorder = lat.DisorderSpec(sigma2, seed)
        H = lat.build_haldane(geom, params, (m.bc_x, m.bc_y), disorder)
        dec = spectral.eigh(H)
        gap = spectral.spectral_gap(dec, cfg.pipeline.fermi_level)
        P = spectral.fermi_projection(dec, cfg.pipeline.fermi_level)
        x_op, _ = _position_pair(cfg, geom)
        pxp = pl.project_operator(P, x_op)
        evals = np.linalg.eigvalsh(pxp.matrix)
        _, report = pl.cluster_spectrum(evals, cfg.pipeline.gap_threshold,
                                        cfg.pipeline.manual_merges)
        winding = ""
        if periodic and sigma2 == 0.0:
            fam = topology.bloch_blocks(geom, params, m.bc_x, disorder,
                                        cfg.pipeline.fermi_level)
            winding = topology.charge_center_flow(fam).winding
        rows.append(tuple(values)
                    + (gap.value if not gap.unbounded else math.inf,
                       int(report.passed), report.n_clusters, winding,
                       int(lat.topological_predicate(params))))
    write_csv(os.path.join(out_dir, "scan.csv"),
              keys + ["h_gap", "uniform_gap_passed", "n_clusters", "winding",
                      "topological_predicate"], rows)
    return _summary()


COMMANDS = {
    "spectrum": cmd_spectrum,
    "pxp": cmd_pxp,
    "gwf": cmd_gwf,
    "decay": cmd_decay,
    "chern": cmd_chern,
    "scan": cmd_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wannier-ladder",
        description="Localized generalized Wannier functions via the projected-position ladder")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to an experiment config file")
    parser.add_argument("--force", action="store_true",
                        help="continue even when the spectrum does not cluster")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--grid", action="append", default=[],
                        help="scan axes, e.g. v=0:2:5,t_prime=0.05:0.35:5 (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config)
        out_dir = args.out or cfg.outputs.dir
        os.makedirs(out_dir, exist_ok=True)
        summary = COMMANDS[args.command](cfg, args, out_dir)
        write_json(os.path.join(out_dir, "summary.json"), summary)
        write_json(os.path.join(out_dir, "manifest.json"), {
            "artifact": "wannier-ladder",
            "version": __version__,
            "command": args.command,
            "config": config_echo(cfg),
            "seed": cfg.model.seed,
            "wall_time_s": time.time() - started,
            "residuals": summary.get("residuals", {}),
        })
        return 0
    except WannierLadderError as err:
        record = {"error": type(err).__name__, "message": str(err),
                  "exit_code": err.exit_code}
        print(json.dumps(record), file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(json.dumps({"error": "OSError", "message": str(err), "exit_code": 2}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
