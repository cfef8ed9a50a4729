"""Projected-position ladder: compress a position operator to the occupied
subspace, cluster its spectrum into gap-separated bands, and diagonalize the
transverse position within each band to obtain localized orthonormal states.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lattice as lat
from . import spectral
from .errors import (
    DimensionMismatch,
    EmptySpectrum,
    GapClosedAtFermiLevel,
    InvalidPartition,
    NotHermitian,
    UniformGapFailed,
)
from .lattice import HermitianOperator, PositionOperator
from .spectral import FermiProjection, SpectralDecomposition

DEFAULT_GAP_THRESHOLD = 0.25
AUTO_SPACING_FACTOR = 5.0


def worker_count() -> int:
    """Worker cap for band-level parallelism; WL_THREADS overrides."""
    env = os.environ.get("WL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


# ------------------------------------------------------------------ step 3

@dataclass(frozen=True)
class ProjectedOperator:
    """Position operator compressed to the occupied subspace: C^dag diag C."""

    matrix: np.ndarray
    basis: FermiProjection


def _position_values(pos, dim: int):
    """Either a diagonal vector or a full Hermitian matrix for a position operator."""
    if isinstance(pos, PositionOperator):
        if pos.dim != dim:
            raise DimensionMismatch(f"position operator dim {pos.dim} != {dim}")
        return pos.diag, None
    if isinstance(pos, HermitianOperator):
        M = pos.entries
    else:
        M = np.asarray(pos)
        if M.ndim == 1:
            if M.shape[0] != dim:
                raise DimensionMismatch(f"position diagonal length {M.shape[0]} != {dim}")
            return M, None
    if M.shape != (dim, dim):
        raise DimensionMismatch(f"position operator shape {M.shape} != ({dim}, {dim})")
    return None, M


def project_operator(P: FermiProjection, pos) -> ProjectedOperator:
    """Restrict a position operator to range(P) in occupied coordinates.

    The nonzero spectrum of the full projected product equals the spectrum of
    this reduced matrix; the null space of the projector is dropped.
    """
    C = P.occupied_basis
    diag, M = _position_values(pos, P.dim)
    if M is None:
        reduced = (C.conj().T * diag) @ C
    else:
        reduced = C.conj().T @ M @ C
    return ProjectedOperator(reduced, P)


# ------------------------------------------------------------------ step 4

@dataclass(frozen=True)
class BandCluster:
    """A gap-separated island of the projected-position spectrum.

    ``start:stop`` index the ascending eigenvalue array.
    """

    start: int
    stop: int
    sigma_min: float
    sigma_max: float
    centroid: float

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def diameter(self) -> float:
        return self.sigma_max - self.sigma_min


@dataclass(frozen=True)
class UniformGapReport:
    """Measured clustering constants: min inter-island distance d, max island
    diameter D, and whether more than one island was found."""

    d: float
    D: float
    passed: bool
    n_clusters: int
    gap_threshold: float


def cluster_spectrum(eigs: np.ndarray, gap_threshold: float | None = DEFAULT_GAP_THRESHOLD,
                     manual_merges=()):
    """Split an ascending spectrum where consecutive spacing exceeds the threshold.

    ``gap_threshold=None`` selects the automatic rule: cut where the spacing
    exceeds AUTO_SPACING_FACTOR times the median spacing.  ``manual_merges``
    is a list of (first, last) cluster-index ranges to fuse after the initial
    cut.  Returns (clusters, UniformGapReport).
    """
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size == 0:
        raise EmptySpectrum("cannot cluster an empty spectrum")
    spacings = np.diff(eigs)
    if gap_threshold is None:
        med = float(np.median(spacings)) if spacings.size else 0.0
        gap_threshold = AUTO_SPACING_FACTOR * med if med > 0 else DEFAULT_GAP_THRESHOLD
    if gap_threshold <= 0:
        raise ValueError("gap_threshold must be positive")
    cuts = np.where(spacings > gap_threshold)[0]
    bounds = np.concatenate([[0], cuts + 1, [eigs.size]])
    ranges = [(int(bounds[i]), int(bounds[i + 1])) for i in range(len(bounds) - 1)]
    for first, last in manual_merges:
        if not (0 <= first <= last < len(ranges)):
            raise InvalidPartition(f"merge range {first}-{last} outside 0-{len(ranges) - 1}")
        ranges = ranges[:first] + [(ranges[first][0], ranges[last][1])] + ranges[last + 1:]
    clusters = []
    for a, b in ranges:
        seg = eigs[a:b]
        clusters.append(BandCluster(a, b, float(seg[0]), float(seg[-1]), float(seg.mean())))
    if len(clusters) > 1:
        d = min(clusters[i + 1].sigma_min - clusters[i].sigma_max for i in range(len(clusters) - 1))
    else:
        d = 0.0
    D = max(c.diameter for c in clusters)
    report = UniformGapReport(float(d), float(D), len(clusters) >= 2, len(clusters),
                              float(gap_threshold))
    return clusters, report


@dataclass(frozen=True)
class BandProjector:
    """Orthonormal basis (occupied coordinates) of one spectral island."""

    cluster: BandCluster
    subspace_basis: np.ndarray   # n_occ x cluster.size

    @property
    def rank(self) -> int:
        return self.subspace_basis.shape[1]


def band_projectors(P: FermiProjection, pxp_dec: SpectralDecomposition,
                    clusters) -> list[BandProjector]:
    """Group projected-position eigenvectors by cluster.

    The clusters must partition the full index range 0..n_occ without
    overlap; the grouped bases then resolve the occupied identity exactly.
    """
    expected = 0
    for c in clusters:
        if c.start != expected:
            raise InvalidPartition(
                f"clusters must partition the index range; got start {c.start}, expected {expected}")
        expected = c.stop
    if expected != pxp_dec.dim:
        raise InvalidPartition(f"clusters cover 0..{expected}, spectrum has {pxp_dec.dim}")
    return [BandProjector(c, pxp_dec.eigenvectors[:, c.start:c.stop]) for c in clusters]


# ------------------------------------------------------------------ step 5

@dataclass(frozen=True)
class GeneralizedWannierFunction:
    """Unit-norm lattice state localized near (center_a, center_b)."""

    psi: np.ndarray
    band_index: int
    center_a: float
    center_b: float

    @property
    def y_eigenvalue(self) -> float:
        return self.center_b


def gwf_from_band(Pj: BandProjector, Y, C: np.ndarray,
                  band_index: int = 0) -> list[GeneralizedWannierFunction]:
    """Diagonalize the transverse position within one band.

    C is the occupied basis the band projector is expressed in.  Each
    eigenvector u of W^dag C^dag Y C W lifts to a lattice state C W u with
    the eigenvalue as its transverse center.
    """
    W = Pj.subspace_basis
    diag, M = _position_values(Y, C.shape[0])
    if M is None:
        reduced = (C.conj().T * diag) @ C
    else:
        reduced = C.conj().T @ M @ C
    block = W.conj().T @ reduced @ W
    wy, U = np.linalg.eigh(block)
    psis = C @ (W @ U)
    return [GeneralizedWannierFunction(psis[:, k], band_index, Pj.cluster.centroid, float(wy[k]))
            for k in range(wy.size)]


@dataclass
class GwfSet:
    """Everything a ladder run produces: the states, the clustering, and the
    frame residuals against the occupied subspace."""

    functions: list
    clusters: list
    report: UniformGapReport
    fermi: FermiProjection
    pxp_eigenvalues: np.ndarray
    x_label: lat.PositionLabel
    y_label: lat.PositionLabel
    orthonormality_residual: float = field(default=float("nan"))
    completeness_residual: float = field(default=float("nan"))

    def psi_matrix(self) -> np.ndarray:
        return np.column_stack([g.psi for g in self.functions])

    def band(self, j: int):
        return [g for g in self.functions if g.band_index == j]


def run_pipeline(geom: lat.LatticeGeometry, params: lat.HaldaneParams, bc,
                 disorder: lat.DisorderSpec = lat.CLEAN, *,
                 fermi_level: float = 0.0,
                 x_op=None, y_op=None,
                 gap_threshold: float | None = DEFAULT_GAP_THRESHOLD,
                 manual_merges=(), force: bool = False, min_gap: float = 1e-8,
                 max_workers: int | None = None) -> GwfSet:
    """Run the full ladder for a Haldane model configuration.

    Requires a spectral gap at the Fermi level and a clustering with at
    least two islands (override the latter with ``force``).  Band
    diagonalizations run on a small thread pool; results are ordered by
    band, then ascending transverse center.
    """
    H = lat.build_haldane(geom, params, bc, disorder)
    dec = spectral.eigh(H)
    P = spectral.fermi_projection(dec, fermi_level)
    if P.n_occ == 0:
        raise GapClosedAtFermiLevel(f"no occupied states below fermi level {fermi_level}")
    if P.gap < min_gap:
        raise GapClosedAtFermiLevel(
            f"spectral gap {P.gap:.3e} at fermi level {fermi_level} below {min_gap:.0e}")
    if x_op is None or y_op is None:
        sx, sy = lat.standard_pair(geom)
        x_op = x_op if x_op is not None else sx
        y_op = y_op if y_op is not None else sy
    pxp = project_operator(P, x_op)
    pxp_dec = spectral.eigh(HermitianOperator(pxp.matrix))
    clusters, report = cluster_spectrum(pxp_dec.eigenvalues, gap_threshold, manual_merges)
    if not report.passed and not force:
        raise UniformGapFailed(
            f"projected-position spectrum has {report.n_clusters} cluster(s) at "
            f"threshold {report.gap_threshold}; pass force=True to continue")
    bands = band_projectors(P, pxp_dec, clusters)
    workers = max_workers if max_workers is not None else worker_count()
    if workers > 1 and len(bands) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_band = list(pool.map(
                lambda jb: gwf_from_band(jb[1], y_op, P.occupied_basis, jb[0]),
                enumerate(bands)))
    else:
        per_band = [gwf_from_band(b, y_op, P.occupied_basis, j) for j, b in enumerate(bands)]
    functions = [g for band in per_band for g in band]
    out = GwfSet(functions, clusters, report, P, pxp_dec.eigenvalues,
                 getattr(x_op, "label", lat.PositionLabel.CUSTOM),
                 getattr(y_op, "label", lat.PositionLabel.CUSTOM))
    Psi = out.psi_matrix()
    gram = Psi.conj().T @ Psi
    out.orthonormality_residual = float(np.abs(gram - np.eye(gram.shape[0])).max())
    out.completeness_residual = float(np.abs(Psi @ Psi.conj().T - P.projector()).max())
    return out


# ------------------------------------------------------- alternative operators

@dataclass(frozen=True)
class AltPositionReport:
    bounded_diff: float
    symmetric: bool


def spectral_norm_estimate(M: np.ndarray, iterations: int = 200, seed: int = 0) -> float:
    """Power-iteration lower bound on the spectral norm (converges from below)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    Mh = M.conj().T
    est = 0.0
    for _ in range(iterations):
        w = Mh @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        est = nw
    return float(np.sqrt(est))


def validate_alt_position(xhat, x) -> AltPositionReport:
    """Check an alternative position operator against a reference.

    The ladder accepts any Hermitian operator whose distance to a genuine
    position operator is bounded; this reports that distance (power-iteration
    spectral-norm estimate) and rejects non-Hermitian candidates.
    """
    dim = x.dim if hasattr(x, "dim") else np.asarray(x).shape[0]
    xd, xm = _position_values(x, dim)
    hd, hm = _position_values(xhat, dim)
    X = np.diag(xd) if xm is None else xm
    Xh = np.diag(hd) if hm is None else hm
    herm = float(np.abs(Xh - Xh.conj().T).max())
    scale = max(float(np.abs(Xh).max()), 1.0)
    if herm > 1e-10 * scale:
        raise NotHermitian(f"alternative position operator residual {herm:.3e}")
    diff = Xh - X
    if hm is None and xm is None:
        norm = float(np.abs(hd - xd).max())
    else:
        norm = spectral_norm_estimate(diff)
    return AltPositionReport(norm, True)
