"""Topological diagnostics for models periodic along the second lattice direction.

Three independent signals are computed: the winding of charge-center phase
curves (eigenvalue arguments of the occupied-restricted unitary-position
matrix per transverse momentum), the obstruction to mending parallel-
transported frames into a periodic gauge, and Berry phases from discrete
Kato transport.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice as lat
from .errors import (
    BranchContinuationFailed,
    DegenerateOverlapSpectrum,
    GridTooCoarse,
    IllConditionedOverlap,
    NonPeriodicInput,
    ProjectorRankChanged,
)
from .lattice import BoundaryCondition, HaldaneParams, LatticeGeometry

GAP_ARC_FACTOR = 1.5          # avoided arc must beat the sweep step by this much
OVERLAP_CONDITION_TOL = 1e-8


# ------------------------------------------------------------ Bloch families

@dataclass(frozen=True)
class BlochFamily:
    """Strip Hamiltonians H(k2) and their occupied bases on a uniform k2 grid."""

    k2_grid: np.ndarray
    blocks: list
    projections: list
    geom: LatticeGeometry
    fermi_level: float

    @property
    def block_dim(self) -> int:
        return 2 * self.geom.nx


def strip_hamiltonian(geom: LatticeGeometry, params: HaldaneParams, k2: float,
                      bc_x: BoundaryCondition = BoundaryCondition.PERIODIC) -> np.ndarray:
    """Transverse-momentum block of dimension 2 * nx.

    Hops with a transverse cell offset dn pick up a phase exp(i k2 dn); the
    first-direction boundary condition is applied to the strip as usual.
    """
    nx = geom.nx
    H = np.zeros((2 * nx, 2 * nx), dtype=complex)
    cp = params.t_prime * np.exp(1j * params.phi)
    blocks = ((lat.NN_TERMS, complex(params.t)), (lat.NNN_PLUS_TERMS, cp),
              (lat.NNN_MINUS_TERMS, np.conj(cp)))
    for m in range(nx):
        H[2 * m + lat.A, 2 * m + lat.A] += params.v
        H[2 * m + lat.B, 2 * m + lat.B] += -params.v
        for terms, amp in blocks:
            if amp == 0:
                continue
            for st, ss, dm, dn in terms:
                ms = m + dm
                if bc_x is BoundaryCondition.PERIODIC:
                    ms %= nx
                elif not 0 <= ms < nx:
                    continue
                H[2 * m + st, 2 * ms + ss] += amp * np.exp(1j * k2 * dn)
    return H


def bloch_blocks(geom: LatticeGeometry, params: HaldaneParams,
                 bc_x: BoundaryCondition = BoundaryCondition.PERIODIC,
                 disorder: lat.DisorderSpec = lat.CLEAN,
                 fermi_level: float = 0.0) -> BlochFamily:
    """Decompose a clean x2-periodic model into ny transverse-momentum blocks.

    The union of the block spectra reproduces the full Hamiltonian spectrum.
    """
    if disorder.sigma2 != 0.0:
        raise NonPeriodicInput("transverse Bloch decomposition requires a clean model")
    k2s = 2.0 * np.pi * np.arange(geom.ny) / geom.ny
    blocks, projections = [], []
    for k2 in k2s:
        Hk = strip_hamiltonian(geom, params, k2, bc_x)
        w, V = np.linalg.eigh(Hk)
        blocks.append(Hk)
        projections.append(V[:, w < fermi_level])
    return BlochFamily(k2s, blocks, projections, geom, fermi_level)


# -------------------------------------------------------- charge-center flow

@dataclass(frozen=True)
class ChargeCenterFlow:
    """Branch-continued phase curves with their integer spectral flow.

    ``phases`` has one row per occupied strip state and one column per k2
    sample plus the closure column at 2 pi.  ``winding`` is the total flow
    of the curve family around the circle, an exact integer for a closed
    family.  ``gapped`` reports whether some arc of the unit circle is
    avoided by every curve, judged against the largest single-step sweep so
    the verdict is insensitive to grid resolution.
    """

    k2_grid: np.ndarray
    phases: np.ndarray
    winding: int
    gapped: bool
    largest_arc: float
    max_step: float


def _wrap(x):
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def _continue_phases(phase_lists):
    """Cyclically match consecutive sorted phase sets into continuous curves.

    Works for families whose curves keep their circular ordering (no
    crossings), which holds for rigidly spaced charge-center spectra.
    Returns (curves, max_step) with curves shaped (n_curves, n_sets).
    """
    nb = len(phase_lists[0])
    curves = np.empty((nb, len(phase_lists)))
    curves[:, 0] = phase_lists[0]
    for j in range(1, len(phase_lists)):
        prev = curves[:, j - 1]
        new = phase_lists[j]
        best_cost, best = None, None
        for shift in range(nb):
            cand = np.roll(new, -shift)
            d = _wrap(cand - prev)
            cost = float(np.abs(d).sum())
            if best_cost is None or cost < best_cost:
                best_cost, best = cost, prev + d
        curves[:, j] = best
    steps = np.abs(np.diff(curves, axis=1))
    if steps.size and steps.max() >= np.pi:
        raise BranchContinuationFailed(
            f"phase step {steps.max():.3f} >= pi; refine the transverse grid")
    return curves, float(steps.max()) if steps.size else 0.0


def _largest_arc(phases: np.ndarray) -> tuple[float, float]:
    """Largest empty arc (size, midpoint angle) of a pooled phase set.

    The midpoint is left unwrapped (in [0, 3 pi)) so that the window
    (mid - 2 pi, mid] contains every occupied phase with margin.
    """
    ph = np.sort(np.mod(phases, 2.0 * np.pi))
    gaps = np.diff(np.concatenate([ph, [ph[0] + 2.0 * np.pi]]))
    k = int(np.argmax(gaps))
    return float(gaps[k]), float(ph[k] + gaps[k] / 2.0)


def charge_center_flow(fam: BlochFamily, X: lat.PositionOperator | None = None,
                       M: int | None = None) -> ChargeCenterFlow:
    """Flow of the occupied-restricted unitary-position spectrum along k2.

    For each transverse momentum the matrix C(k2)^dag diag(exp(2 pi i X / M))
    C(k2) is formed, its eigenvalue arguments are branch-continued in k2, and
    the family's total winding is reported together with the avoided-arc
    verdict.  M must equal the strip length nx.
    """
    nx = fam.geom.nx
    if M is None:
        M = nx
    if M != nx:
        raise ValueError(f"unitary-position modulus M={M} must equal nx={nx}")
    if X is None:
        xdiag = np.repeat(np.arange(nx, dtype=float), 2)
    else:
        xdiag = X.diag
        if xdiag.shape[0] != 2 * nx:
            raise NonPeriodicInput(f"strip position operator must have length {2 * nx}")
    xph = np.exp(2j * np.pi * xdiag / M)
    phase_lists = []
    for C in fam.projections:
        U = (C.conj().T * xph) @ C
        lam = np.linalg.eigvals(U)
        if np.abs(lam).min() < OVERLAP_CONDITION_TOL:
            raise IllConditionedOverlap(
                f"unitary-position compression nearly singular: |lambda|min = {np.abs(lam).min():.2e}")
        phase_lists.append(np.sort(np.angle(lam)))
    closed = phase_lists + [phase_lists[0]]
    curves, max_step = _continue_phases(closed)
    total = float((curves[:, -1] - curves[:, 0]).sum() / (2.0 * np.pi))
    winding = _exact_winding(total)
    arc, _ = _largest_arc(np.concatenate(phase_lists))
    gapped = arc > GAP_ARC_FACTOR * max_step
    k2_ext = np.concatenate([fam.k2_grid, [2.0 * np.pi]])
    return ChargeCenterFlow(k2_ext, curves, winding, gapped, arc, max_step)


def _exact_winding(value: float) -> int:
    err = abs(value - round(value))
    if err >= 0.05:
        raise BranchContinuationFailed(f"winding {value:.4f} is {err:.3f} from an integer")
    return int(round(value))


def winding_number(phases: np.ndarray) -> int:
    """Integer winding of a single branch-continued phase curve."""
    phases = np.asarray(phases, dtype=float)
    steps = np.abs(np.diff(phases))
    if steps.size and steps.max() >= np.pi:
        raise BranchContinuationFailed(f"curve step {steps.max():.3f} >= pi; not continued")
    return _exact_winding((phases[-1] - phases[0]) / (2.0 * np.pi))


# --------------------------------------------------------- parallel transport

@dataclass(frozen=True)
class TransportFrame:
    """Orthonormal frames transported along a projector path."""

    frames: list
    loop_unitary: np.ndarray


def transport_frame(projectors, end_map: np.ndarray | None = None) -> TransportFrame:
    """Discrete Kato transport: project the previous frame and re-orthonormalize.

    Each step applies the next projector to the current frame and takes the
    unitary factor of the polar decomposition, which keeps successive
    overlaps Hermitian positive.  For a closed path (last projector equal to
    the first, possibly after ``end_map``) the loop unitary compares the
    transported end frame to the start.
    """
    P0 = projectors[0]
    rank = int(round(float(np.trace(P0).real)))
    if rank < 1:
        raise ProjectorRankChanged("initial projector has rank 0")
    w, V = np.linalg.eigh(P0)
    frame = V[:, -rank:]
    frames = [frame]
    prev = P0
    for P in projectors[1:]:
        r = int(round(float(np.trace(P).real)))
        if r != rank:
            raise ProjectorRankChanged(f"projector rank changed {rank} -> {r}")
        dist = float(np.linalg.norm(P - prev, 2))
        if dist >= 1.0:
            raise GridTooCoarse(f"projector step {dist:.3f} >= 1; refine the path")
        A = P @ frame
        U, s, Wh = np.linalg.svd(A, full_matrices=False)
        if s.min() < 1e-8:
            raise ProjectorRankChanged(f"transport step lost rank: sigma_min = {s.min():.2e}")
        frame = U @ Wh
        frames.append(frame)
        prev = P
    end = frames[-1] if end_map is None else end_map @ frames[-1]
    loop = frames[0].conj().T @ end
    return TransportFrame(frames, loop)


# ------------------------------------------------- cell Bloch states / Berry

def cell_bloch_hamiltonian(params: HaldaneParams, k1: float, k2: float) -> np.ndarray:
    """Fully momentum-resolved 2 x 2 cell Hamiltonian, exactly 2 pi periodic."""
    h = np.zeros((2, 2), dtype=complex)
    cp = params.t_prime * np.exp(1j * params.phi)
    blocks = ((lat.NN_TERMS, complex(params.t)), (lat.NNN_PLUS_TERMS, cp),
              (lat.NNN_MINUS_TERMS, np.conj(cp)))
    h[lat.A, lat.A] += params.v
    h[lat.B, lat.B] += -params.v
    for terms, amp in blocks:
        for st, ss, dm, dn in terms:
            h[st, ss] += amp * np.exp(1j * (k1 * dm + k2 * dn))
    return h


def occupied_cell_projectors(params: HaldaneParams, k2: float, n_k1: int,
                             fermi_level: float = 0.0):
    """Occupied-band projectors around a closed k1 loop (endpoint reused)."""
    k1s = np.linspace(0.0, 2.0 * np.pi, n_k1)
    Ps = []
    for k1 in k1s[:-1]:
        w, V = np.linalg.eigh(cell_bloch_hamiltonian(params, k1, k2))
        occ = V[:, w < fermi_level]
        Ps.append(occ @ occ.conj().T)
    Ps.append(Ps[0])
    return Ps


def transport_berry_phase(params: HaldaneParams, k2: float, n_k1: int = 241,
                          fermi_level: float = 0.0) -> float:
    """Berry phase of the occupied band around the k1 loop via Kato transport."""
    tf = transport_frame(occupied_cell_projectors(params, k2, n_k1, fermi_level))
    return float(np.angle(np.linalg.det(tf.loop_unitary)))


def berry_loop_unitaries(params: HaldaneParams, n_k2: int = 24, n_k1: int = 241,
                         fermi_level: float = 0.0):
    """Stack of k1-loop transport unitaries over a uniform k2 grid."""
    k2s = 2.0 * np.pi * np.arange(n_k2) / n_k2
    Us = [transport_frame(occupied_cell_projectors(params, k2, n_k1, fermi_level)).loop_unitary
          for k2 in k2s]
    return k2s, np.array(Us)


# ----------------------------------------------------------------- mending

@dataclass(frozen=True)
class MendResult:
    """Outcome of the periodic-frame mending attempt.

    ``obstructed`` is a legitimate result, not an error: it means the loop
    unitaries' eigenphases sweep the whole unit circle, so no continuous
    logarithm branch exists.  When mending succeeds, ``h`` holds the
    Hermitian logarithms - i log U(k2) cut at ``branch_point`` and
    ``mending_phase`` evaluates the gauge factor exp(-i k1 h / (2 pi)).
    """

    obstructed: bool
    coverage_gap: float
    max_step: float
    branch_point: complex | None = None
    h: np.ndarray | None = None

    def mending_phase(self, k1: float, index: int) -> np.ndarray:
        if self.obstructed:
            raise ValueError("no mending phases for an obstructed family")
        w, Q = np.linalg.eigh(self.h[index])
        return (Q * np.exp(-1j * k1 * w / (2.0 * np.pi))) @ Q.conj().T


def mend_periodic(U_family: np.ndarray, unitary_tol: float = 1e-8,
                  condition_limit: float = 1e8) -> MendResult:
    """Attempt a continuous periodic logarithm of a loop-unitary family.

    Looks for a point of the unit circle avoided by every eigenphase (the
    midpoint of the largest empty arc, judged genuine when it exceeds the
    largest single-step sweep).  If found, returns Hermitian matrices
    h(k2) = -i log U(k2) with the branch cut there; otherwise reports the
    obstruction with the measured coverage gap.  Families whose eigenvector
    matrices are too ill-conditioned to take a reliable logarithm (nearly
    defective numerics around degenerate eigenphases) are rejected.
    """
    U_family = np.asarray(U_family)
    if U_family.ndim == 1:
        U_family = U_family.reshape(-1, 1, 1)
    n_k2, N, _ = U_family.shape
    phase_lists = []
    eig_pairs = []
    for U in U_family:
        resid = np.abs(U.conj().T @ U - np.eye(N)).max()
        if resid > unitary_tol:
            raise IllConditionedOverlap(f"loop unitary residual {resid:.2e} exceeds {unitary_tol:.0e}")
        lam, Q = np.linalg.eig(U)
        if np.linalg.cond(Q) > condition_limit:
            raise DegenerateOverlapSpectrum(
                "loop-unitary eigenvectors ill-conditioned on the grid; mending skipped")
        ang = np.angle(lam)
        order = np.argsort(ang)
        eig_pairs.append((lam[order], Q[:, order]))
        phase_lists.append(ang[order])
    closed = phase_lists + [phase_lists[0]]
    _, max_step = _continue_phases(closed)
    arc, mid = _largest_arc(np.concatenate(phase_lists))
    if arc <= GAP_ARC_FACTOR * max_step:
        return MendResult(True, arc, max_step)
    lam_branch = complex(np.exp(1j * mid))
    hs = np.empty((n_k2, N, N), dtype=complex)
    for i, (lam, Q) in enumerate(eig_pairs):
        theta = mid - np.mod(mid - np.angle(lam), 2.0 * np.pi)  # branch in (mid - 2 pi, mid]
        Qinv = np.linalg.inv(Q)
        h = (Q * theta) @ Qinv
        hs[i] = 0.5 * (h + h.conj().T)
    drift = max(float(np.abs(hs[(i + 1) % n_k2] - hs[i]).max()) for i in range(n_k2))
    if drift >= np.pi:
        raise BranchContinuationFailed(f"logarithm family jumps by {drift:.3f} >= pi")
    return MendResult(False, arc, max_step, lam_branch, hs)


def mend_from_params(params: HaldaneParams, n_k2: int = 24, n_k1: int = 121,
                     fermi_level: float = 0.0) -> MendResult:
    """Mending verdict for a Haldane model from its Berry loop unitaries."""
    _, Us = berry_loop_unitaries(params, n_k2, n_k1, fermi_level)
    return mend_periodic(Us)
