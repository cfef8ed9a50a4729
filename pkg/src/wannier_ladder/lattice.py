"""Haldane-model Hamiltonians and position operators on a finite honeycomb lattice.

The lattice is an ``nx x ny`` grid of two-site cells (sublattices A and B).
Sites are flattened as ``index = 2 * (n * nx + m) + s`` with ``m`` the cell
coordinate along the first lattice vector, ``n`` along the second, and
``s in {0 (A), 1 (B)}``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidGeometry

A, B = 0, 1

# Directed hopping terms (s_target, s_source, dm, dn): an entry contributes
# amplitude to H[(m, n, s_target), (m + dm, n + dn, s_source)].  The three
# blocks carry amplitudes t, t'*exp(+i*phi), t'*exp(-i*phi) respectively.
NN_TERMS = (
    (A, B, 0, 0), (A, B, 0, -1), (A, B, -1, 0),
    (B, A, 0, 0), (B, A, +1, 0), (B, A, 0, +1),
)
NNN_PLUS_TERMS = (
    (A, A, 0, +1), (A, A, -1, 0), (A, A, +1, -1),
    (B, B, 0, -1), (B, B, +1, 0), (B, B, -1, +1),
)
NNN_MINUS_TERMS = (
    (A, A, 0, -1), (A, A, +1, 0), (A, A, -1, +1),
    (B, B, 0, +1), (B, B, -1, 0), (B, B, +1, -1),
)


class BoundaryCondition(enum.Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


class PositionLabel(enum.Enum):
    X_STANDARD = "x_standard"
    Y_STANDARD = "y_standard"
    X_ROTATED = "x_rotated"
    Y_ROTATED = "y_rotated"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LatticeGeometry:
    """Cell counts of the finite lattice; two orbitals per cell."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvalidGeometry(f"lattice must have nx, ny >= 1, got {self.nx} x {self.ny}")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def dim(self) -> int:
        return 2 * self.nx * self.ny

    def site_index(self, m: int, n: int, s: int) -> int:
        return 2 * (n * self.nx + m) + s

    def site_of(self, index: int):
        cell, s = divmod(index, 2)
        n, m = divmod(cell, self.nx)
        return m, n, s

    def cell_coordinates(self):
        """Per-site arrays (m, n) of length dim, in flat-index order."""
        cells = np.arange(self.n_cells)
        m = np.repeat(cells % self.nx, 2)
        n = np.repeat(cells // self.nx, 2)
        return m, n


@dataclass(frozen=True)
class HaldaneParams:
    """Hopping and onsite parameters: nearest-neighbor amplitude ``t``,
    next-nearest magnitude ``t_prime`` and phase ``phi``, staggered onsite
    potential ``+v`` on A and ``-v`` on B."""

    t: float
    t_prime: float
    v: float
    phi: float

    def __post_init__(self):
        for name in ("t", "t_prime", "v", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"parameter {name} must be finite")


def topological_predicate(params: HaldaneParams) -> bool:
    """Analytic phase test: nonzero Chern number iff |v| < 3*sqrt(3)*|t' sin(phi)|."""
    return abs(params.v) < 3.0 * math.sqrt(3.0) * abs(params.t_prime * math.sin(params.phi))


# ------------------------------------------------------------------ disorder

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class DisorderSpec:
    """Onsite Gaussian disorder with variance ``sigma2``.

    The realization is produced by a counter-based generator keyed by
    (seed, m, n): two splitmix64 streams feed a Box-Muller transform, so
    each cell's value is independent of traversal order and reproducible.
    """

    sigma2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if not (0 <= self.seed <= _MASK64):
            raise ValueError("seed must fit in 64 bits")

    def onsite_field(self, geom: LatticeGeometry) -> np.ndarray:
        """Per-cell potential shifts eta(m, n), shape (nx, ny)."""
        eta = np.zeros((geom.nx, geom.ny))
        if self.sigma2 == 0.0:
            return eta
        sigma = math.sqrt(self.sigma2)
        for m in range(geom.nx):
            for n in range(geom.ny):
                k = _splitmix64(_splitmix64(_splitmix64(self.seed) ^ m) ^ ((n << 32) | n))
                u1 = ((_splitmix64(k) >> 11) + 1) / (1 << 53)          # (0, 1]
                u2 = (_splitmix64(k ^ 0xD1B54A32D192ED03) >> 11) / (1 << 53)
                eta[m, n] = sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return eta


CLEAN = DisorderSpec(0.0, 0)


# ------------------------------------------------------------------ operators

@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def hermiticity_residual(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())


@dataclass(frozen=True)
class PositionOperator:
    """Diagonal position operator with a labeled construction."""

    diag: np.ndarray
    label: PositionLabel

    @property
    def dim(self) -> int:
        return self.diag.shape[0]


def _normalize_bc(bc) -> tuple[BoundaryCondition, BoundaryCondition]:
    if isinstance(bc, BoundaryCondition):
        return bc, bc
    bcx, bcy = bc
    return bcx, bcy


def build_haldane(geom: LatticeGeometry, params: HaldaneParams, bc,
                  disorder: DisorderSpec = CLEAN) -> HermitianOperator:
    """Assemble the dense Haldane Hamiltonian.

    ``bc`` is a single BoundaryCondition applied to both directions or a
    pair (bc_x, bc_y).  Under DIRICHLET out-of-range hops are dropped;
    under PERIODIC cell indices wrap.  Onsite energies are ``+v + eta`` on
    A sites and ``-v + eta`` on B sites, with ``eta`` the per-cell disorder
    realization.
    """
    bcx, bcy = _normalize_bc(bc)
    nx, ny = geom.nx, geom.ny
    H = np.zeros((geom.dim, geom.dim), dtype=complex)
    cp = params.t_prime * np.exp(1j * params.phi)
    blocks = ((NN_TERMS, complex(params.t)), (NNN_PLUS_TERMS, cp), (NNN_MINUS_TERMS, np.conj(cp)))
    eta = disorder.onsite_field(geom)
    for m in range(nx):
        for n in range(ny):
            H[geom.site_index(m, n, A), geom.site_index(m, n, A)] += params.v + eta[m, n]
            H[geom.site_index(m, n, B), geom.site_index(m, n, B)] += -params.v + eta[m, n]
            for terms, amp in blocks:
                if amp == 0:
                    continue
                for st, ss, dm, dn in terms:
                    ms, ns = m + dm, n + dn
                    if bcx is BoundaryCondition.PERIODIC:
                        ms %= nx
                    elif not 0 <= ms < nx:
                        continue
                    if bcy is BoundaryCondition.PERIODIC:
                        ns %= ny
                    elif not 0 <= ns < ny:
                        continue
                    H[geom.site_index(m, n, st), geom.site_index(ms, ns, ss)] += amp
    return HermitianOperator(H)


def build_position(geom: LatticeGeometry, label: PositionLabel,
                   diag: np.ndarray | None = None) -> PositionOperator:
    """Diagonal position operator for the given label.

    Standard operators assign the cell coordinate (m or n) to both orbitals
    of a cell; rotated ones are (X - Y)/sqrt(2) and (X + Y)/sqrt(2).  For
    CUSTOM the caller supplies the diagonal.
    """
    m, n = geom.cell_coordinates()
    if label is PositionLabel.X_STANDARD:
        values = m.astype(float)
    elif label is PositionLabel.Y_STANDARD:
        values = n.astype(float)
    elif label is PositionLabel.X_ROTATED:
        values = (m - n) / math.sqrt(2.0)
    elif label is PositionLabel.Y_ROTATED:
        values = (m + n) / math.sqrt(2.0)
    elif label is PositionLabel.CUSTOM:
        if diag is None:
            raise DimensionMismatch("CUSTOM position operator requires an explicit diagonal")
        values = np.asarray(diag, dtype=float)
        if values.shape != (geom.dim,):
            raise DimensionMismatch(
                f"custom diagonal has length {values.shape}, expected ({geom.dim},)")
    else:  # pragma: no cover
        raise ValueError(f"unknown position label {label}")
    return PositionOperator(values, label)


def standard_pair(geom: LatticeGeometry):
    return (build_position(geom, PositionLabel.X_STANDARD),
            build_position(geom, PositionLabel.Y_STANDARD))


def rotated_pair(geom: LatticeGeometry):
    return (build_position(geom, PositionLabel.X_ROTATED),
            build_position(geom, PositionLabel.Y_ROTATED))


def cell_center(center_a: float, center_b: float, x_label: PositionLabel, y_label: PositionLabel):
    """Invert a (center_a, center_b) pair back to cell coordinates (m, n)."""
    if x_label is PositionLabel.X_STANDARD and y_label is PositionLabel.Y_STANDARD:
        return center_a, center_b
    if x_label is PositionLabel.X_ROTATED and y_label is PositionLabel.Y_ROTATED:
        s = math.sqrt(2.0)
        return (center_a + center_b) / s, (center_b - center_a) / s
    return None


def translation_operator(geom: LatticeGeometry, axis: int) -> np.ndarray:
    """Permutation matrix shifting all cells by one step along axis 0 (m) or 1 (n)."""
    T = np.zeros((geom.dim, geom.dim))
    for m in range(geom.nx):
        for n in range(geom.ny):
            mt = (m + 1) % geom.nx if axis == 0 else m
            nt = (n + 1) % geom.ny if axis == 1 else n
            for s in (A, B):
                T[geom.site_index(mt, nt, s), geom.site_index(m, n, s)] = 1.0
    return T


def translate_state(psi: np.ndarray, geom: LatticeGeometry, axis: int) -> np.ndarray:
    """Shift a state by one cell along the given axis (periodic wrap)."""
    out = np.empty_like(psi)
    for m in range(geom.nx):
        for n in range(geom.ny):
            ms = (m - 1) % geom.nx if axis == 0 else m
            ns = (n - 1) % geom.ny if axis == 1 else n
            for s in (A, B):
                out[geom.site_index(m, n, s)] = psi[geom.site_index(ms, ns, s)]
    return out
