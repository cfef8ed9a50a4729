"""Dense Hermitian eigendecomposition and Fermi-level projections."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AmbiguousFilling, NotHermitian
from .lattice import HermitianOperator

HERMITICITY_RTOL = 1e-12
FILLING_ATOL = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues ascending; eigenvector column i pairs with eigenvalue i.

    Within a degenerate level the eigenvector choice is whatever the LAPACK
    run produced; downstream contracts are stated on subspaces only.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class FermiProjection:
    """Orthonormal basis of the occupied subspace below ``fermi_level``."""

    occupied_basis: np.ndarray   # dim x n_occ, orthonormal columns
    fermi_level: float
    gap: float

    @property
    def dim(self) -> int:
        return self.occupied_basis.shape[0]

    @property
    def n_occ(self) -> int:
        return self.occupied_basis.shape[1]

    def projector(self) -> np.ndarray:
        C = self.occupied_basis
        return C @ C.conj().T


class GapMeasurement(NamedTuple):
    value: float
    unbounded: bool


def _as_matrix(H) -> np.ndarray:
    if isinstance(H, HermitianOperator):
        return H.entries
    return np.asarray(H)


def eigh(H) -> SpectralDecomposition:
    """Full decomposition of a Hermitian matrix (LAPACK, backward stable).

    Accepts a HermitianOperator or a plain ndarray; raises NotHermitian when
    the input exceeds the relative Hermiticity tolerance.
    """
    M = _as_matrix(H)
    scale = np.abs(M).max()
    resid = np.abs(M - M.conj().T).max()
    if scale > 0 and resid > HERMITICITY_RTOL * scale:
        raise NotHermitian(f"Hermiticity residual {resid:.3e} exceeds {HERMITICITY_RTOL:.0e} * max|H|")
    w, V = np.linalg.eigh(M)
    return SpectralDecomposition(w, V)


def fermi_projection(dec: SpectralDecomposition, fermi_level: float) -> FermiProjection:
    """Occupied basis and gap at the given Fermi level.

    The Fermi level must not coincide with an eigenvalue (AmbiguousFilling);
    a level below or above the whole spectrum gives an empty or full basis
    with an infinite gap.
    """
    w = dec.eigenvalues
    if np.abs(w - fermi_level).min() < FILLING_ATOL:
        raise AmbiguousFilling(
            f"fermi level {fermi_level} within {FILLING_ATOL:.0e} of an eigenvalue")
    occ = w < fermi_level
    gap = spectral_gap(dec, fermi_level).value
    return FermiProjection(dec.eigenvectors[:, occ], float(fermi_level), gap)


def spectral_gap(dec: SpectralDecomposition, level: float) -> GapMeasurement:
    """Distance between the nearest eigenvalues below and above ``level``.

    Outside the spectrum span the gap is unbounded and reported as +inf.
    """
    w = dec.eigenvalues
    below = w[w < level]
    above = w[w > level]
    if below.size == 0 or above.size == 0:
        return GapMeasurement(math.inf, True)
    return GapMeasurement(float(above.min() - below.max()), False)


def phase_align(psi: np.ndarray) -> np.ndarray:
    """Rotate a state by a global phase so its largest component is real positive."""
    k = int(np.argmax(np.abs(psi)))
    a = psi[k]
    if a == 0:
        return psi.copy()
    return psi * (np.conj(a) / abs(a))
