"""Lattice geometry, reciprocal bases and plane-wave index sets.

Reciprocal vectors are written ``G = m1*k1 + m2*k2`` and handled through
their integer Miller indices ``(m1, m2)``.  The 2π/3 rotation acts on indices
as ``(m1, m2) -> (-m2, m1 - m2)``, which is the index form of ``R k1 = k2``,
``R k2 = -k1 - k2``.  That identity holds for hexagonal lattices with
``u2 = -R* u1`` (for example :func:`hexagonal_lattice`); on other lattices
the index map is still well defined but is not a geometric rotation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateBasisError, EmptyBasisError

MillerIndex = tuple[int, int]

# relative width used to decide that two |G|^2 values belong to one shell
_SHELL_RTOL = 1e-10


def _vec(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite vector {v!r}")
    arr.setflags(write=False)
    return arr


def _cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def dual_basis(u1, u2) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(k1, k2)`` with ``u_i . k_j = 2π δ_ij``.

    Raises
    ------
    DegenerateBasisError
        If ``|u1 x u2| < 1e-12 |u1| |u2|``.
    """
    u1 = _vec(u1)
    u2 = _vec(u2)
    area = _cross(u1, u2)
    if abs(area) < 1e-12 * np.linalg.norm(u1) * np.linalg.norm(u2) or area == 0.0:
        raise DegenerateBasisError(f"collinear periods u1={u1.tolist()}, u2={u2.tolist()}")
    # rows of 2π (U^{-1})^T are the dual vectors
    k1 = 2 * np.pi * np.array([u2[1], -u2[0]]) / area
    k2 = 2 * np.pi * np.array([-u1[1], u1[0]]) / area
    return _vec(k1), _vec(k2)


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    """Direct, dual, sub-lattice and sub-dual periods of a 2D lattice.

    Build instances with :meth:`from_periods`; the remaining vectors are
    derived from ``u1`` and ``u2``.
    """

    u1: np.ndarray
    u2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    cell_area: float

    @classmethod
    def from_periods(cls, u1, u2) -> LatticeBasis:
        u1 = _vec(u1)
        u2 = _vec(u2)
        k1, k2 = dual_basis(u1, u2)
        v1, v2, q1, q2 = _sub_vectors(u1, u2, k1, k2)
        return cls(u1, u2, k1, k2, v1, v2, q1, q2, abs(_cross(u1, u2)))

    @property
    def reciprocal_matrix(self) -> np.ndarray:
        """2x2 array whose rows are ``k1`` and ``k2``."""
        return np.array([self.k1, self.k2])

    @property
    def k1_sq(self) -> float:
        return float(self.k1 @ self.k1)

    def gvec(self, m) -> np.ndarray:
        """Cartesian reciprocal vector(s) for index array ``m`` of shape (..., 2)."""
        return np.asarray(m, dtype=float) @ self.reciprocal_matrix

    def matches(self, other: LatticeBasis, rtol: float = 1e-12) -> bool:
        scale = max(np.linalg.norm(self.u1), np.linalg.norm(self.u2))
        return bool(
            np.allclose(self.u1, other.u1, rtol=0, atol=rtol * scale)
            and np.allclose(self.u2, other.u2, rtol=0, atol=rtol * scale)
        )

    def biorthogonality_residual(self) -> float:
        """max |u_i . k_j - 2π δ_ij|."""
        got = np.array([self.u1, self.u2]) @ self.reciprocal_matrix.T
        return float(np.max(np.abs(got - 2 * np.pi * np.eye(2))))


def _sub_vectors(u1, u2, k1, k2):
    v1 = (2 * u1 - u2) / 3
    v2 = (u1 + u2) / 3
    q1 = k1 - k2
    q2 = k1 + 2 * k2
    return _vec(v1), _vec(v2), _vec(q1), _vec(q2)


def super_cell_vectors(lattice: LatticeBasis):
    """Return ``(v1, v2, q1, q2)``: the finer periods and their duals."""
    return _sub_vectors(lattice.u1, lattice.u2, lattice.k1, lattice.k2)


def hexagonal_lattice() -> LatticeBasis:
    """The unit hexagonal lattice ``u1 = (√3/2, 1/2)``, ``u2 = (√3/2, -1/2)``."""
    s = math.sqrt(3.0) / 2
    return LatticeBasis.from_periods((s, 0.5), (s, -0.5))


# ---------------------------------------------------------------------------
# index arithmetic
# ---------------------------------------------------------------------------


def rotate_index(m) -> MillerIndex:
    m1, m2 = int(m[0]), int(m[1])
    return (-m2, m1 - m2)


def rotate_indices(m: np.ndarray) -> np.ndarray:
    """Vectorised :func:`rotate_index` on an integer array of shape (..., 2)."""
    m = np.asarray(m)
    return np.stack([-m[..., 1], m[..., 0] - m[..., 1]], axis=-1)


def orbit(m) -> list[MillerIndex]:
    """Distinct members of ``{m, Rm, R²m}`` in that order."""
    first = (int(m[0]), int(m[1]))
    if first == (0, 0):
        return [first]
    second = rotate_index(first)
    return [first, second, rotate_index(second)]


def canonical_representative(m) -> MillerIndex:
    """Ordering-least orbit member (|G|² ties are exact, so lexicographic)."""
    return min(orbit(m))


class TranslationSector(enum.Enum):
    """Eigenspace of translation by ``v1``, read off from ``(m1 + m2) mod 3``."""

    S = 0
    PLUS = 1
    MINUS = 2

    @property
    def opposite(self) -> TranslationSector:
        return _OPPOSITE[self]


_OPPOSITE = {
    TranslationSector.S: TranslationSector.S,
    TranslationSector.PLUS: TranslationSector.MINUS,
    TranslationSector.MINUS: TranslationSector.PLUS,
}


def classify_index(m) -> TranslationSector:
    # Python's % already lands in {0, 1, 2} for negative operands
    return TranslationSector((int(m[0]) + int(m[1])) % 3)


def classify_indices(m: np.ndarray) -> np.ndarray:
    """Sector codes (0, 1, 2) for an index array of shape (..., 2)."""
    m = np.asarray(m)
    return np.mod(m[..., 0] + m[..., 1], 3)


# ---------------------------------------------------------------------------
# plane-wave basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlaneWaveBasis:
    """All reciprocal indices with ``|G|² <= ecut``, in a fixed order.

    Columns are ordered by ascending ``|G|²``; indices on one shell are
    ordered lexicographically by ``(m1, m2)``.
    """

    indices: np.ndarray
    ecut: float
    lattice: LatticeBasis

    def __len__(self) -> int:
        return len(self.indices)

    @cached_property
    def gvecs(self) -> np.ndarray:
        return self.lattice.gvec(self.indices)

    @cached_property
    def gsq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.gvecs, self.gvecs)

    @cached_property
    def position(self) -> dict[MillerIndex, int]:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.indices)}

    @cached_property
    def inversion_permutation(self) -> np.ndarray:
        """``p[i]`` is the column of ``-indices[i]``."""
        return self._permutation(-self.indices)

    @cached_property
    def rotation_permutation(self) -> np.ndarray:
        """``p[i]`` is the column of ``rotate_index(indices[i])``."""
        return self._permutation(rotate_indices(self.indices))

    @cached_property
    def sectors(self) -> np.ndarray:
        return classify_indices(self.indices)

    def _permutation(self, images: np.ndarray) -> np.ndarray:
        pos = self.position
        try:
            return np.array([pos[(int(a), int(b))] for a, b in images], dtype=int)
        except KeyError as exc:
            raise ValueError(f"basis is not closed under the map (missing {exc.args[0]})") from None

    def rotation_matrix(self) -> np.ndarray:
        """Permutation matrix ``P`` with ``(P c)[Rm] = c[m]``."""
        n = len(self)
        p = np.zeros((n, n))
        p[self.rotation_permutation, np.arange(n)] = 1.0
        return p


def build_basis(lattice: LatticeBasis, ecut: float) -> PlaneWaveBasis:
    """Select every index with ``|m1 k1 + m2 k2|² <= ecut``.

    Shell membership is decided with a 1e-10 relative slack so that orbits
    whose ``|G|²`` agree mathematically are never split by rounding.
    """
    if not ecut >= 0:
        raise EmptyBasisError(f"ecut must be non-negative, got {ecut}")
    # |m_i| = |G . u_i| / 2π <= sqrt(ecut) |u_i| / 2π
    reach = [int(math.floor(math.sqrt(ecut) * np.linalg.norm(u) / (2 * np.pi))) + 1
             for u in (lattice.u1, lattice.u2)]
    r1 = np.arange(-reach[0], reach[0] + 1)
    r2 = np.arange(-reach[1], reach[1] + 1)
    grid = np.stack(np.meshgrid(r1, r2, indexing="ij"), axis=-1).reshape(-1, 2)
    g = lattice.gvec(grid)
    gsq = np.einsum("ij,ij->i", g, g)
    keep = gsq <= ecut * (1 + _SHELL_RTOL) + 1e-300
    grid, gsq = grid[keep], gsq[keep]
    order = _shell_order(grid, gsq)
    indices = grid[order].astype(int)
    indices.setflags(write=False)
    return PlaneWaveBasis(indices, float(ecut), lattice)


def _shell_order(idx: np.ndarray, gsq: np.ndarray) -> np.ndarray:
    rough = np.argsort(gsq, kind="stable")
    shell = np.zeros(len(rough), dtype=int)
    for pos in range(1, len(rough)):
        a, b = gsq[rough[pos - 1]], gsq[rough[pos]]
        shell[pos] = shell[pos - 1] + (b - a > _SHELL_RTOL * max(b, 1e-300))
    shell_of = np.empty_like(shell)
    shell_of[rough] = shell
    return np.lexsort((idx[:, 1], idx[:, 0], shell_of))


# ---------------------------------------------------------------------------
# k paths
# ---------------------------------------------------------------------------


def k_path(waypoints, samples_per_segment: int) -> list[tuple[np.ndarray, float]]:
    """Sample straight segments between consecutive waypoints.

    Each segment gets ``samples_per_segment`` uniformly spaced points
    including both ends; the point shared by two segments appears once.
    Returns ``(k, arclen)`` pairs with cumulative arclength.
    """
    pts = [np.asarray(w, dtype=float).reshape(2) for w in waypoints]
    if len(pts) < 2:
        raise ValueError("a k path needs at least two waypoints")
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    out = [(pts[0].copy(), 0.0)]
    start_len = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        seg_len = float(np.linalg.norm(b - a))
        n = samples_per_segment
        if n == 1:
            ts = np.array([1.0])
        else:
            ts = np.linspace(0.0, 1.0, n)[1:]
        for t in ts[:-1]:
            out.append((a + t * (b - a), start_len + t * seg_len))
        start_len += seg_len
        out.append((b.copy(), start_len))
    return out
