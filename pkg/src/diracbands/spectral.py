"""Plane-wave Bloch Hamiltonians, dense eigensolves and band sweeps."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from . import textio
from .errors import ConvergenceError, LatticeMismatchError
from .lattice import LatticeBasis, PlaneWaveBasis, build_basis
from .potential import FourierPotential

#: default cutoff as a multiple of |k1|²; see README for the convergence check
DEFAULT_ECUT_FACTOR = 40.0
RESIDUAL_RTOL = 1e-8
THREADS_ENV = "DIRACBANDS_THREADS"


@dataclass(frozen=True)
class SpectralConfig:
    """Discretisation and tolerance knobs shared by the analysis drivers."""

    ecut_factor: float = DEFAULT_ECUT_FACTOR
    n_bands: int = 7
    cluster_rtol: float = 1e-7
    gap_rtol: float = 1e-2
    workers: int | None = None

    def ecut(self, lattice: LatticeBasis) -> float:
        return self.ecut_factor * lattice.k1_sq

    def basis(self, lattice: LatticeBasis) -> PlaneWaveBasis:
        return build_basis(lattice, self.ecut(lattice))


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return 1


@dataclass(frozen=True, eq=False)
class BlochHamiltonian:
    """``H(k)[a, b] = |k + G_a|² δ_ab + V̂_{G_a - G_b}`` on a plane-wave basis."""

    k: np.ndarray
    basis: PlaneWaveBasis
    matrix: np.ndarray

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def norm(self) -> float:
        # 1-norm bounds the spectral norm from above for Hermitian matrices
        return float(np.linalg.norm(self.matrix, 1))


def potential_matrix(V: FourierPotential, basis: PlaneWaveBasis) -> np.ndarray:
    """Dense matrix of multiplication by ``V`` in the basis ordering."""
    if not V.lattice.matches(basis.lattice):
        raise LatticeMismatchError("potential and basis are built on different lattices")
    idx = basis.indices
    d = idx[:, None, :] - idx[None, :, :]
    reach = int(np.max(np.abs(d))) if len(idx) else 0
    table = np.zeros((2 * reach + 1, 2 * reach + 1), dtype=complex)
    if len(V):
        m = V.index_array
        inside = np.all(np.abs(m) <= reach, axis=1)
        table[m[inside, 0] + reach, m[inside, 1] + reach] = V.value_array[inside]
    return table[d[..., 0] + reach, d[..., 1] + reach]


def kinetic_diagonal(k, basis: PlaneWaveBasis) -> np.ndarray:
    kg = np.asarray(k, dtype=float).reshape(1, 2) + basis.gvecs
    return np.einsum("ij,ij->i", kg, kg)


def assemble(V: FourierPotential, k, basis: PlaneWaveBasis,
             vmat: np.ndarray | None = None) -> BlochHamiltonian:
    """Bloch Hamiltonian at quasimomentum ``k``.

    ``vmat`` may carry a precomputed :func:`potential_matrix` so sweeps do not
    rebuild it at every k.
    """
    if vmat is None:
        vmat = potential_matrix(V, basis)
    mat = vmat.copy()
    mat[np.diag_indices_from(mat)] += kinetic_diagonal(k, basis)
    k = np.array(k, dtype=float).reshape(2)
    return BlochHamiltonian(k, basis, mat)


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Lowest eigenpairs; ``vectors[:, j]`` belongs to ``values[j]``."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # make the largest component of each column real and positive
    pivot = np.argmax(np.abs(vecs), axis=0)
    ref = vecs[pivot, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ref) / ref)[None, :]


def eigensolve(H: BlochHamiltonian | np.ndarray, n_lowest: int, vectors: bool = True) -> EigenSolution:
    """Lowest ``n_lowest`` eigenpairs of a Hermitian Bloch matrix.

    Raises
    ------
    ConvergenceError
        If LAPACK fails or a residual ``||Hv - λv||`` exceeds ``1e-8 ||H||``.
    """
    mat = H.matrix if isinstance(H, BlochHamiltonian) else np.asarray(H)
    n = mat.shape[0]
    if not 1 <= n_lowest <= n:
        raise ValueError(f"n_lowest={n_lowest} outside 1..{n}")
    try:
        vals, vecs = scipy.linalg.eigh(mat, subset_by_index=[0, n_lowest - 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}", np.inf) from exc
    resid = np.linalg.norm(mat @ vecs - vecs * vals[None, :], axis=0)
    bound = RESIDUAL_RTOL * max(float(np.linalg.norm(mat, 1)), 1e-300)
    worst = float(np.max(resid))
    if not worst <= bound:
        raise ConvergenceError(f"eigenpair residual {worst:.3e} exceeds {bound:.3e}", worst)
    if vectors:
        vecs = _fix_phases(vecs)
    else:
        vecs = np.empty((n, 0), dtype=complex)
    return EigenSolution(vals, vecs, resid)


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Lowest ``n_bands`` values per k sample, in path order."""

    samples: list
    bands: np.ndarray
    n_bands: int
    ecut: float

    @property
    def kpoints(self) -> np.ndarray:
        return np.array([k for k, _ in self.samples]).reshape(-1, 2)

    @property
    def arclen(self) -> np.ndarray:
        return np.array([s for _, s in self.samples])

    def rows(self):
        for i, ((k, s), vals) in enumerate(zip(self.samples, self.bands)):
            yield [i, float(k[0]), float(k[1]), float(s), *map(float, vals)]

    def header(self) -> list[str]:
        return ["index", "kx", "ky", "arclen"] + [f"band{j + 1}" for j in range(self.n_bands)]


def bands(V: FourierPotential, path, basis: PlaneWaveBasis, n_bands: int,
          workers: int | None = None) -> BandStructure:
    """Eigenvalue sweep along ``path``, a sequence of ``(k, arclen)`` pairs.

    k points may be solved concurrently; results always come back in path
    order, so the output does not depend on ``workers``.
    """
    path = [(np.asarray(k, dtype=float).reshape(2), float(s)) for k, s in path]
    vmat = potential_matrix(V, basis)
    if n_bands > len(basis):
        raise ValueError(f"requested {n_bands} bands from a basis of {len(basis)}")

    def solve(item):
        return eigensolve(assemble(V, item[0], basis, vmat), n_bands, vectors=False).values

    workers = workers or default_workers()
    if workers > 1 and len(path) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(solve, path))
    else:
        values = [solve(item) for item in path]
    return BandStructure(path, np.array(values).reshape(len(path), n_bands), n_bands, basis.ecut)


def write_bands_csv(bs: BandStructure, path) -> None:
    textio.write_csv(path, bs.header(), bs.rows())


def read_bands_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric rows of a band CSV; raises ValueError on schema mismatch."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty band CSV")
    header = rows[0]
    if header[:4] != ["index", "kx", "ky", "arclen"] or len(header) < 5:
        raise ValueError(f"unexpected band CSV header {header}")
    expected = [f"band{j + 1}" for j in range(len(header) - 4)]
    if header[4:] != expected:
        raise ValueError(f"unexpected band columns {header[4:]}")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(header))
    if not len(data):
        raise ValueError("band CSV has no rows")
    return header, data
