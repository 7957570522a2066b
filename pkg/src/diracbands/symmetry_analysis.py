"""Γ-point symmetry sectors, sector eigenproblems and the Dirac invariants.

At k = 0 the periodic functions split into nine sectors labelled by the
translation sector σ (S, PLUS, MINUS; see :class:`TranslationSector`) and
the rotation eigenvalue ξ ∈ {1, τ, τ̄} with τ = exp(2πi/3).  A sector column
lives on one rotation orbit ``(m, Rm, R²m)`` with weights ``(1, ξ̄, ξ)/√3``.

All inner products are taken in coefficient space and are conjugate-linear
in the first slot, so plane waves are orthonormal.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSectorError,
    EmptySectorError,
    PerturbationClassError,
    SymmetryViolationError,
)
from .lattice import PlaneWaveBasis, TranslationSector, canonical_representative, orbit
from .potential import FourierPotential, check_honeycomb
from .spectral import potential_matrix, kinetic_diagonal

TAU = cmath.exp(2j * math.pi / 3)


class RotationSector(enum.Enum):
    ONE = "1"
    TAU = "tau"
    TAUBAR = "taubar"

    @property
    def xi(self) -> complex:
        return {"1": 1.0 + 0j, "tau": TAU, "taubar": TAU.conjugate()}[self.value]

    @property
    def conjugate(self) -> RotationSector:
        return {RotationSector.ONE: RotationSector.ONE,
                RotationSector.TAU: RotationSector.TAUBAR,
                RotationSector.TAUBAR: RotationSector.TAU}[self]


ALL_SECTORS = [(s, x) for s in TranslationSector for x in RotationSector]


def sector_label(sigma: TranslationSector, xi: RotationSector) -> str:
    return f"{sigma.name},{xi.value}"


# ---------------------------------------------------------------------------
# symmetry-adapted bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetrizedBasis:
    """Orthonormal columns spanning one (σ, ξ) sector of a plane-wave basis."""

    sigma: TranslationSector
    xi: RotationSector
    columns: np.ndarray
    orbits: list

    @property
    def size(self) -> int:
        return self.columns.shape[1]


def _sector_orbits(basis: PlaneWaveBasis, sigma: TranslationSector) -> list:
    seen = set()
    out = []
    for i, m in enumerate(map(tuple, basis.indices.tolist())):
        if basis.sectors[i] != sigma.value or m in seen:
            continue
        rep = canonical_representative(m)
        members = orbit(rep)
        seen.update(members)
        out.append(members)
    return out


def sector_basis(basis: PlaneWaveBasis, sigma: TranslationSector, xi: RotationSector) -> SymmetrizedBasis:
    """One column per rotation orbit of sector ``sigma`` with weights ``(1, ξ̄, ξ)/√3``.

    The ``(0, 0)`` singleton belongs to ``(S, 1)`` only.
    """
    pos = basis.position
    weights = np.array([1.0, np.conj(xi.xi), xi.xi]) / math.sqrt(3.0)
    cols = []
    orbits = []
    for members in _sector_orbits(basis, sigma):
        col = np.zeros(len(basis), dtype=complex)
        if len(members) == 1:
            if xi is not RotationSector.ONE:
                continue
            col[pos[members[0]]] = 1.0
        else:
            col[[pos[m] for m in members]] = weights
        cols.append(col)
        orbits.append(members)
    columns = np.array(cols).T.reshape(len(basis), len(cols))
    return SymmetrizedBasis(sigma, xi, columns, orbits)


# ---------------------------------------------------------------------------
# Γ-point eigenfunctions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GammaEigenfunction:
    """Plane-wave coefficients of a Γ-point eigenfunction, in basis order."""

    basis: PlaneWaveBasis
    coeffs: np.ndarray
    value: float
    sector: tuple | None = None

    def inner(self, other: GammaEigenfunction) -> complex:
        return complex(np.vdot(self.coeffs, other.coeffs))

    def gradient_inner(self, other: GammaEigenfunction) -> np.ndarray:
        """``<self, ∇ other>`` as a complex 2-vector."""
        return gradient_inner(self.basis, self.coeffs, other.coeffs)

    def with_coeffs(self, coeffs, sector) -> GammaEigenfunction:
        return GammaEigenfunction(self.basis, coeffs, self.value, sector)


def gradient_inner(basis: PlaneWaveBasis, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 1j * (np.conj(a) * b) @ basis.gvecs


def sector_spectrum(V: FourierPotential, sigma: TranslationSector, xi: RotationSector,
                    basis: PlaneWaveBasis, n: int | None = None,
                    vmat: np.ndarray | None = None) -> list[tuple[float, GammaEigenfunction]]:
    """Eigenpairs of ``B† H(0) B`` for one sector, lifted back to plane waves."""
    sb = sector_basis(basis, sigma, xi)
    if sb.size == 0:
        raise EmptySectorError(f"sector {sector_label(sigma, xi)} is empty in this basis")
    if vmat is None:
        vmat = potential_matrix(V, basis)
    h0 = vmat.copy()
    h0[np.diag_indices_from(h0)] += kinetic_diagonal((0.0, 0.0), basis)
    block = sb.columns.conj().T @ h0 @ sb.columns
    block = 0.5 * (block + block.conj().T)
    vals, vecs = np.linalg.eigh(block)
    n = sb.size if n is None else min(n, sb.size)
    out = []
    for j in range(n):
        coeffs = sb.columns @ vecs[:, j]
        out.append((float(vals[j]), GammaEigenfunction(basis, coeffs, float(vals[j]), (sigma, xi))))
    return out


def all_sector_spectra(V: FourierPotential, basis: PlaneWaveBasis,
                       vmat: np.ndarray | None = None) -> dict:
    """Sector values for all nine sectors; empty sectors map to an empty array."""
    if vmat is None:
        vmat = potential_matrix(V, basis)
    out = {}
    for sigma, xi in ALL_SECTORS:
        try:
            out[(sigma, xi)] = np.array([v for v, _ in sector_spectrum(V, sigma, xi, basis, vmat=vmat)])
        except EmptySectorError:
            out[(sigma, xi)] = np.array([])
    return out


def classify_eigenvector(v, basis: PlaneWaveBasis) -> dict:
    """Squared norms of the projections of ``v`` onto the nine sectors."""
    v = np.asarray(v, dtype=complex)
    out = {}
    for sigma, xi in ALL_SECTORS:
        sb = sector_basis(basis, sigma, xi)
        out[(sigma, xi)] = float(np.sum(np.abs(sb.columns.conj().T @ v) ** 2)) if sb.size else 0.0
    return out


def symmetry_partners(phi1: GammaEigenfunction):
    """``(PC φ1, P φ1, C φ1)`` via coefficient rules.

    PC: a_G -> conj(a_G); P: a_G -> a_{-G}; C: a_G -> conj(a_{-G}).
    """
    inv = phi1.basis.inversion_permutation
    a = phi1.coeffs
    sector = phi1.sector
    if sector is not None:
        sigma, xi = sector
        s2, s3, s4 = (sigma, xi.conjugate), (sigma.opposite, xi), (sigma.opposite, xi.conjugate)
    else:
        s2 = s3 = s4 = None
    return (phi1.with_coeffs(np.conj(a), s2),
            phi1.with_coeffs(a[inv], s3),
            phi1.with_coeffs(np.conj(a[inv]), s4))


# ---------------------------------------------------------------------------
# Dirac invariants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiracInvariants:
    v_sharp: np.ndarray
    v_F: float
    c_sharp: float | None = None
    theta: float = field(default=0.0, repr=False)


def v_sharp(phi1: GammaEigenfunction) -> DiracInvariants:
    """``v♯ = <φ1, ∇ PC φ1> = i Σ_G G conj(a_G)²`` and ``v_F = √2 |v♯|``."""
    a = phi1.coeffs
    vs = 1j * (np.conj(a) ** 2) @ phi1.basis.gvecs
    vf = math.sqrt(2.0) * float(np.linalg.norm(vs))
    theta = float(np.angle(vs[0])) if abs(vs[0]) > 0 else 0.0
    return DiracInvariants(vs, vf, None, theta)


def check_perturbation_class(W: FourierPotential):
    """Raise unless ``W`` is real, even and rotation invariant."""
    rep = check_honeycomb(W)
    if not (rep.is_real and rep.is_even and rep.is_R_invariant):
        raise PerturbationClassError(
            f"perturbation must be real, even and R-invariant (residuals "
            f"{rep.real_residual:.2e}, {rep.even_residual:.2e}, {rep.rotation_residual:.2e})")
    return rep


def c_sharp(phi1: GammaEigenfunction, phi3: GammaEigenfunction, W: FourierPotential,
            wmat: np.ndarray | None = None) -> float:
    """``c♯ = <φ1, W φ3>``; symmetry forces it to be real.

    Components of ``W`` in the S sector contribute nothing because
    multiplication by them keeps φ3 inside the MINUS sector.
    """
    check_perturbation_class(W)
    if wmat is None:
        wmat = potential_matrix(W, phi1.basis)
    val = complex(np.vdot(phi1.coeffs, wmat @ phi3.coeffs))
    if abs(val.imag) > 1e-8 * abs(val) and abs(val.imag) > 1e-13 * max(W.max_abs, 1.0):
        raise SymmetryViolationError(f"c_sharp has imaginary part {val.imag:.3e} (value {val})")
    return val.real


def rotation_star_eigenvalue(v) -> tuple[complex, float]:
    """``ζ`` minimising ``|R* v - ζ v|`` and the relative residual."""
    v = np.asarray(v, dtype=complex)
    c, s = math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)
    rstar = np.array([[c, -s], [s, c]])
    rv = rstar @ v
    nv = float(np.vdot(v, v).real)
    zeta = complex(np.vdot(v, rv) / nv)
    return zeta, float(np.linalg.norm(rv - zeta * v) / math.sqrt(nv))


@dataclass(frozen=True, eq=False)
class DiracAnalysis:
    """Everything the Γ-point analysis reports about one Dirac quartet."""

    mu_D: float
    phi1: GammaEigenfunction
    invariants: DiracInvariants
    sector_gaps: dict
    sector_weights: dict

    def diagnostics(self) -> dict:
        vs = self.invariants.v_sharp
        return {
            "mu_D": self.mu_D,
            "sector_gaps": self.sector_gaps,
            "v_sharp": [vs[0].real, vs[0].imag, vs[1].real, vs[1].imag],
            "v_F": self.invariants.v_F,
            "c_sharp": self.invariants.c_sharp,
            "sector_weights": self.sector_weights,
        }


def dirac_eigenfunction(V: FourierPotential, basis: PlaneWaveBasis, mu_target: float | None = None,
                        vmat: np.ndarray | None = None, simple_rtol: float = 1e-9) -> GammaEigenfunction:
    """The (PLUS, τ) sector eigenfunction φ1 at the Dirac energy.

    Picks the sector eigenvalue closest to ``mu_target`` (the lowest one when
    no target is given) and insists it is simple inside its sector.
    """
    spec = sector_spectrum(V, TranslationSector.PLUS, RotationSector.TAU, basis, vmat=vmat)
    vals = np.array([v for v, _ in spec])
    j = 0 if mu_target is None else int(np.argmin(np.abs(vals - mu_target)))
    scale = max(abs(vals[j]), basis.lattice.k1_sq)
    neighbours = np.delete(vals, j)
    gap = float(np.min(np.abs(neighbours - vals[j]))) if len(neighbours) else math.inf
    if gap < simple_rtol * scale:
        raise DegenerateSectorError(
            f"(PLUS, tau) eigenvalue {vals[j]:.12g} is not simple in its sector (gap {gap:.3e})", gap)
    return spec[j][1]


def analyze_dirac_point(V: FourierPotential, basis: PlaneWaveBasis, W: FourierPotential | None = None,
                        mu_target: float | None = None) -> DiracAnalysis:
    """φ1, v♯, v_F and (when ``W`` is given) c♯ for the quartet of ``V``."""
    vmat = potential_matrix(V, basis)
    phi1 = dirac_eigenfunction(V, basis, mu_target, vmat)
    inv = v_sharp(phi1)
    if W is not None:
        _, phi3, _ = symmetry_partners(phi1)
        inv = DiracInvariants(inv.v_sharp, inv.v_F, c_sharp(phi1, phi3, W), inv.theta)
    spectra = all_sector_spectra(V, basis, vmat)
    gaps = {}
    for key, vals in spectra.items():
        d = np.abs(vals - phi1.value)
        if key == (TranslationSector.PLUS, RotationSector.TAU):
            d = np.sort(d)[1:]  # drop φ1 itself
        gaps[sector_label(*key)] = float(np.min(d)) if len(d) else None
    weights = {sector_label(*k): w for k, w in classify_eigenvector(phi1.coeffs, basis).items()}
    return DiracAnalysis(phi1.value, phi1, inv, gaps, weights)
