"""Fourfold points, double-cone fits and gap/shallow-potential scans.

Band numbers in reports are 1-based (band 1 is the lowest), matching how
the quartet is usually quoted ("bands 2-5").
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import textio
from .errors import ClusterIdentificationError, NonConicalDataError, ToleranceError
from .lattice import PlaneWaveBasis, TranslationSector
from .potential import FourierPotential
from .spectral import SpectralConfig, assemble, default_workers, eigensolve, potential_matrix
from .symmetry_analysis import RotationSector, analyze_dirac_point, classify_eigenvector


# ---------------------------------------------------------------------------
# degeneracy detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegeneracyReport:
    mu_D: float
    band_indices: range
    multiplicity: int
    gap_below: float
    gap_above: float
    cluster_width: float

    @property
    def first_index(self) -> int:
        """0-based position of the lowest cluster member."""
        return self.band_indices.start - 1

    def to_json_dict(self) -> dict:
        return {
            "mu_D": self.mu_D,
            "bands": [self.band_indices.start, self.band_indices.stop - 1],
            "multiplicity": self.multiplicity,
            "gap_below": None if math.isinf(self.gap_below) else self.gap_below,
            "gap_above": None if math.isinf(self.gap_above) else self.gap_above,
            "cluster_width": self.cluster_width,
        }


def detect_degeneracy(values, cluster_tol: float, gap_tol: float) -> list[DegeneracyReport]:
    """Clusters of nearly equal values that are isolated from their neighbours.

    Consecutive sorted values closer than ``cluster_tol`` are chained into
    one cluster.  A cluster is reported when its distance to the clusters
    on either side exceeds ``gap_tol``; the list ends count as infinitely
    far away.
    """
    if cluster_tol >= gap_tol:
        raise ToleranceError(f"cluster_tol={cluster_tol} must be below gap_tol={gap_tol}")
    vals = np.asarray(values, dtype=float)
    if np.any(np.diff(vals) < 0):
        raise ValueError("values must be sorted ascending")
    if not len(vals):
        return []
    groups = [[0]]
    for i in range(1, len(vals)):
        if vals[i] - vals[i - 1] <= cluster_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    out = []
    for g, members in enumerate(groups):
        lo, hi = vals[members[0]], vals[members[-1]]
        below = lo - vals[groups[g - 1][-1]] if g > 0 else math.inf
        above = vals[groups[g + 1][0]] - hi if g + 1 < len(groups) else math.inf
        if below > gap_tol and above > gap_tol:
            out.append(DegeneracyReport(
                mu_D=float(np.mean(vals[members])),
                band_indices=range(members[0] + 1, members[-1] + 2),
                multiplicity=len(members),
                gap_below=float(below),
                gap_above=float(above),
                cluster_width=float(hi - lo),
            ))
    return out


def find_quartet(values, cluster_rtol: float = 1e-7, gap_rtol: float = 1e-2) -> DegeneracyReport:
    """The lowest isolated multiplicity-4 cluster, with tolerances relative to its own |μ_D|."""
    vals = np.asarray(values, dtype=float)
    for i in range(len(vals) - 3):
        scale = abs(vals[i])
        if scale == 0:
            continue
        for rep in detect_degeneracy(vals, cluster_rtol * scale, gap_rtol * scale):
            if rep.multiplicity == 4 and rep.first_index == i:
                return rep
    raise ClusterIdentificationError(f"no isolated fourfold cluster among {np.array2string(vals, precision=6)}")


def gamma_quartet(V: FourierPotential, basis: PlaneWaveBasis, config: SpectralConfig,
                  n_values: int | None = None) -> DegeneracyReport:
    n = min(len(basis), n_values or max(config.n_bands, 8))
    vals = eigensolve(assemble(V, (0.0, 0.0), basis), n, vectors=False).values
    return find_quartet(vals, config.cluster_rtol, config.gap_rtol)


# ---------------------------------------------------------------------------
# model dispersion
# ---------------------------------------------------------------------------


def model_bands(v_F: float, c_sharp: float, delta: float, k) -> np.ndarray:
    """Offsets from μ_D of the four quartet branches, ``(-s, -s, s, s)``.

    ``s = sqrt((δ c♯)² + v_F² |k|²)``.
    """
    if not v_F > 0:
        raise ValueError("v_F must be positive")
    kk = float(np.linalg.norm(np.asarray(k, dtype=float)))
    s = math.sqrt((delta * c_sharp) ** 2 + (v_F * kk) ** 2)
    return np.array([-s, -s, s, s])


# ---------------------------------------------------------------------------
# cone fitting
# ---------------------------------------------------------------------------


def default_radii(k1_norm: float, n: int = 7, upper: float = 1e-2) -> np.ndarray:
    # the cone of the ε = 1 cosine potential bends over near 0.015|k1|,
    # so the default window stops at 1e-2|k1|
    return np.logspace(np.log10(2e-3), np.log10(upper), n) * k1_norm


def default_directions(n: int = 8) -> np.ndarray:
    theta = np.pi * np.arange(n) / n
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


@dataclass(frozen=True)
class ConeFit:
    directions: np.ndarray
    v_F_per_direction_lower: np.ndarray
    v_F_per_direction_upper: np.ndarray
    v_F_fit: float
    anisotropy: float
    eta_max: float
    branch_slopes: np.ndarray = field(repr=False)

    def to_json_dict(self) -> dict:
        return {
            "directions": self.directions.tolist(),
            "v_F_per_direction_lower": self.v_F_per_direction_lower.tolist(),
            "v_F_per_direction_upper": self.v_F_per_direction_upper.tolist(),
            "v_F_fit": self.v_F_fit,
            "anisotropy": self.anisotropy,
            "eta_max": self.eta_max,
        }


def richardson(radii, slopes, levels: int) -> np.ndarray:
    """Extrapolate ``slopes[..., r]`` to zero radius.

    Level one is the two-point formula on the two smallest radii; each
    further level folds in the next radius (Neville's tableau evaluated at
    ρ = 0), cancelling one more power of ρ.
    """
    radii = np.asarray(radii, dtype=float)
    levels = min(levels, len(radii) - 1)
    table = [np.asarray(slopes[..., i], dtype=float) for i in range(levels + 1)]
    for lev in range(1, levels + 1):
        table = [(radii[i + lev] * table[i] - radii[i] * table[i + 1]) / (radii[i + lev] - radii[i])
                 for i in range(len(table) - 1)]
    return table[0]


def fit_cone(offsets, radii, directions, levels: int = 3) -> ConeFit:
    """Fit ``μ - μ_D = ±v_F |k| (1 + η)`` on rays through Γ.

    ``offsets[d, r, j]`` is band ``b+1+j`` minus μ_D at radius ``radii[r]``
    along ``directions[d]``.  Per ray and branch the slopes ``|offset|/ρ``
    are Richardson-extrapolated over the smallest radii, which removes the
    O(ρ) part of η.
    """
    off = np.asarray(offsets, dtype=float)
    radii = np.asarray(radii, dtype=float)
    directions = np.asarray(directions, dtype=float).reshape(-1, 2)
    if off.shape != (len(directions), len(radii), 4):
        raise ValueError(f"offsets shape {off.shape} does not match rays/radii")
    if len(radii) < 2 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("need at least two positive, strictly increasing radii")
    sign = np.array([-1.0, -1.0, 1.0, 1.0])
    slopes = off * sign[None, None, :] / radii[None, :, None]
    if np.any(slopes <= 0):
        bad = np.argwhere(slopes <= 0)[0]
        raise NonConicalDataError(
            f"branch {bad[2] + 1} on ray {bad[0]} has slope of the wrong sign at radius {radii[bad[1]]:.3e}")
    extrap = richardson(radii, np.moveaxis(slopes, 1, -1), levels)
    if np.any(extrap <= 0):
        raise NonConicalDataError("Richardson-extrapolated slope is not positive")
    lower = extrap[:, :2].mean(axis=1)
    upper = extrap[:, 2:].mean(axis=1)
    per_dir = extrap.mean(axis=1)
    aniso = float((per_dir.max() - per_dir.min()) / per_dir.mean())
    eta = slopes / extrap[:, None, :] - 1.0
    return ConeFit(directions, lower, upper, float(extrap.mean()), aniso, float(np.max(np.abs(eta))), extrap)


def cone_offsets(V: FourierPotential, basis: PlaneWaveBasis, quartet: DegeneracyReport,
                 radii, directions, workers: int | None = None) -> np.ndarray:
    """Quartet band values minus μ_D on every (direction, radius) sample."""
    vmat = potential_matrix(V, basis)
    b0 = quartet.first_index
    points = [(d, r) for d in range(len(directions)) for r in range(len(radii))]

    def solve(p):
        k = radii[p[1]] * np.asarray(directions[p[0]])
        vals = eigensolve(assemble(V, k, basis, vmat), b0 + 4, vectors=False).values
        return vals[b0:b0 + 4] - quartet.mu_D

    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(solve, points))
    else:
        rows = [solve(p) for p in points]
    return np.array(rows).reshape(len(directions), len(radii), 4)


@dataclass(frozen=True, eq=False)
class ConeAnalysis:
    quartet: DegeneracyReport
    fit: ConeFit
    radii: np.ndarray
    v_F_symmetry: float
    relative_mismatch: float

    def to_json_dict(self) -> dict:
        return {
            "degeneracy": self.quartet.to_json_dict(),
            "cone_fit": self.fit.to_json_dict(),
            "radii": self.radii.tolist(),
            "v_F_from_v_sharp": self.v_F_symmetry,
            "relative_mismatch": self.relative_mismatch,
        }


def analyze_cone(V: FourierPotential, config: SpectralConfig = SpectralConfig(),
                 radii=None, directions=None, basis: PlaneWaveBasis | None = None):
    """Cone fit at the Γ quartet plus the independent v_F from the sector eigenfunction.

    Returns ``(ConeAnalysis, DiracAnalysis)``.
    """
    basis = basis or config.basis(V.lattice)
    quartet = gamma_quartet(V, basis, config)
    k1n = math.sqrt(V.lattice.k1_sq)
    radii = default_radii(k1n) if radii is None else np.asarray(radii, dtype=float)
    directions = default_directions() if directions is None else np.asarray(directions, dtype=float)
    offsets = cone_offsets(V, basis, quartet, radii, directions, config.workers)
    fit = fit_cone(offsets, radii, directions)
    dirac = analyze_dirac_point(V, basis, mu_target=quartet.mu_D)
    vf = dirac.invariants.v_F
    return ConeAnalysis(quartet, fit, radii, vf, abs(fit.v_F_fit - vf) / vf), dirac


# ---------------------------------------------------------------------------
# gap scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapScan:
    deltas: np.ndarray
    gaps: np.ndarray
    fitted_slope: float
    c_sharp_ref: float
    mu_D: float
    status: str = "ok"

    @property
    def slope_ratio(self) -> float:
        """fitted_slope / (2|c♯|); 1 when the first-order gap law holds."""
        return self.fitted_slope / (2 * abs(self.c_sharp_ref)) if self.c_sharp_ref else math.nan

    def rows(self):
        return [[float(d), float(g)] for d, g in zip(self.deltas, self.gaps)]

    def to_json_dict(self) -> dict:
        ratio = self.slope_ratio
        return {
            "deltas": self.deltas.tolist(),
            "gaps": self.gaps.tolist(),
            "fitted_slope": self.fitted_slope,
            "c_sharp_ref": self.c_sharp_ref,
            "slope_ratio": None if math.isnan(ratio) else ratio,
            "mu_D": self.mu_D,
            "status": self.status,
        }


def _slope_through_zero(x: np.ndarray, y: np.ndarray) -> float:
    """Intercept of ``y/|x|`` fitted by a polynomial in ``x`` (degree <= 2)."""
    mask = x != 0
    x, y = x[mask], y[mask]
    if not len(x):
        return math.nan
    ratio = y / np.abs(x)
    deg = min(2, len(np.unique(x)) - 1)
    if deg == 0:
        return float(np.mean(ratio))
    return float(np.polynomial.polynomial.polyfit(x, ratio, deg)[0])


def gap_scan(V: FourierPotential, W: FourierPotential, deltas,
             config: SpectralConfig = SpectralConfig(), basis: PlaneWaveBasis | None = None) -> GapScan:
    """Γ gap between quartet members 2 and 3 of ``V + δW`` for each δ.

    The quartet position is taken from ``V`` alone.  The slope of gap vs
    ``|δ|`` is extrapolated to δ -> 0 and compared with ``2|c♯|``.
    """
    basis = basis or config.basis(V.lattice)
    quartet = gamma_quartet(V, basis, config)
    b0 = quartet.first_index
    vmat = potential_matrix(V, basis)
    wmat = potential_matrix(W, basis)
    deltas = np.asarray(deltas, dtype=float)

    def solve(delta):
        h = vmat + delta * wmat
        vals = eigensolve(assemble(V, (0.0, 0.0), basis, h), b0 + 4, vectors=False).values
        return vals[b0 + 2] - vals[b0 + 1]

    workers = config.workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            gaps = np.array(list(pool.map(solve, deltas)))
    else:
        gaps = np.array([solve(d) for d in deltas])
    dirac = analyze_dirac_point(V, basis, W, mu_target=quartet.mu_D)
    cs = float(dirac.invariants.c_sharp)
    status = "ok"
    if abs(cs) <= 1e-8 * max(W.max_abs, 1e-300):
        status = "inconclusive: c_sharp below tolerance"
    return GapScan(deltas, gaps, _slope_through_zero(deltas, gaps), cs, quartet.mu_D, status)


def write_gap_csv(scan: GapScan, path) -> None:
    textio.write_csv(path, ["delta", "gap"], scan.rows())


# ---------------------------------------------------------------------------
# shallow-potential scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShallowReport:
    epsilons: np.ndarray
    quartet_shift: np.ndarray
    doublet_shift: np.ndarray
    quartet_slope: float
    doublet_slope: float
    quartet_slope_ref: float
    doublet_slope_ref: float
    c1: float
    c2: float
    ordering_ok: bool

    def rows(self):
        return [[float(e), float(q), float(d)]
                for e, q, d in zip(self.epsilons, self.quartet_shift, self.doublet_shift)]

    def to_json_dict(self) -> dict:
        return {
            "epsilons": self.epsilons.tolist(),
            "quartet_shift": self.quartet_shift.tolist(),
            "doublet_shift": self.doublet_shift.tolist(),
            "quartet_slope": self.quartet_slope,
            "doublet_slope": self.doublet_slope,
            "quartet_slope_ref": self.quartet_slope_ref,
            "doublet_slope_ref": self.doublet_slope_ref,
            "c1": self.c1,
            "c2": self.c2,
            "ordering_ok": self.ordering_ok,
        }


_QUARTET_SECTORS = [(s, x) for s in (TranslationSector.PLUS, TranslationSector.MINUS)
                    for x in (RotationSector.TAU, RotationSector.TAUBAR)]
_DOUBLET_SECTORS = [(s, RotationSector.ONE) for s in (TranslationSector.PLUS, TranslationSector.MINUS)]


def _odd_slope(eps: np.ndarray, y: np.ndarray) -> float:
    # y = a ε + b ε², no intercept: the shifts vanish at ε = 0
    if len(np.unique(eps)) >= 2:
        design = np.stack([eps, eps ** 2], axis=1)
        return float(np.linalg.lstsq(design, y, rcond=None)[0][0])
    return float(np.mean(y / eps))


def shallow_scan(V: FourierPotential, epsilons=(-0.04, -0.02, -0.01, 0.01, 0.02, 0.04),
                 config: SpectralConfig = SpectralConfig(),
                 basis: PlaneWaveBasis | None = None) -> ShallowReport:
    """Shifts of the quartet and doublet out of the sixfold free level |k1|².

    Bands 2-7 of ``εV`` at Γ are labelled by their rotation sector (ξ ≠ 1
    for the quartet, ξ = 1 for the doublet), so the labelling survives the
    ordering flip at negative ε.
    """
    basis = basis or config.basis(V.lattice)
    vmat = potential_matrix(V, basis)
    e0 = V.lattice.k1_sq
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps == 0):
        raise ValueError("ε = 0 carries no slope information")
    q_shift, d_shift, ordering = [], [], []
    c1 = V[(0, 0)].real
    c2 = V[(1, -1)].real
    for e in eps:
        sol = eigensolve(assemble(V, (0.0, 0.0), basis, e * vmat), 7)
        quartet, doublet = [], []
        for j in range(1, 7):
            w = classify_eigenvector(sol.vectors[:, j], basis)
            wq = sum(w[key] for key in _QUARTET_SECTORS)
            wd = sum(w[key] for key in _DOUBLET_SECTORS)
            if wq > 0.5:
                quartet.append(sol.values[j])
            elif wd > 0.5:
                doublet.append(sol.values[j])
        if len(quartet) != 4 or len(doublet) != 2:
            raise ClusterIdentificationError(
                f"at ε={e}: found {len(quartet)} quartet and {len(doublet)} doublet states in bands 2-7")
        q_shift.append(np.mean(quartet) - e0)
        d_shift.append(np.mean(doublet) - e0)
        if e * c2 > 0:
            ordering.append(max(quartet) < min(doublet))
        elif e * c2 < 0:
            ordering.append(max(doublet) < min(quartet))
    q_shift = np.array(q_shift)
    d_shift = np.array(d_shift)
    return ShallowReport(
        eps, q_shift, d_shift,
        _odd_slope(eps, q_shift), _odd_slope(eps, d_shift),
        c1 - c2, c1 + 2 * c2, c1, c2, bool(all(ordering)),
    )


def write_shallow_csv(report: ShallowReport, path) -> None:
    textio.write_csv(path, ["epsilon", "quartet_shift", "doublet_shift"], report.rows())
