"""Plane-wave band structures and double Dirac cones of super honeycomb potentials."""

from .cone_analysis import (
    ConeFit,
    DegeneracyReport,
    GapScan,
    ShallowReport,
    analyze_cone,
    detect_degeneracy,
    fit_cone,
    gap_scan,
    model_bands,
    shallow_scan,
)
from .errors import DiracBandsError
from .lattice import LatticeBasis, PlaneWaveBasis, TranslationSector, build_basis, classify_index, hexagonal_lattice
from .potential import (
    FourierPotential,
    check_honeycomb,
    check_super_honeycomb,
    dimer_build,
    dimer_disk,
    from_samples,
    load_potential,
    perturbation_cosine,
    save_potential,
    superhoneycomb_cosine,
)
from .spectral import SpectralConfig, assemble, bands, eigensolve
from .symmetry_analysis import RotationSector, analyze_dirac_point, c_sharp, sector_spectrum, v_sharp

__version__ = "0.1.0"
