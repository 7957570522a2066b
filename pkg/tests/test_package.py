from __future__ import annotations

import diracbands


def test_public_namespace():
    assert diracbands.__version__ == "0.1.0"
    lat = diracbands.hexagonal_lattice()
    assert diracbands.check_honeycomb(diracbands.superhoneycomb_cosine(lat)).verdict == "super_honeycomb"
    assert issubclass(diracbands.errors.NonConicalDataError, diracbands.DiracBandsError)
