import dataclasses
from pathlib import Path

import numpy as np
import pytest

from fwmpair.calibration import (
    CalibrationTargets,
    calibrate_preset,
    load_preset,
    seed_coefficients,
    silica_index,
    targets_from_fiber,
    verify,
)
from fwmpair.dispersion import SS_FF
from fwmpair.errors import CalibrationError
from fwmpair.jsa import PumpSpec, default_grid
from fwmpair.phasematch import delta_k


@pytest.fixture(scope="module")
def fresh():
    return calibrate_preset()


def test_shipped_preset_is_reproducible(fresh, preset):
    assert fresh.slow.coefficients == preset.slow.coefficients
    assert fresh.fast.coefficients == preset.fast.coefficients
    assert fresh.dn_dT == preset.dn_dT


def test_calibration_is_bit_deterministic(fresh):
    again = calibrate_preset()
    assert again.to_json() == fresh.to_json()


def test_preset_meets_every_target(preset):
    report = verify(preset, CalibrationTargets())
    assert all(ok for *_, ok in report.values()), report


def test_beta0_is_fixed_by_nominal_index(preset):
    from scipy.constants import c
    assert preset.slow.coefficients[0] * c / preset.omega0 == pytest.approx(1.45, rel=1e-12)
    assert preset.fast.coefficients[0] * c / preset.omega0 == pytest.approx(1.45 - 2.5e-4, rel=1e-12)


def test_round_trip_from_known_generator():
    gen = calibrate_preset(dataclasses.replace(CalibrationTargets(), signal_wavelength=598e-9,
                                               idler_wavelength=858.3e-9, gvm_ratio=-0.07))
    rec = calibrate_preset(targets_from_fiber(gen))
    pump = PumpSpec()
    g = default_grid(gen, pump, SS_FF, 64, 64)
    ws, wi = np.meshgrid(g.omega_s, g.omega_i, indexing="ij")
    diff = delta_k(gen, SS_FF, ws, wi, 10.0) - delta_k(rec, SS_FF, ws, wi, 10.0)
    assert np.max(np.abs(diff)) < 1e-2


def test_unreachable_targets_raise_with_residuals():
    bad = dataclasses.replace(CalibrationTargets(), zdw_slow=650e-9, zdw_fast=650e-9)
    with pytest.raises(CalibrationError) as info:
        calibrate_preset(bad)
    assert info.value.residuals


def test_seed_polynomial_tracks_silica():
    from scipy.constants import c
    lam, h = 705e-9, 1e-12
    w0 = 2 * np.pi * c / lam
    # group index n - lambda dn/dlambda by central difference
    ng = silica_index(lam) - lam * (silica_index(lam + h) - silica_index(lam - h)) / (2 * h)
    assert seed_coefficients(w0)[0] * c == pytest.approx(ng, rel=1e-4)
    assert silica_index(lam) == pytest.approx(1.455, abs=2e-3)


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown preset"):
        load_preset("nope")


def test_repository_preset_matches_packaged_copy():
    root = Path(__file__).resolve().parents[1]
    shipped = root / "presets" / "paper_fibre.json"
    packaged = root / "src" / "fwmpair" / "presets" / "paper_fibre.json"
    assert shipped.read_bytes() == packaged.read_bytes()
