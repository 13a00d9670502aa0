import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar
from scipy.constants import c as C

from fwmpair.dispersion import SS_FF, omega_from_wavelength
from fwmpair.errors import ResolutionError, SpectrumClippedError
from fwmpair.jsa import (
    FilterSpec,
    JSAmplitude,
    PumpSpec,
    SpectralGrid,
    apply_filter,
    bandwidth_fwhm,
    build_jsa,
    coherence_time,
    default_grid,
    fwhm_omega,
    marginal_spectrum,
    phase_matching_function,
    pump_envelope,
    sidecar,
)
from fwmpair.phasematch import delta_k
from fwmpair.schmidt import schmidt_decompose


def _fwhm_numeric(x, y):
    """Independent half-maximum width: dense resampling, no interpolation tricks."""
    fine = np.linspace(x[0], x[-1], 200001)
    yf = np.interp(fine, x, y)
    above = fine[yf >= yf.max() / 2]
    return above[-1] - above[0]


def test_envelope_on_ridge_and_symmetry(pump):
    wp = pump.omega
    assert pump_envelope(pump, wp + 3e12, wp - 3e12) == 1.0
    a, b = wp + 1.1e12, wp - 0.4e12
    assert pump_envelope(pump, a, b) == pump_envelope(pump, b, a)


def test_envelope_intensity_fwhm_matches_pump_bandwidth(pump):
    # cut along dw_s = dw_i = dw_p; alpha^2 is then the pump intensity spectrum
    d = np.linspace(-3e12, 3e12, 60001)
    alpha2 = pump_envelope(pump, pump.omega + d, pump.omega + d) ** 2
    expected = 2 * math.pi * C * 0.9e-9 / (705e-9) ** 2
    assert expected == pytest.approx(2 * math.pi * 5.43e11, rel=1e-3)
    assert _fwhm_numeric(d, alpha2) == pytest.approx(expected, rel=0.01)


def test_sinc_values(preset):
    ws, wi = omega_from_wavelength(597.03e-9), omega_from_wavelength(860.644e-9)
    x0 = float(delta_k(preset, SS_FF, ws, wi, 10.0)) * preset.length / 2
    assert phase_matching_function(preset, SS_FF, ws, wi, 10.0) == pytest.approx(math.sin(x0) / x0 if x0 else 1.0)
    # first zero on the signal axis: |x| grows monotonically away from the ridge here
    g = lambda w: abs(float(delta_k(preset, SS_FF, w, wi, 10.0))) * preset.length / 2 - math.pi
    root = brentq(g, ws, ws + 3e12, xtol=1e-3)
    assert abs(phase_matching_function(preset, SS_FF, root, wi, 10.0)) < 1e-9


def test_first_side_lobe_height():
    # oracle: 1-D maximization of |sin x / x| on [pi, 2 pi]
    res = minimize_scalar(lambda x: -abs(math.sin(x) / x), bounds=(math.pi, 2 * math.pi), method="bounded",
                          options={"xatol": 1e-12})
    assert -res.fun == pytest.approx(0.2172, abs=1e-3)
    x = np.linspace(math.pi, 2 * math.pi, 200001)
    assert np.max(np.abs(np.sinc(x / np.pi))) == pytest.approx(-res.fun, abs=1e-9)


def test_normalization(preset_jsa):
    assert preset_jsa.normalized
    assert preset_jsa.norm == pytest.approx(1, abs=1e-9)
    for arm in ("signal", "idler"):
        assert marginal_spectrum(preset_jsa, arm).total == pytest.approx(1, abs=1e-9)


def test_preset_marginals(preset_jsa):
    s = bandwidth_fwhm(marginal_spectrum(preset_jsa, "signal"))
    i = bandwidth_fwhm(marginal_spectrum(preset_jsa, "idler"))
    assert abs(s - 0.13e-9) <= 0.3 * 0.13e-9
    assert abs(i - 2e-9) <= 0.3 * 2e-9


def test_grid_refinement_is_stable(preset, pump, preset_jsa):
    fine = build_jsa(preset, pump, SS_FF, default_grid(preset, pump, SS_FF, 1024, 1024))
    for arm in ("signal", "idler"):
        a = bandwidth_fwhm(marginal_spectrum(preset_jsa, arm))
        b = bandwidth_fwhm(marginal_spectrum(fine, arm))
        assert b == pytest.approx(a, rel=0.01)


def test_separable_input_has_rank_one(rng):
    grid = SpectralGrid(np.linspace(1.0e15, 1.1e15, 128), np.linspace(2.0e15, 2.2e15, 96))
    g = np.exp(-((grid.omega_s - 1.04e15) / 1e13) ** 2) * (1 + 0.3 * rng.random(128))
    h = np.exp(-((grid.omega_i - 2.1e15) / 3e13) ** 2)
    sv = np.linalg.svd(np.outer(g, h), compute_uv=False)
    assert sv[1] < 1e-10 * sv[0]


def test_coarse_grid_is_rejected(preset, pump):
    g = default_grid(preset, pump, SS_FF, 16, 16, 12.0)
    with pytest.raises(ResolutionError, match="samples per central lobe"):
        build_jsa(preset, pump, SS_FF, g)


def test_gaussian_fwhm_identity():
    sigma = 2.5e11
    w = np.linspace(-8 * sigma, 8 * sigma, 512) + 2.7e15
    grid = SpectralGrid(w, w + 1e14)
    amp = np.outer(np.exp(-((w - 2.7e15) ** 2) / (4 * sigma**2)), np.exp(-((w - 2.7e15) ** 2) / (4 * (2 * sigma) ** 2)))
    jsa = JSAmplitude(grid, amp).normalize()
    # |amp|^2 has standard deviation sigma on the signal axis
    assert fwhm_omega(marginal_spectrum(jsa, "signal")) == pytest.approx(2 * math.sqrt(2 * math.log(2)) * sigma, rel=0.01)


def test_clipped_spectrum_is_an_error(preset, pump):
    g = default_grid(preset, pump, SS_FF, 128, 128, 0.3)
    with pytest.raises(SpectrumClippedError):
        bandwidth_fwhm(marginal_spectrum(build_jsa(preset, pump, SS_FF, g), "signal"))


def test_broad_filter_passes_everything(preset_jsa):
    f = FilterSpec(597.03e-9, 40e-9)
    out = apply_filter(preset_jsa, "signal", f)
    assert out.weight > 0.999
    assert not out.normalized


def test_filter_transmission_scales_probability(preset_jsa):
    out = apply_filter(preset_jsa, "signal", FilterSpec(597.03e-9, 40e-9, transmission=0.81))
    assert out.weight == pytest.approx(0.81, abs=1e-3)
    # the reported weight is exactly the drop in norm
    assert out.norm == pytest.approx(out.weight * preset_jsa.norm, rel=1e-12)


def test_gaussian_filter_shape(preset_jsa):
    f = FilterSpec(860.6e-9, 2e-9, shape="gaussian")
    assert f.power_transmission(omega_from_wavelength(860.6e-9)) == pytest.approx(1.0)
    assert f.power_transmission(omega_from_wavelength(861.6e-9)) == pytest.approx(0.5, rel=1e-9)
    assert 0 < apply_filter(preset_jsa, "idler", f).weight < 1


def test_off_grid_filter_is_an_error(preset_jsa):
    with pytest.raises(ValueError, match="zero overlap"):
        apply_filter(preset_jsa, "signal", FilterSpec(650e-9, 1e-9))


def test_filter_validation():
    for kw in ({"fwhm": 0.0}, {"fwhm": 1e-9, "transmission": 1.2}):
        with pytest.raises(ValueError):
            FilterSpec(600e-9, **kw)


def test_pump_validation():
    with pytest.raises(ValueError):
        PumpSpec(fwhm=-1e-9)
    with pytest.raises(ValueError):
        PumpSpec(wavelength=705e-9, fwhm=50e-9)


def test_coherence_times():
    assert coherence_time(0.9e-9, 705e-9) == pytest.approx(0.81e-12, abs=0.02e-12)
    assert coherence_time(0.13e-9, 597e-9) == pytest.approx(4.0e-12, abs=0.1e-12)
    assert coherence_time(0.26e-9, 597e-9) == coherence_time(0.13e-9, 597e-9) / 2
    with pytest.raises(ValueError):
        coherence_time(0.0, 597e-9)


def test_gaussian_phasematch_reduces_correlation(preset, pump, preset_jsa):
    g = build_jsa(preset, pump, SS_FF, preset_jsa.grid, phasematch="gaussian")
    assert schmidt_decompose(g).K < schmidt_decompose(preset_jsa).K


@pytest.mark.xfail(strict=True, reason="central-lobe K is ~1.18 for a preset whose full K gives V in the 0.73-0.80 band; see notes")
def test_central_lobe_is_nearly_factorable(preset, preset_jsa):
    ws, wi = np.meshgrid(preset_jsa.grid.omega_s, preset_jsa.grid.omega_i, indexing="ij")
    x = delta_k(preset, SS_FF, ws, wi, 10.0) * preset.length / 2
    lobe = JSAmplitude(preset_jsa.grid, np.where(np.abs(x) <= math.pi, preset_jsa.amplitude, 0)).normalize()
    assert schmidt_decompose(lobe).K < 1.05


def test_exports(preset_jsa, tmp_path):
    text = preset_jsa.to_csv(tmp_path / "jsa.csv")
    rows = text.strip().split("\n")
    assert len(rows) == 512 and len(rows[0].split(",")) == 512
    doc = json.loads(sidecar(preset_jsa))
    assert doc["rows"] == "signal" and doc["n_signal"] == 512 and len(doc["lambda_idler_nm"]) == 512
    m = marginal_spectrum(preset_jsa, "signal").to_csv()
    assert m.startswith("lambda_nm,intensity\n")
    lam = [float(r.split(",")[0]) for r in m.strip().split("\n")[1:]]
    assert lam == sorted(lam)
