import numpy as np
import pytest

from msqsim.config import parse_config
from msqsim.experiments import (build_pipeline, coherence_length, fit_gaussian,
                                fit_gaussian_rotated, halving_width,
                                mode_count_measured, mode_count_theory,
                                plateau_width, position_scan, width_scan)
from msqsim.grid import make_grid


# ---------------------------------------------------------------------------
# closed-form quantities
# ---------------------------------------------------------------------------

def test_coherence_length_paper_parameters():
    assert coherence_length(795e-6, 12.5, 1.0) == pytest.approx(0.0562, abs=5e-4)


def test_coherence_length_limits():
    assert coherence_length(795e-6, 0.0, 1.0) == 0.0
    base = coherence_length(795e-6, 3.0, 1.0)
    assert coherence_length(795e-6, 12.0, 1.0) == pytest.approx(2 * base, rel=1e-12)


def test_coherence_length_validation():
    with pytest.raises(ValueError):
        coherence_length(-1e-6, 12.5, 1.0)
    with pytest.raises(ValueError):
        coherence_length(795e-6, 12.5, 0.0)


def test_mode_count_theory_values():
    l_coh = coherence_length(795e-6, 12.5, 1.0)
    n = mode_count_theory(1.0, l_coh)
    assert 300 <= n <= 320
    assert mode_count_theory(1.0, 1.0) == 1.0
    assert mode_count_theory(2.0, 1.0) == 4.0


def test_mode_count_measured_values():
    assert mode_count_measured(3.1, 0.18) == pytest.approx(74.2, abs=0.1)
    assert mode_count_measured(2.0, 1.0) == 1.0
    assert mode_count_measured(2.0, 0.5) == 4.0
    with pytest.raises(ValueError):
        mode_count_measured(1.0, 2.0)


# ---------------------------------------------------------------------------
# gaussian fits
# ---------------------------------------------------------------------------

def test_fit_gaussian_recovers_exact_profile():
    u = np.linspace(-2, 2, 101)
    profile = 3.0 * np.exp(-2 * (u - 0.3) ** 2 / 0.45**2)
    fit = fit_gaussian(profile, u)
    assert fit.center == pytest.approx(0.3, abs=1e-8)
    assert fit.waist == pytest.approx(0.45, rel=1e-6)
    assert fit.residual < 1e-8
    assert not fit.non_gaussian


def test_fit_gaussian_translation_equivariance():
    u = np.linspace(-3, 3, 121)
    base = np.exp(-2 * u**2 / 0.5**2)
    shifted = np.exp(-2 * (u - 0.8) ** 2 / 0.5**2)
    assert fit_gaussian(shifted, u).center - fit_gaussian(base, u).center == \
        pytest.approx(0.8, abs=1e-9)


def test_fit_gaussian_flat_top_flagged():
    u = np.linspace(-2, 2, 201)
    d = 0.8
    profile = np.where(np.abs(u) <= d / 2, 1.0, 0.0)
    fit = fit_gaussian(profile, u)
    assert 0.5 * d <= fit.waist <= 1.2 * d
    assert fit.non_gaussian


def test_fit_gaussian_2d_marginals():
    x = np.linspace(-2, 2, 41)
    y = np.linspace(-1.5, 1.5, 31)
    xx, yy = np.meshgrid(x, y)
    profile = np.exp(-2 * xx**2 / 0.6**2 - 2 * (yy + 0.2) ** 2 / 0.4**2)
    fit_x, fit_y = fit_gaussian(profile, (x, y))
    assert fit_x.waist == pytest.approx(0.6, rel=1e-6)
    assert fit_y.waist == pytest.approx(0.4, rel=1e-6)
    assert fit_y.center == pytest.approx(-0.2, abs=1e-8)


def test_fit_gaussian_rejects_degenerate_profile():
    with pytest.raises(ValueError, match="mass"):
        fit_gaussian(np.zeros(10))
    with pytest.raises(ValueError):
        fit_gaussian(-np.ones(10))


def test_fit_gaussian_rotated_diagonal_profile():
    grid = make_grid(32, 32, 0.2)
    xx, yy = grid.meshgrid()
    u = (xx + yy) / np.sqrt(2)
    v = (-xx + yy) / np.sqrt(2)
    profile = np.exp(-2 * (u - 0.4) ** 2 / 0.5**2 - 2 * v**2 / 0.9**2)
    fit_u, fit_v = fit_gaussian_rotated(profile, grid, np.pi / 4)
    assert fit_u.center == pytest.approx(0.4, abs=1e-6)
    assert fit_u.waist == pytest.approx(0.5, rel=1e-6)
    assert fit_v.waist == pytest.approx(0.9, rel=1e-6)


# ---------------------------------------------------------------------------
# pipeline assembly
# ---------------------------------------------------------------------------

def test_pipeline_resolves_grid_aware_defaults(default32_text):
    pipeline = build_pipeline(parse_config(default32_text))
    grid = pipeline.input_grid
    assert pipeline.overlap_offset == pytest.approx((grid.nx // 4) * grid.dqx)
    assert pipeline.profile.q_peak == pytest.approx(pipeline.overlap_offset)
    assert pipeline.output_grid.nx == grid.nx // 2
    assert pipeline.metadata("implicit")["config.medium.gain"] == 4.0


def test_pipeline_without_overlap_keeps_grid():
    cfg = parse_config("[overlap]\nenabled = false\n")
    pipeline = build_pipeline(cfg)
    assert pipeline.output_grid.nx == pipeline.input_grid.nx
    assert pipeline.overlap_offset is None
    # no recentring: the profile defaults to a flat (uniform) band
    assert pipeline.profile.q_peak == 0.0


# ---------------------------------------------------------------------------
# scan drivers (coarse, fast settings)
# ---------------------------------------------------------------------------

POSITION_CFG = """
[grid]
nx = 16
ny = 16
pitch_mm = 0.3

[medium]
length_mm = 0.0
slices = 1
gain = 4.0
region_waist_mm = 1.2
region_order = 6

[lo]
mask = gaussian
width_mm = 0.5
height_mm = 0.5
gain = 4.0

[detector]
efficiency = 0.9

[scan]
type = position
start = -2.0
stop = 2.0
steps = 9
direction = x=y
"""


def test_position_scan_plateau_and_decay():
    cfg = parse_config(POSITION_CFG)
    res = position_scan(cfg)
    assert len(res.points) == 9
    values = res.values
    assert np.all(np.diff(values) > 0)  # monotone scan variable
    centre = res.points[4]
    assert centre.value == pytest.approx(0.0)
    assert centre.db_raw < -4.0
    # decays towards the QNL at the scan ends
    assert abs(res.points[0].db_raw) < 0.35
    assert abs(res.points[-1].db_raw) < 0.35
    # fitted waist constant across the scan within 5 percent
    waists = np.array([p.fit["waist_u_mm"] for p in res.points])
    assert np.max(np.abs(waists / waists[len(waists) // 2] - 1)) < 0.05
    # reported positions track the requested translation
    centers = np.array([p.fit["center_mm"] for p in res.points])
    np.testing.assert_allclose(centers, values, atol=0.05)


def test_position_scan_rejects_out_of_grid():
    cfg = parse_config(POSITION_CFG)
    with pytest.raises(ValueError, match="outside the grid"):
        position_scan(cfg, positions=[9.0])


def test_plateau_width_on_synthetic_curve():
    t = np.linspace(-3, 3, 61)
    db = -6.0 * np.exp(-((t / 1.5) ** 8))
    width = plateau_width(t, db)
    # crossing of -3 dB for this synthetic profile: |t| = 1.5*(ln 2)^(1/8)
    expect = 2 * 1.5 * np.log(2.0) ** (1.0 / 8.0)
    assert width == pytest.approx(expect, abs=0.1)
    with pytest.raises(ValueError, match="centre"):
        plateau_width(t, np.abs(db))


def test_halving_width_interpolates():
    w = np.array([0.1, 0.2, 0.3, 0.4])
    db = np.array([-2.0, -3.0, -5.0, -6.0])
    got = halving_width(w, db)  # threshold -3: crossing exactly at 0.2
    assert got == pytest.approx(0.2, abs=1e-12)
    flat = np.full(4, -6.0)
    assert np.isnan(halving_width(w, flat))


WIDTH_CFG = POSITION_CFG.replace("type = position", "type = width").replace(
    "start = -2.0", "start = 0.3")

# control isolating the medium length: flat gain across the band, no
# emission envelope
FLAT_WIDTH_CFG = WIDTH_CFG.replace("region_waist_mm = 1.2",
                                   "region_waist_mm = 0.0") + """
[gain_profile]
q_gap_floor = 1.0
q_sigma_rad_per_mm = 1e6
"""


def test_width_scan_requires_ascending_widths():
    cfg = parse_config(WIDTH_CFG)
    with pytest.raises(ValueError, match="ascending"):
        width_scan(cfg, widths=[0.4, 0.2])


def test_width_scan_thin_medium_flat():
    """Zero-length medium, flat gain band: squeezing independent of LO width
    down to the grid scale."""
    cfg = parse_config(FLAT_WIDTH_CFG)
    res = width_scan(cfg, widths=np.linspace(0.3, 1.6, 6))
    assert np.ptp(res.db_raw) < 1e-6


# ---------------------------------------------------------------------------
# paper-scale reproduction (the slow end-to-end anchor)
# ---------------------------------------------------------------------------

def test_paper_scale_mode_count(paper_default_text):
    """Position-scan region size over width-scan coherence size lands near
    the 75-mode anchor."""
    cfg = parse_config(paper_default_text)
    pos_cfg = parse_config(paper_default_text.replace(
        "type = phase", "type = position"))
    res_pos = position_scan(pos_cfg,
                            positions=np.linspace(-1.6, 1.6, 21))
    region = plateau_width(res_pos.values, res_pos.db_raw)
    res_w = width_scan(cfg, widths=np.geomspace(0.02, 0.5, 14),
                       direction="x=y")
    waists = np.array([p.fit["waist_u_mm"] for p in res_w.points])
    w0 = halving_width(waists, res_w.db_raw)
    medium = cfg.medium
    l_coh = coherence_length(medium.wavelength_mm, medium.length_mm,
                             medium.refractive_index)
    assert w0 > l_coh  # band restriction keeps w0 above the diffraction value
    q0 = res_w.metadata["overlap_offset_rad_per_mm"]
    predicted = max(l_coh, np.pi / q0)
    assert 0.5 <= w0 / predicted <= 2.0
    count = mode_count_measured(region, w0)
    assert 60.0 <= count <= 90.0
