import numpy as np
import pytest

from msqsim.detection import (LocalOscillator, duan_witness,
                              homodyne_variance, joint_pair_variances)
from msqsim.grid import FAR, make_grid
from msqsim.optics import (BandOverlap, FourierTransform, FresnelSlice,
                           GainProfile, Loss, MediumSpec, OverlapGeometry,
                           SpatialLoss, SqueezeLayer, build_medium,
                           gain_region_aperture, gain_to_squeeze, loss,
                           squeeze_to_gain)
from msqsim.program import ProgramError, SymplecticProgram, dense_realize
from msqsim.state import GaussianState, check_uncertainty


def far_state(elements, grid):
    return GaussianState.from_program(SymplecticProgram(elements), grid,
                                      basis_in=FAR)


def near_state(elements, grid):
    program = SymplecticProgram(
        [FourierTransform(), *elements, FourierTransform(inverse=True)])
    return GaussianState.from_program(program, grid)


# ---------------------------------------------------------------------------
# gain <-> squeeze
# ---------------------------------------------------------------------------

def test_gain_to_squeeze_closed_forms():
    assert gain_to_squeeze(1.0) == 0.0
    assert gain_to_squeeze(4.0) == pytest.approx(np.log(2 + np.sqrt(3)), rel=1e-12)
    assert gain_to_squeeze(2.0) == pytest.approx(np.log(1 + np.sqrt(2)), rel=1e-12)
    # G=4 pure squeezing level
    assert 10 * np.log10(np.exp(-2 * gain_to_squeeze(4.0))) == pytest.approx(
        -11.44, abs=0.01)


def test_gain_squeeze_inverse_roundtrip():
    for gain in np.linspace(1.0, 30.0, 40):
        assert squeeze_to_gain(gain_to_squeeze(gain)) == pytest.approx(gain, rel=1e-12)


def test_gain_to_squeeze_monotone():
    gains = np.linspace(1.0, 10.0, 50)
    s = [gain_to_squeeze(g) for g in gains]
    assert np.all(np.diff(s) > 0)


def test_gain_below_one_rejected():
    with pytest.raises(ValueError):
        gain_to_squeeze(0.5)


# ---------------------------------------------------------------------------
# gain profile
# ---------------------------------------------------------------------------

def test_profile_radial_annulus():
    prof = GainProfile(s_max=1.0, q_peak=10.0, q_sigma=10.0, q_gap_floor=0.2)
    q = np.array([0.0, 8.0, 10.0, 12.0, 20.0])
    s = prof.s_values(q)
    assert s[2] == pytest.approx(1.0)
    assert s[1] == s[3] == pytest.approx(np.exp(-0.02))
    # natural value at 0 would be e^{-0.5} ~ 0.61: clamped down to the floor
    assert s[0] == pytest.approx(0.2)
    assert np.all(s >= 0)


def test_profile_floor_only_clamps_when_needed():
    prof = GainProfile(s_max=1.0, q_peak=10.0, q_sigma=2.0, q_gap_floor=0.9)
    # natural annulus value at 0 is tiny, below the floor: kept as-is
    assert prof.s_values(np.array([0.0]))[0] == pytest.approx(np.exp(-12.5))


def test_uniform_profile_flat():
    prof = GainProfile.uniform(0.7)
    np.testing.assert_allclose(prof.s_values(np.array([0.0, 3.0, 50.0])), 0.7)


def test_profile_validation():
    with pytest.raises(ValueError):
        GainProfile(s_max=-1.0, q_peak=1.0, q_sigma=1.0)
    with pytest.raises(ValueError):
        GainProfile(s_max=1.0, q_peak=1.0, q_sigma=0.0)
    with pytest.raises(ValueError):
        GainProfile(s_max=1.0, q_peak=1.0, q_sigma=1.0, q_gap_floor=1.5)


# ---------------------------------------------------------------------------
# squeeze layer
# ---------------------------------------------------------------------------

def test_zero_strength_layer_is_identity():
    grid = make_grid(4, 4, 0.1)
    cov = dense_realize(SymplecticProgram([SqueezeLayer(GainProfile.uniform(0.0),
                                                        1.0)]),
                        grid, basis=FAR)
    np.testing.assert_allclose(cov, 0.25 * np.eye(2 * grid.n_modes), atol=1e-14)


@pytest.mark.parametrize("s", [0.2, 0.8814, 1.317])
@pytest.mark.parametrize("shape", [(4, 4), (8, 8)])
def test_thin_medium_duality(s, shape):
    """Uniform thin amplifier: local squeezing in the near field AND
    opposite-frequency squeezing in the far field, exactly e^{-2s}/4."""
    grid = make_grid(*shape, 0.1)
    expect = np.exp(-2 * s) / 4
    jv_far = joint_pair_variances(
        far_state([SqueezeLayer(GainProfile.uniform(s))], grid), "far")
    np.testing.assert_allclose(jv_far.x_minus, expect, atol=1e-9)
    np.testing.assert_allclose(jv_far.y_plus, expect, atol=1e-9)
    jv_near = joint_pair_variances(
        near_state([SqueezeLayer(GainProfile.uniform(s))], grid), "near")
    np.testing.assert_allclose(jv_near.x_minus, expect, atol=1e-9)
    np.testing.assert_allclose(jv_near.y_plus, expect, atol=1e-9)


def test_annulus_squeezes_peak_most_and_respects_floor():
    grid = make_grid(8, 8, 0.1)
    q_peak = 2 * grid.dqx
    prof = GainProfile(s_max=1.0, q_peak=q_peak, q_sigma=q_peak / 2,
                       q_gap_floor=0.1)
    jv = joint_pair_variances(far_state([SqueezeLayer(prof)], grid), "far")
    r = grid.q_radius.ravel()
    s_expected = prof.s_values(r)
    np.testing.assert_allclose(jv.x_minus, np.exp(-2 * s_expected) / 4, atol=1e-9)
    origin = int(np.flatnonzero(r == 0.0)[0])
    near_peak = int(np.argmin(np.abs(r - q_peak)))
    assert jv.x_minus[near_peak] < jv.x_minus[origin]
    assert jv.x_minus[origin] >= np.exp(-2 * 0.1) / 4 - 1e-12


def test_anti_squeeze_minimum_uncertainty_product():
    grid = make_grid(4, 4, 0.1)
    prof = GainProfile(s_max=1.1, q_peak=10.0, q_sigma=8.0, q_gap_floor=0.3)
    jv = joint_pair_variances(far_state([SqueezeLayer(prof)], grid), "far")
    np.testing.assert_allclose(jv.x_plus * jv.x_minus, 1.0 / 16.0, atol=1e-9)
    np.testing.assert_allclose(jv.y_plus * jv.y_minus, 1.0 / 16.0, atol=1e-9)


def test_duan_witness_certifies_entanglement_where_squeezed():
    grid = make_grid(8, 8, 0.1)
    prof = GainProfile(s_max=0.9, q_peak=2 * grid.dqx, q_sigma=grid.dqx,
                       q_gap_floor=0.0)
    state = far_state([SqueezeLayer(prof)], grid)
    witness = duan_witness(state, "far")
    s_vals = prof.s_values(grid.q_radius.ravel())
    assert np.all(witness[s_vals > 1e-6] < 0.5)
    np.testing.assert_allclose(witness[s_vals <= 1e-6], 0.5, atol=1e-12)


# ---------------------------------------------------------------------------
# fresnel slice
# ---------------------------------------------------------------------------

def test_fresnel_zero_distance_identity():
    grid = make_grid(4, 4, 0.1)
    el = FresnelSlice(0.0, 795e-6)
    np.testing.assert_allclose(el.quadrature_matrix(grid),
                               np.eye(2 * grid.n_modes), atol=1e-15)


def test_fresnel_on_axis_phase_zero():
    grid = make_grid(4, 4, 0.1)
    el = FresnelSlice(7.0, 795e-6)
    phases = el._phases(grid)
    origin = int(np.flatnonzero(grid.q_radius.ravel() == 0.0)[0])
    assert phases[origin] == 0.0
    assert phases[grid.n_points + origin] == 0.0


def test_fresnel_inverse_pair_restores_squeezed_state():
    grid = make_grid(4, 4, 0.1)
    layer = SqueezeLayer(GainProfile.uniform(0.8))
    base = dense_realize(SymplecticProgram([layer]), grid, basis=FAR)
    roundtrip = dense_realize(
        SymplecticProgram([layer, FresnelSlice(4.0, 795e-6),
                           FresnelSlice(-4.0, 795e-6)]),
        grid, basis=FAR)
    np.testing.assert_allclose(roundtrip, base, atol=1e-10)


def test_fresnel_dephases_squeezing_angle():
    # propagation rotates the squeezed joint quadrature at q != 0
    grid = make_grid(4, 4, 0.1)
    layer = SqueezeLayer(GainProfile.uniform(0.8))
    jv0 = joint_pair_variances(far_state([layer], grid), "far")
    jv1 = joint_pair_variances(
        far_state([layer, FresnelSlice(30.0, 795e-6)], grid), "far")
    r = grid.q_radius.ravel()
    assert np.all(jv1.x_minus[r > 0] > jv0.x_minus[r > 0] + 1e-6)
    assert jv1.x_minus[r == 0][0] == pytest.approx(jv0.x_minus[r == 0][0],
                                                   abs=1e-12)


# ---------------------------------------------------------------------------
# medium builder
# ---------------------------------------------------------------------------

def test_thin_medium_is_single_layer():
    medium = MediumSpec(length_mm=0.0, wavelength_nm=795, slices=1, gain=4.0)
    elements = build_medium(medium, GainProfile.uniform(medium.s_total))
    assert len(elements) == 1
    assert isinstance(elements[0], SqueezeLayer)
    assert elements[0].s_scale == 1.0


def test_medium_fragment_structure():
    medium = MediumSpec(length_mm=12.5, wavelength_nm=795, slices=4, gain=4.0)
    elements = build_medium(medium, GainProfile.uniform(medium.s_total))
    kinds = [type(e).__name__ for e in elements]
    assert kinds[0] == "FresnelSlice" and kinds[-1] == "FresnelSlice"
    assert kinds.count("SqueezeLayer") == 4
    # net propagation distance是 zero: reference plane at the cell centre
    total = sum(e.dz_mm for e in elements if isinstance(e, FresnelSlice))
    assert total == pytest.approx(0.0, abs=1e-12)


def test_medium_slicing_converges():
    """Homodyne results converge with slice count (Cauchy differences)."""
    grid = make_grid(8, 8, 0.1)
    prof = GainProfile.uniform(gain_to_squeeze(4.0))
    xx, yy = grid.meshgrid()
    up = np.exp(-(xx**2 + yy**2) / 0.25**2).astype(complex)
    lo = LocalOscillator(grid, up, np.conj(up), normalize=True)
    slice_counts = (1, 2, 4, 8, 16, 32, 64)
    results = []
    for m in slice_counts:
        medium = MediumSpec(length_mm=12.5, wavelength_nm=795, slices=m, gain=4.0)
        state = near_state(list(build_medium(medium, prof)), grid)
        chis = np.linspace(0, np.pi, 64, endpoint=False)
        ratios = [homodyne_variance(state, lo, c, engine="dense") for c in chis]
        results.append(10 * np.log10(min(ratios)))
    diffs = np.abs(np.diff(np.array(results)))
    assert diffs[-1] < diffs[0]
    converged = [m for m, d in zip(slice_counts[1:], diffs) if d < 0.01]
    assert converged, "no slice count reached the 0.01 dB criterion"
    assert converged[0] <= 32, f"converged only at M = {converged[0]}"


# ---------------------------------------------------------------------------
# band overlap
# ---------------------------------------------------------------------------

def test_overlap_requires_on_grid_offset():
    grid = make_grid(8, 8, 0.1)
    with pytest.raises(ProgramError, match="multiple"):
        BandOverlap(OverlapGeometry(1.5 * grid.dqx)).output_grid(grid)


def test_overlap_band_too_wide_rejected():
    grid = make_grid(8, 8, 0.1)
    with pytest.raises(ProgramError, match="grid supports"):
        BandOverlap(OverlapGeometry(3 * grid.dqx)).output_grid(grid)


def test_overlap_on_vacuum_is_vacuum():
    grid = make_grid(8, 8, 0.1)
    program = SymplecticProgram([FourierTransform(),
                                 BandOverlap(OverlapGeometry(2 * grid.dqx)),
                                 FourierTransform(inverse=True)])
    cov = dense_realize(program, grid)
    out = program.output_grid(grid)
    np.testing.assert_allclose(cov, 0.25 * np.eye(2 * out.n_modes), atol=1e-12)


@pytest.mark.parametrize("s", [0.4, 1.0])
def test_overlap_preserves_local_squeezing(s):
    """Quarter-span overlap: near-field joint variances at every retained
    point equal the pre-overlap values."""
    grid = make_grid(8, 8, 0.1)
    layer = SqueezeLayer(GainProfile.uniform(s))
    pre = joint_pair_variances(near_state([layer], grid), "near")
    post = joint_pair_variances(
        near_state([layer, BandOverlap(OverlapGeometry(2 * grid.dqx))], grid),
        "near")
    np.testing.assert_allclose(post.x_minus, pre.x_minus[0], atol=1e-9)
    np.testing.assert_allclose(post.y_plus, pre.y_plus[0], atol=1e-9)


def test_overlap_output_spectrum_gapless_through_dc():
    """The recentred band is squeezed at q = 0 even though the raw gain has a
    gap there."""
    grid = make_grid(16, 8, 0.1)
    q0 = 4 * grid.dqx
    prof = GainProfile(s_max=1.0, q_peak=q0, q_sigma=q0 / 2, q_gap_floor=0.02)
    pre = joint_pair_variances(
        far_state([SqueezeLayer(prof)], grid), "far")
    state = far_state([SqueezeLayer(prof), BandOverlap(OverlapGeometry(q0))],
                      grid)
    post = joint_pair_variances(state, "far")
    out = state.grid
    r_in = grid.q_radius.ravel()
    r_out = out.q_radius.ravel()
    dc_in = int(np.flatnonzero(r_in == 0.0)[0])
    dc_out = int(np.flatnonzero(r_out == 0.0)[0])
    # before: barely squeezed at dc (gap); after: deeply squeezed
    assert pre.x_minus[dc_in] > 0.9 * 0.25
    assert post.x_minus[dc_out] == pytest.approx(np.exp(-2 * prof.s_max) / 4,
                                                 rel=1e-6)
    # gapless: dc is the best-squeezed frequency of the output band
    assert post.x_minus[dc_out] == pytest.approx(np.min(post.x_minus), rel=1e-9)


def test_overlap_preserves_uncertainty():
    grid = make_grid(8, 8, 0.1)
    state = near_state([SqueezeLayer(GainProfile.uniform(0.9)),
                        BandOverlap(OverlapGeometry(grid.dqx))], grid)
    assert check_uncertainty(state) > -1e-9


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def test_loss_extremes():
    grid = make_grid(2, 2, 0.1)
    layer = SqueezeLayer(GainProfile.uniform(0.9))
    pure = dense_realize(SymplecticProgram([layer]), grid, basis=FAR)
    same = Loss(1.0).apply_cov(pure, grid)
    np.testing.assert_array_equal(same, pure)
    vac = Loss(0.0).apply_cov(pure, grid)
    np.testing.assert_allclose(vac, 0.25 * np.eye(16), atol=1e-15)


def test_loss_interpolates_homodyne_ratio():
    s = gain_to_squeeze(4.0)
    grid = make_grid(2, 2, 0.1)
    up = np.zeros((2, 2), complex)
    up[0, 0] = 1.0
    lo = LocalOscillator(grid, up, np.conj(up), normalize=True)
    for eta in (1.0, 0.8, 0.3):
        state = near_state([SqueezeLayer(GainProfile.uniform(s))], grid)
        lossy = GaussianState.from_covariance(
            state.grid, Loss(eta).apply_cov(state.covariance(), state.grid))
        ratio = homodyne_variance(lossy, lo, np.pi / 2, engine="dense")
        assert ratio == pytest.approx(eta * np.exp(-2 * s) + (1 - eta), rel=1e-10)
    # the G=4, eta=0.8 anchor: -5.89 dB
    assert 10 * np.log10(0.8 * np.exp(-2 * s) + 0.2) == pytest.approx(-5.89,
                                                                      abs=0.01)


def test_loss_eta_range_enforced():
    with pytest.raises(ValueError):
        loss(1.2)
    with pytest.raises(ValueError):
        loss(-0.1)


def test_spatial_loss_vacuums_blocked_region():
    grid = make_grid(8, 8, 0.2)
    aperture = gain_region_aperture(0.4, order=4)
    state = near_state([SqueezeLayer(GainProfile.uniform(0.8))], grid)
    cov = aperture.apply_cov(state.covariance(), grid)
    blocked = GaussianState.from_covariance(grid, cov)
    jv = joint_pair_variances(blocked, "near")
    xx, yy = grid.meshgrid()
    r = np.hypot(xx, yy).ravel()
    outside = r > 1.4
    np.testing.assert_allclose(jv.x_minus[outside], 0.25, atol=1e-6)
    inside = r < 0.1
    assert np.all(jv.x_minus[inside] < 0.6 * 0.25)


def test_spatial_loss_transmission_validated():
    grid = make_grid(2, 2, 0.1)
    bad = SpatialLoss(lambda g: np.full(g.n_points, 1.5))
    with pytest.raises(ProgramError, match="transmission"):
        bad.apply_cov(0.25 * np.eye(16), grid)
