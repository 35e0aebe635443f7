"""Scripted experiments: position scans, width scans, coherence arithmetic.

The scan drivers consume an :class:`~msqsim.config.ExperimentConfig`, build
the amplifier pipeline once, and re-synthesise the local oscillator per scan
point.  Each point is measured at its optimal detection phase (coarse scan
plus golden-section refinement) and reported raw and electronic-floor
corrected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from . import __version__
from .config import ExperimentConfig, config_defaults_echo
from .detection import (LocalOscillator, LoSeedSpec, MaskSpec, build_lo,
                        correct_electronic_noise, direction_angle,
                        homodyne_variance, optimal_phase, to_db)
from .grid import TransverseGrid, make_grid
from .optics import (BandOverlap, FourierTransform, GainProfile, Loss,
                     MediumSpec, OverlapGeometry, build_medium,
                     gain_region_aperture, gain_to_squeeze)
from .program import SymplecticProgram
from .state import GaussianState


# ---------------------------------------------------------------------------
# closed-form quantities
# ---------------------------------------------------------------------------

def coherence_length(wavelength_mm: float, length_mm: float,
                     refractive_index: float = 1.0) -> float:
    """Waist whose Rayleigh range equals the medium length:
    ``sqrt(lambda * l / (pi * n))`` (all lengths mm)."""
    if wavelength_mm <= 0 or refractive_index <= 0:
        raise ValueError("wavelength and refractive index must be positive")
    if length_mm < 0:
        raise ValueError("medium length must be >= 0")
    return float(np.sqrt(wavelength_mm * length_mm / (np.pi * refractive_index)))


def mode_count_theory(pump_waist_mm: float, coherence_length_mm: float) -> float:
    """Independent squeezed-mode estimate ``(w_pump / l_coh)^2``."""
    if pump_waist_mm <= 0 or coherence_length_mm <= 0:
        raise ValueError("waist and coherence length must be positive")
    return float((pump_waist_mm / coherence_length_mm) ** 2)


def mode_count_measured(region_size_mm: float, min_waist_mm: float) -> float:
    """Measured-style count ``l^2 / (4 w0^2)`` from the squeezing-region size
    and the smallest LO waist still showing local squeezing."""
    if region_size_mm <= 0 or min_waist_mm <= 0:
        raise ValueError("sizes must be positive")
    if min_waist_mm > region_size_mm:
        raise ValueError("minimum waist cannot exceed the region size")
    return float(region_size_mm**2 / (4.0 * min_waist_mm**2))


# ---------------------------------------------------------------------------
# Gaussian profile fits
# ---------------------------------------------------------------------------

#: relative RMS residual above which a profile is flagged non-Gaussian
NON_GAUSSIAN_RESIDUAL = 0.02


@dataclass(frozen=True)
class GaussianFit:
    center: float
    waist: float          # 1/e^2 intensity radius
    amplitude: float
    residual: float       # RMS misfit / fitted amplitude

    @property
    def non_gaussian(self) -> bool:
        return self.residual > NON_GAUSSIAN_RESIDUAL


def _fit_gaussian_1d(coords: np.ndarray, values: np.ndarray) -> GaussianFit:
    total = float(values.sum())
    if total <= 0:
        raise ValueError("profile has no positive mass")
    mean = float(np.sum(coords * values)) / total
    var = float(np.sum((coords - mean) ** 2 * values)) / total
    w0 = max(2.0 * np.sqrt(var), 1e-6 * (coords[-1] - coords[0] + 1e-30))

    def model(u, a, u0, w):
        return a * np.exp(-2.0 * (u - u0) ** 2 / w**2)

    p0 = (float(values.max()), mean, w0)
    try:
        popt, _ = curve_fit(model, coords, values, p0=p0, maxfev=20000)
    except RuntimeError:
        popt = p0
    a, u0, w = popt
    resid = float(np.sqrt(np.mean((model(coords, *popt) - values) ** 2)))
    return GaussianFit(center=float(u0), waist=float(abs(w)), amplitude=float(a),
                       residual=resid / max(abs(a), 1e-300))


def fit_gaussian(profile: np.ndarray, coords=None):
    """Least-squares Gaussian fit of a nonnegative 1D or 2D intensity profile.

    1D: returns a :class:`GaussianFit`.  2D (axes aligned with the array):
    fits each axis marginal and returns ``(fit_x, fit_y)``.  Waists are 1/e^2
    intensity radii.
    """
    profile = np.asarray(profile, dtype=float)
    if np.any(profile < 0):
        raise ValueError("profile must be nonnegative")
    if profile.ndim == 1:
        if coords is None:
            coords = np.arange(profile.size, dtype=float)
        return _fit_gaussian_1d(np.asarray(coords, dtype=float), profile)
    if profile.ndim == 2:
        if coords is None:
            xs = np.arange(profile.shape[1], dtype=float)
            ys = np.arange(profile.shape[0], dtype=float)
        else:
            xs, ys = coords
        fit_x = _fit_gaussian_1d(np.asarray(xs, float), profile.sum(axis=0))
        fit_y = _fit_gaussian_1d(np.asarray(ys, float), profile.sum(axis=1))
        return fit_x, fit_y
    raise ValueError("profile must be 1D or 2D")


def fit_gaussian_rotated(intensity: np.ndarray, grid: TransverseGrid,
                         angle_rad: float) -> Tuple[GaussianFit, GaussianFit]:
    """Separable Gaussian fit in axes rotated by ``angle_rad``.

    Returns fits along the rotated short axis (u) and long axis (v); used to
    report LO positions and waists for diagonal scan directions.
    """
    xx, yy = grid.meshgrid()
    cu, su = np.cos(angle_rad), np.sin(angle_rad)
    u = (xx * cu + yy * su).ravel()
    v = (-xx * su + yy * cu).ravel()
    z = intensity.ravel()
    total = float(z.sum())
    if total <= 0:
        raise ValueError("profile has no positive mass")

    def model(coords, a, u0, wu, v0, wv):
        uu, vv = coords
        return a * np.exp(-2.0 * (uu - u0) ** 2 / wu**2
                          - 2.0 * (vv - v0) ** 2 / wv**2)

    u_mean = float(np.sum(u * z)) / total
    v_mean = float(np.sum(v * z)) / total
    wu0 = max(2.0 * np.sqrt(float(np.sum((u - u_mean) ** 2 * z)) / total), 1e-6)
    wv0 = max(2.0 * np.sqrt(float(np.sum((v - v_mean) ** 2 * z)) / total), 1e-6)
    p0 = (float(z.max()), u_mean, wu0, v_mean, wv0)
    try:
        popt, _ = curve_fit(model, (u, v), z, p0=p0, maxfev=20000)
    except RuntimeError:
        popt = p0
    a, u0, wu, v0, wv = popt
    resid = float(np.sqrt(np.mean((model((u, v), *popt) - z) ** 2)))
    rel = resid / max(abs(a), 1e-300)
    return (
        GaussianFit(center=float(u0), waist=float(abs(wu)), amplitude=float(a), residual=rel),
        GaussianFit(center=float(v0), waist=float(abs(wv)), amplitude=float(a), residual=rel),
    )


# ---------------------------------------------------------------------------
# pipeline assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pipeline:
    """Config-resolved amplifier chain ready for detection."""

    config: ExperimentConfig
    input_grid: TransverseGrid
    output_grid: TransverseGrid
    program: SymplecticProgram
    profile: GainProfile
    medium: MediumSpec
    overlap_offset: Optional[float]
    state: GaussianState

    def lo_seed(self, *, center=None, width=None, angle=None) -> LoSeedSpec:
        """LO recipe from the config, with optional per-point overrides."""
        lo_cfg = self.config.lo
        mask = MaskSpec(
            kind=lo_cfg.mask,
            width_mm=lo_cfg.width_mm if width is None else float(width),
            height_mm=lo_cfg.height_mm,
            center_x_mm=lo_cfg.center_x_mm if center is None else float(center[0]),
            center_y_mm=lo_cfg.center_y_mm if center is None else float(center[1]),
            angle_rad=0.0 if angle is None else float(angle),
        )
        if lo_cfg.filter_auto:
            radius = None
        else:
            radius = lo_cfg.filter_rad_per_mm
            if radius is None:
                radius = np.inf  # filtering disabled
        return LoSeedSpec(mask=mask, gain=lo_cfg.gain, filter_radius=radius,
                          ideal_balanced=lo_cfg.ideal_balanced)

    def build_lo(self, **overrides) -> LocalOscillator:
        return build_lo(self.lo_seed(**overrides), self.output_grid)

    def metadata(self, engine: str) -> dict:
        cfg = self.config
        meta = {
            "package": f"msqsim {__version__}",
            "engine": engine,
            "config_sha256": cfg.sha256(),
            "grid": f"{cfg.grid.nx}x{cfg.grid.ny}",
            "output_grid": f"{self.output_grid.nx}x{self.output_grid.ny}",
            "nyquist_rows_self_paired": True,
            "overlap_offset_rad_per_mm": self.overlap_offset,
            "profile_s_max": self.profile.s_max,
            "profile_q_peak_rad_per_mm": self.profile.q_peak,
            "profile_q_sigma_rad_per_mm": self.profile.q_sigma,
        }
        meta.update({f"config.{k}": v for k, v in config_defaults_echo(cfg).items()})
        return meta


def resolve_profile(config: ExperimentConfig, grid: TransverseGrid,
                    overlap_offset: Optional[float]) -> GainProfile:
    """Fill the grid-dependent gain-profile defaults."""
    gp = config.gain_profile
    s_max = gp.s_max
    if s_max is None:
        s_max = gain_to_squeeze(config.medium.gain)
    q_peak = gp.q_peak_rad_per_mm
    if q_peak is None:
        q_peak = overlap_offset if overlap_offset is not None else 0.0
    q_sigma = gp.q_sigma_rad_per_mm
    if q_sigma is None:
        q_sigma = q_peak / 2.0 if q_peak > 0 else np.inf
    floor = gp.q_gap_floor if q_peak > 0 else 1.0
    return GainProfile(s_max=s_max, q_peak=q_peak, q_sigma=q_sigma,
                       q_gap_floor=floor, pump_phase=gp.pump_phase_rad)


def build_pipeline(config: ExperimentConfig) -> Pipeline:
    """Assemble the amplifier program described by a configuration.

    Order: to the frequency basis, the sliced medium, the band-recentering
    overlap, back to the near field, the emission-region envelope, the lumped
    detector loss.
    """
    g = config.grid
    grid = make_grid(g.nx, g.ny, g.pitch_mm)
    med_cfg = config.medium
    medium = MediumSpec(
        length_mm=med_cfg.length_mm,
        wavelength_nm=med_cfg.wavelength_nm,
        refractive_index=med_cfg.refractive_index,
        slices=med_cfg.slices,
        gain=med_cfg.gain,
    )
    overlap_offset = None
    elements = [FourierTransform()]
    if config.overlap.enabled:
        if config.overlap.offset_rad_per_mm is not None:
            overlap_offset = config.overlap.offset_rad_per_mm
        else:
            dq = grid.dqx if config.overlap.direction == "x" else grid.dqy
            n_axis = grid.nx if config.overlap.direction == "x" else grid.ny
            overlap_offset = (n_axis // 4) * dq
    profile = resolve_profile(config, grid, overlap_offset)
    elements.extend(build_medium(medium, profile))
    if overlap_offset is not None:
        elements.append(BandOverlap(OverlapGeometry(overlap_offset,
                                                    config.overlap.direction)))
    elements.append(FourierTransform(inverse=True))
    if med_cfg.region_waist_mm > 0:
        elements.append(gain_region_aperture(med_cfg.region_waist_mm,
                                             med_cfg.region_order))
    if config.detector.efficiency < 1.0:
        elements.append(Loss(config.detector.efficiency))
    program = SymplecticProgram(elements)
    state = GaussianState.from_program(program, grid,
                                       mode_cap=config.engine.mode_cap)
    return Pipeline(
        config=config,
        input_grid=grid,
        output_grid=state.grid,
        program=program,
        profile=profile,
        medium=medium,
        overlap_offset=overlap_offset,
        state=state,
    )


# ---------------------------------------------------------------------------
# scan results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanPoint:
    value: float
    ratio: float
    db_raw: float
    db_corrected: float
    chi_opt: float
    fit: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScanResult:
    variable: str
    unit: str
    points: Tuple[ScanPoint, ...]
    metadata: dict

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    @property
    def db_raw(self) -> np.ndarray:
        return np.array([p.db_raw for p in self.points])

    @property
    def db_corrected(self) -> np.ndarray:
        return np.array([p.db_corrected for p in self.points])

    @property
    def ratios(self) -> np.ndarray:
        return np.array([p.ratio for p in self.points])


def _corrected_db(db_raw: float, floor_db: float) -> float:
    try:
        return correct_electronic_noise(db_raw, floor_db)
    except ValueError:
        return float("nan")


def _measure_point(pipeline: Pipeline, lo: LocalOscillator, engine: str,
                   phase_points: int = 64) -> Tuple[float, float, float, float]:
    chi, ratio = optimal_phase(pipeline.state, lo, n_coarse=phase_points,
                               engine=engine)
    db_raw = to_db(ratio)
    db_corr = _corrected_db(db_raw, pipeline.config.detector.electronic_floor_db)
    return chi, ratio, db_raw, db_corr


# ---------------------------------------------------------------------------
# scan drivers
# ---------------------------------------------------------------------------

def position_scan(config: ExperimentConfig, direction: Optional[str] = None,
                  positions: Optional[Sequence[float]] = None,
                  engine: Optional[str] = None) -> ScanResult:
    """Squeezing vs LO position translated along a transverse direction.

    The LO mask centre slides along the direction (its short axis) while the
    propagation axis stays fixed; each point reports the optimal-phase
    squeezing and a Gaussian fit of the upper-sideband intensity profile.
    """
    pipeline = build_pipeline(config)
    engine = engine or config.engine.engine
    if direction is None:
        direction = config.scan.direction
    angle = direction_angle(direction)
    if positions is None:
        positions = np.linspace(config.scan.start, config.scan.stop,
                                config.scan.steps)
    positions = np.asarray(positions, dtype=float)
    ux, uy = np.cos(angle), np.sin(angle)
    half_x = pipeline.output_grid.extent_x / 2.0
    half_y = pipeline.output_grid.extent_y / 2.0
    points: List[ScanPoint] = []
    for t in positions:
        cx, cy = t * ux, t * uy
        if abs(cx) > half_x or abs(cy) > half_y:
            raise ValueError(
                f"position {t} mm puts the mask centre ({cx:.3f}, {cy:.3f}) "
                f"outside the grid half-extent ({half_x:.3f}, {half_y:.3f})"
            )
        lo = pipeline.build_lo(center=(cx, cy), angle=angle)
        chi, ratio, db_raw, db_corr = _measure_point(pipeline, lo, engine)
        fit_u, fit_v = fit_gaussian_rotated(np.abs(lo.amp_upper) ** 2,
                                            pipeline.output_grid, angle)
        points.append(ScanPoint(
            value=float(t), ratio=ratio, db_raw=db_raw, db_corrected=db_corr,
            chi_opt=chi,
            fit={
                "center_mm": fit_u.center,
                "waist_u_mm": fit_u.waist,
                "waist_v_mm": fit_v.waist,
                "residual": fit_u.residual,
            },
        ))
    meta = pipeline.metadata(engine)
    meta["scan"] = "position"
    meta["direction"] = direction
    return ScanResult("position", "mm", tuple(points), meta)


def width_scan(config: ExperimentConfig, widths: Optional[Sequence[float]] = None,
               direction: Optional[str] = None,
               engine: Optional[str] = None) -> ScanResult:
    """Squeezing vs LO short-axis size at fixed centre.

    Wide LOs saturate at the configuration's squeezing level; below the
    coherence scale the measured squeezing degrades because the LO spectrum
    outgrows the squeezed band and samples dephased pairs.
    """
    pipeline = build_pipeline(config)
    engine = engine or config.engine.engine
    if direction is None:
        direction = config.scan.direction
    angle = direction_angle(direction)
    if widths is None:
        widths = np.linspace(config.scan.start, config.scan.stop,
                             config.scan.steps)
    widths = np.asarray(widths, dtype=float)
    if np.any(widths <= 0) or np.any(np.diff(widths) <= 0):
        raise ValueError("widths must be positive and strictly ascending")
    points: List[ScanPoint] = []
    for w in widths:
        lo = pipeline.build_lo(width=w, angle=angle)
        chi, ratio, db_raw, db_corr = _measure_point(pipeline, lo, engine)
        fit_u, fit_v = fit_gaussian_rotated(np.abs(lo.amp_upper) ** 2,
                                            pipeline.output_grid, angle)
        points.append(ScanPoint(
            value=float(w), ratio=ratio, db_raw=db_raw, db_corrected=db_corr,
            chi_opt=chi,
            fit={
                "center_mm": fit_u.center,
                "waist_u_mm": fit_u.waist,
                "waist_v_mm": fit_v.waist,
                "residual": fit_u.residual,
            },
        ))
    meta = pipeline.metadata(engine)
    meta["scan"] = "width"
    meta["direction"] = direction
    return ScanResult("width", "mm", tuple(points), meta)


def phase_scan_experiment(config: ExperimentConfig,
                          engine: Optional[str] = None) -> ScanResult:
    """Variance-ratio curve over the configured detection-phase range."""
    pipeline = build_pipeline(config)
    engine = engine or config.engine.engine
    lo = pipeline.build_lo(angle=direction_angle(config.scan.direction))
    chis = np.linspace(config.scan.start, config.scan.stop, config.scan.steps,
                       endpoint=False)
    floor = config.detector.electronic_floor_db
    points = []
    for chi in chis:
        ratio = homodyne_variance(pipeline.state, lo, float(chi), engine)
        db_raw = to_db(ratio)
        points.append(ScanPoint(
            value=float(chi), ratio=ratio, db_raw=db_raw,
            db_corrected=_corrected_db(db_raw, floor), chi_opt=float(chi),
        ))
    meta = pipeline.metadata(engine)
    meta["scan"] = "phase"
    return ScanResult("chi", "rad", tuple(points), meta)


# ---------------------------------------------------------------------------
# scan post-processing
# ---------------------------------------------------------------------------

def plateau_width(values: np.ndarray, dbs: np.ndarray,
                  threshold_frac: float = 0.5) -> float:
    """Size of the squeezing region from a position scan.

    The region is where the squeezing depth stays below (more squeezed than)
    ``threshold_frac`` times the depth at the scan centre; edges are located
    by linear interpolation of the threshold crossings around the centre.
    """
    values = np.asarray(values, float)
    dbs = np.asarray(dbs, float)
    i0 = int(np.argmin(np.abs(values)))
    depth = dbs[i0]
    if depth >= 0:
        raise ValueError("no squeezing at the scan centre")
    threshold = threshold_frac * depth

    def cross(i_from, step):
        i = i0
        while 0 <= i + step < len(values) and dbs[i + step] <= threshold:
            i += step
        j = i + step
        if j < 0 or j >= len(values):
            return values[i]  # never crossed inside the scan
        # interpolate between inside point i and outside point j
        f = (threshold - dbs[i]) / (dbs[j] - dbs[i])
        return values[i] + f * (values[j] - values[i])

    left = cross(i0, -1)
    right = cross(i0, +1)
    return float(right - left)


def halving_width(widths: np.ndarray, dbs: np.ndarray) -> float:
    """Empirical coherence size: LO width where the squeezing halves (in dB).

    The saturated level is the value at the largest width; walking down in
    width, the first crossing of half that level is interpolated.  Returns
    NaN when the curve never degrades to half (e.g. a thin medium).
    """
    widths = np.asarray(widths, float)
    dbs = np.asarray(dbs, float)
    saturated = dbs[-1]
    if saturated >= 0:
        raise ValueError("no squeezing at the largest width")
    threshold = 0.5 * saturated
    for i in range(len(widths) - 1, 0, -1):
        if dbs[i - 1] > threshold >= dbs[i]:
            f = (threshold - dbs[i - 1]) / (dbs[i] - dbs[i - 1])
            return float(widths[i - 1] + f * (widths[i] - widths[i - 1]))
    if dbs[0] > threshold:
        return float(widths[0])
    return float("nan")
