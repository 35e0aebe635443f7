"""Randomised invariant battery and cross-engine consistency checks.

Shared by the ``selfcheck`` CLI subcommand and the test suite.  Every check
is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .detection import (LocalOscillator, dense_variance, fit_phase_curve,
                        homodyne_variance, implicit_variance,
                        joint_pair_variances, phase_scan)
from .grid import FAR, NEAR, TransverseGrid, make_grid
from .optics import (BandOverlap, FourierTransform, FresnelSlice, GainProfile,
                     Loss, MediumSpec, OverlapGeometry, SpatialLoss,
                     SqueezeLayer, build_medium, gain_region_aperture)
from .program import SymplecticProgram, symplectic_defect
from .state import GaussianState, check_uncertainty, vacuum
from .state import TOL_STRUCTURAL


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))


def random_lo(grid: TransverseGrid, rng: np.random.Generator) -> LocalOscillator:
    """Random normalised two-sideband LO."""
    shape = (grid.ny, grid.nx)
    up = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    lo = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return LocalOscillator(grid, up, lo, normalize=True)


def random_profile(rng: np.random.Generator, q_scale: float) -> GainProfile:
    return GainProfile(
        s_max=float(rng.uniform(0.1, 1.4)),
        q_peak=float(rng.uniform(0.0, q_scale)),
        q_sigma=float(rng.uniform(0.2 * q_scale, 2.0 * q_scale)),
        q_gap_floor=float(rng.uniform(0.0, 1.0)),
        pump_phase=float(rng.uniform(0.0, 2 * np.pi)),
    )


def random_pipeline(rng: np.random.Generator,
                    grid: Optional[TransverseGrid] = None
                    ) -> Tuple[SymplecticProgram, TransverseGrid]:
    """Random full amplifier pipeline (profile, offset, loss, aperture)."""
    if grid is None:
        nx = int(rng.choice([4, 8]))
        ny = int(rng.choice([4, 8]))
        grid = make_grid(nx, ny, float(rng.uniform(0.05, 0.3)))
    q_scale = grid.dqx * grid.nx / 4
    profile = random_profile(rng, 2.0 * q_scale)
    medium = MediumSpec(
        length_mm=float(rng.uniform(0.0, 20.0)),
        wavelength_nm=795.0,
        refractive_index=1.0,
        slices=int(rng.choice([1, 2, 4])),
        gain=float(rng.uniform(1.0, 4.0)),
    )
    elements = [FourierTransform()]
    elements.extend(build_medium(medium, profile))
    m_max = grid.nx // 4
    if m_max >= 1 and rng.random() < 0.7:
        m = int(rng.integers(1, m_max + 1))
        elements.append(BandOverlap(OverlapGeometry(m * grid.dqx, "x")))
    elements.append(FourierTransform(inverse=True))
    if rng.random() < 0.5:
        elements.append(gain_region_aperture(float(rng.uniform(0.3, 3.0)),
                                             int(rng.integers(1, 6))))
    if rng.random() < 0.8:
        elements.append(Loss(float(rng.uniform(0.5, 1.0))))
    return SymplecticProgram(elements), grid


# ---------------------------------------------------------------------------
# individual checks
# ---------------------------------------------------------------------------

def check_qnl_normalisation(seed: int, n_trials: int = 100) -> CheckResult:
    """Vacuum + random LOs must sit exactly at the quantum-noise level."""
    rng = np.random.default_rng(seed)
    grid = make_grid(4, 4, 0.1)
    state = vacuum(grid)
    worst = 0.0
    for _ in range(n_trials):
        lo = random_lo(grid, rng)
        chi = float(rng.uniform(0, 2 * np.pi))
        worst = max(worst, abs(homodyne_variance(state, lo, chi) - 1.0))
    return CheckResult("qnl-normalisation", worst < 1e-9,
                       f"max |ratio - 1| = {worst:.3e} over {n_trials} LOs")


def check_symplecticity(seed: int, n_trials: int = 12) -> CheckResult:
    """Every non-loss element realisation satisfies S J S^T = J to 1e-9."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_name = ""
    for _ in range(n_trials):
        nx = int(rng.choice([4, 8]))
        ny = int(rng.choice([4, 8]))
        grid = make_grid(nx, ny, float(rng.uniform(0.05, 0.3)))
        q_scale = grid.dqx * nx / 4
        elements = [
            FourierTransform(),
            FourierTransform(inverse=True),
            SqueezeLayer(random_profile(rng, q_scale), float(rng.uniform(0.1, 1.0))),
            FresnelSlice(float(rng.uniform(-10, 10)), 795e-6),
        ]
        if nx >= 8:
            elements.append(BandOverlap(OverlapGeometry(grid.dqx * (nx // 4), "x")))
        for el in elements:
            defect = symplectic_defect(el.quadrature_matrix(grid), grid.n_modes)
            if defect > worst:
                worst, worst_name = defect, type(el).__name__
    return CheckResult("element-symplecticity", worst < TOL_STRUCTURAL,
                       f"max defect {worst:.3e} ({worst_name})")


def check_uncertainty_bound(seed: int, n_trials: int = 5) -> CheckResult:
    """Random pipelines produce physical states (uncertainty >= -1e-9)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        program, grid = random_pipeline(rng)
        state = GaussianState.from_program(program, grid)
        worst = min(worst, check_uncertainty(state))
    return CheckResult("uncertainty-bound", worst >= -1e-9,
                       f"min eigenvalue {worst:.3e} over {n_trials} pipelines")


def check_engine_equivalence(seed: int, n_trials: int = 20,
                             tol: float = 1e-8) -> CheckResult:
    """Dense oracle and implicit path agree on random pipelines."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        program, grid = random_pipeline(rng)
        state = GaussianState.from_program(program, grid)
        lo = random_lo(state.grid, rng)
        chi = float(rng.uniform(0, 2 * np.pi))
        dense = dense_variance(state.covariance(), lo, chi)
        fast = implicit_variance(program, grid, lo, chi)
        worst = max(worst, abs(dense - fast))
    return CheckResult("engine-equivalence", worst < tol,
                       f"max |dense - implicit| = {worst:.3e} over {n_trials} trials")


def check_phase_law(seed: int = 0) -> CheckResult:
    """Single-pair phase scan follows the two-extreme squeezing law exactly."""
    s = 0.4145
    grid = make_grid(2, 2, 0.1)
    program = SymplecticProgram([
        FourierTransform(), SqueezeLayer(GainProfile.uniform(s)),
        FourierTransform(inverse=True),
    ])
    state = GaussianState.from_program(program, grid)
    up = np.zeros((2, 2), complex)
    up[0, 0] = 1.0
    lo = LocalOscillator(grid, up, np.conj(up), normalize=True)
    chis, ratios = phase_scan(state, lo, 0.0, 2 * np.pi, 128)
    fit = fit_phase_curve(chis, ratios)
    err = max(abs(fit.anti - np.exp(2 * s)), abs(fit.squeezed - np.exp(-2 * s)),
              fit.max_residual)
    return CheckResult("phase-law", err < 1e-9,
                       f"max deviation from the closed form {err:.3e}")


def check_overlap_locality(seed: int = 0) -> CheckResult:
    """Quarter-span band overlap preserves near-field joint variances."""
    s = 0.6
    grid = make_grid(8, 8, 0.1)
    geom = OverlapGeometry(grid.dqx * 2, "x")
    program = SymplecticProgram([
        FourierTransform(), SqueezeLayer(GainProfile.uniform(s)),
        BandOverlap(geom), FourierTransform(inverse=True),
    ])
    state = GaussianState.from_program(program, grid)
    jv = joint_pair_variances(state, "near")
    expect = np.exp(-2 * s) / 4.0
    worst = max(float(np.max(np.abs(jv.x_minus - expect))),
                float(np.max(np.abs(jv.y_plus - expect))))
    return CheckResult("overlap-locality", worst < 1e-9,
                       f"max |joint variance - expected| = {worst:.3e}")


ALL_CHECKS: List[Callable[[int], CheckResult]] = [
    check_qnl_normalisation,
    check_symplecticity,
    check_uncertainty_bound,
    check_engine_equivalence,
    check_phase_law,
    check_overlap_locality,
]


def run_selfcheck(seed: int = 0) -> List[CheckResult]:
    return [check(seed) for check in ALL_CHECKS]
