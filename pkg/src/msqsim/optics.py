"""Physical elements of the travelling-wave amplifier model.

The amplifier couples the two frequency sidebands pairwise in the far field:
each spatial frequency q at the upper sideband is two-mode squeezed with -q at
the lower sideband, with a q-dependent strength drawn from an annular gain
profile.  A finite-length medium is modelled as split steps of squeezing and
paraxial propagation.  The band-recentering overlap superposes the two
translated halves of the gain annulus on a 50/50 splitter so the output
squeezing spectrum is gapless through q = 0, at the price of a restricted
spatial band.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .grid import FAR, NEAR, TransverseGrid
from .program import Element, ProgramError, SymplecticProgram
from .state import VACUUM_VARIANCE


# ---------------------------------------------------------------------------
# gain <-> squeeze arithmetic
# ---------------------------------------------------------------------------

def gain_to_squeeze(gain: float) -> float:
    """Squeeze parameter of a phase-insensitive amplifier of intensity gain G.

    Uses the standard two-mode-squeezer relation G = cosh(s)^2, i.e.
    ``s = ln(sqrt(G) + sqrt(G-1))``; monotone in G with s(1) = 0.
    """
    if gain < 1.0:
        raise ValueError(f"gain must be >= 1, got {gain}")
    return float(np.arccosh(np.sqrt(gain)))


def squeeze_to_gain(s: float) -> float:
    """Inverse of :func:`gain_to_squeeze`: G = cosh(s)^2."""
    if s < 0.0:
        raise ValueError(f"squeeze parameter must be >= 0, got {s}")
    return float(np.cosh(s) ** 2)


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainProfile:
    """Radial far-field squeeze-strength profile (Gaussian annulus).

    ``s(q) = s_max * exp(-(|q| - q_peak)^2 / (2 q_sigma^2))`` with the value
    at exactly q = 0 clamped down to ``q_gap_floor * s_max``, reflecting the
    suppressed amplifier coupling of low spatial frequencies.  ``pump_phase``
    sets the two-mode squeezing angle (0 squeezes the X-difference and Y-sum
    joint quadratures).
    """

    s_max: float
    q_peak: float
    q_sigma: float
    q_gap_floor: float = 0.0
    pump_phase: float = 0.0

    def __post_init__(self):
        if self.s_max < 0:
            raise ValueError("s_max must be >= 0")
        if not self.q_sigma > 0:
            raise ValueError("q_sigma must be positive (np.inf allowed)")
        if self.q_peak < 0:
            raise ValueError("q_peak must be >= 0")
        if not 0.0 <= self.q_gap_floor <= 1.0:
            raise ValueError("q_gap_floor must lie in [0, 1]")

    @classmethod
    def uniform(cls, s: float, pump_phase: float = 0.0) -> "GainProfile":
        """Flat profile s(q) = s for every q (thin-amplifier test profile)."""
        return cls(s_max=s, q_peak=0.0, q_sigma=np.inf, q_gap_floor=1.0,
                   pump_phase=pump_phase)

    def s_values(self, q_abs: np.ndarray) -> np.ndarray:
        """Squeeze parameter at each |q|; nonnegative everywhere."""
        q_abs = np.asarray(q_abs, dtype=float)
        with np.errstate(over="ignore"):
            s = self.s_max * np.exp(-((q_abs - self.q_peak) ** 2) / (2.0 * self.q_sigma**2))
        floor = self.q_gap_floor * self.s_max
        return np.where(q_abs == 0.0, np.minimum(s, floor), s)


@dataclass(frozen=True)
class MediumSpec:
    """Finite-length amplifier cell parameters."""

    length_mm: float
    wavelength_nm: float
    refractive_index: float = 1.0
    slices: int = 16
    gain: float = 1.0

    def __post_init__(self):
        if self.length_mm < 0:
            raise ValueError("length_mm must be >= 0")
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength_nm must be positive")
        if self.refractive_index <= 0:
            raise ValueError("refractive_index must be positive")
        if self.slices < 1:
            raise ValueError("slices must be >= 1")
        if self.gain < 1:
            raise ValueError("gain must be >= 1")

    @property
    def wavelength_mm(self) -> float:
        return self.wavelength_nm * 1e-6

    @property
    def s_total(self) -> float:
        return gain_to_squeeze(self.gain)


@dataclass(frozen=True)
class OverlapGeometry:
    """Spectral offset of the two recentred gain bands."""

    q0: float
    axis: str = "x"

    def __post_init__(self):
        if self.q0 <= 0:
            raise ValueError("q0 must be positive")
        if self.axis not in ("x", "y"):
            raise ValueError("axis must be 'x' or 'y'")

    def offset_index(self, grid: TransverseGrid) -> int:
        """q0 expressed in q-grid steps; rejects off-grid offsets."""
        dq = grid.dqx if self.axis == "x" else grid.dqy
        m_float = self.q0 / dq
        m = int(round(m_float))
        if abs(m_float - m) > 1e-9 * max(1.0, m_float):
            raise ProgramError(
                f"overlap offset {self.q0} rad/mm is not a multiple of the "
                f"q spacing {dq} rad/mm"
            )
        return m


# ---------------------------------------------------------------------------
# elements
# ---------------------------------------------------------------------------

class FourierTransform(Element):
    """Unitary map between near-field and far-field mode bases.

    Forward: ``a(q) = (1/sqrt(N)) sum_rho exp(-i q.rho) a(rho)`` with centred
    near-field coordinates and fftfreq-ordered q; implemented as
    ``fft2(ifftshift(.))`` with orthonormal scaling.
    """

    def __init__(self, inverse: bool = False):
        self.inverse = bool(inverse)
        self.basis_in = FAR if self.inverse else NEAR

    def output_basis(self, basis: str) -> str:
        return NEAR if self.inverse else FAR

    @staticmethod
    def _forward(fields: np.ndarray) -> np.ndarray:
        shifted = np.fft.ifftshift(fields, axes=(-2, -1))
        return np.fft.fft2(shifted, axes=(-2, -1), norm="ortho")

    @staticmethod
    def _backward(spectra: np.ndarray) -> np.ndarray:
        out = np.fft.ifft2(spectra, axes=(-2, -1), norm="ortho")
        return np.fft.fftshift(out, axes=(-2, -1))

    def bogoliubov(self, grid: TransverseGrid):
        n = grid.n_points
        basis = np.eye(n).reshape(n, grid.ny, grid.nx)
        cols = self._backward(basis) if self.inverse else self._forward(basis)
        f = cols.reshape(n, n).T
        a = np.zeros((2 * n, 2 * n), dtype=complex)
        a[:n, :n] = f
        a[n:, n:] = f
        return a, None

    def back_propagate(self, c: np.ndarray, grid: TransverseGrid):
        pair = c.reshape(2, grid.ny, grid.nx)
        out = self._backward(pair) if not self.inverse else self._forward(pair)
        return out.reshape(-1), 0.0


class SqueezeLayer(Element):
    """q-resolved two-mode squeezer between opposite far-field frequencies.

    Applies an independent two-mode squeezer of parameter
    ``s_scale * s(|q|)`` and phase ``pump_phase`` to every pair
    {(q, upper), (-q, lower)}.  The pairing is the total involution
    q -> -q modulo the grid; Nyquist rows pair across the sidebands at their
    own (self-negating) frequency, which keeps the layer exactly equivalent
    to a locally phase-conjugating thin amplifier in the near field.
    """

    basis_in = FAR

    def __init__(self, profile: GainProfile, s_scale: float = 1.0):
        if not 0.0 < s_scale <= 1.0:
            raise ValueError("s_scale must lie in (0, 1]")
        self.profile = profile
        self.s_scale = float(s_scale)

    def _pair_params(self, grid: TransverseGrid):
        s = self.s_scale * self.profile.s_values(grid.q_radius.ravel())
        perm = grid.negation_permutation
        phase = np.exp(1j * self.profile.pump_phase)
        return s, perm, phase

    def bogoliubov(self, grid: TransverseGrid):
        n = grid.n_points
        s, perm, phase = self._pair_params(grid)
        a = np.diag(np.concatenate([np.cosh(s), np.cosh(s[perm])])).astype(complex)
        b = np.zeros((2 * n, 2 * n), dtype=complex)
        idx = np.arange(n)
        b[idx, n + perm] = phase * np.sinh(s)
        b[n + perm, idx] = phase * np.sinh(s)
        return a, b

    def back_propagate(self, c: np.ndarray, grid: TransverseGrid):
        n = grid.n_points
        s, perm, phase = self._pair_params(grid)
        cu, cl = c[:n], c[n:]
        out = np.empty_like(c)
        out[:n] = np.cosh(s) * cu + phase * np.sinh(s) * np.conj(cl[perm])
        out[n:] = np.cosh(s[perm]) * cl + phase * np.sinh(s[perm]) * np.conj(cu[perm])
        return out, 0.0


class FresnelSlice(Element):
    """Paraxial propagation over dz: far-field phase ``-|q|^2 dz / (2k)``.

    ``k = 2 pi n / lambda`` with all lengths in mm; negative dz back-propagates
    (used to reference the output plane to the cell centre).  dz = 0 is the
    identity.
    """

    basis_in = FAR

    def __init__(self, dz_mm: float, wavelength_mm: float, refractive_index: float = 1.0):
        if wavelength_mm <= 0:
            raise ValueError("wavelength must be positive")
        self.dz_mm = float(dz_mm)
        self.wavelength_mm = float(wavelength_mm)
        self.refractive_index = float(refractive_index)

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi * self.refractive_index / self.wavelength_mm

    def _phases(self, grid: TransverseGrid) -> np.ndarray:
        phi = -(grid.q_radius.ravel() ** 2) * self.dz_mm / (2.0 * self.wavenumber)
        return np.concatenate([phi, phi])

    def bogoliubov(self, grid: TransverseGrid):
        return np.diag(np.exp(1j * self._phases(grid))), None

    def back_propagate(self, c: np.ndarray, grid: TransverseGrid):
        return c * np.exp(-1j * self._phases(grid)), 0.0


class PhaseMask(Element):
    """Per-mode quadrature-phase rotation from an arbitrary phase map.

    ``phases`` is either a callable ``grid -> array`` or a static array, of
    length ``n_modes`` (per mode) or ``n_points`` (same map on both
    sidebands).
    """

    def __init__(self, phases, basis: str = "any"):
        self._phases = phases
        self.basis_in = basis

    def _phase_vector(self, grid: TransverseGrid) -> np.ndarray:
        phi = self._phases(grid) if callable(self._phases) else np.asarray(self._phases)
        phi = np.asarray(phi, dtype=float).ravel()
        if phi.size == grid.n_points:
            phi = np.concatenate([phi, phi])
        if phi.size != grid.n_modes:
            raise ProgramError(
                f"phase map has {phi.size} entries, expected {grid.n_points} "
                f"or {grid.n_modes}"
            )
        return phi

    def bogoliubov(self, grid: TransverseGrid):
        return np.diag(np.exp(1j * self._phase_vector(grid))), None

    def back_propagate(self, c: np.ndarray, grid: TransverseGrid):
        return c * np.exp(-1j * self._phase_vector(grid)), 0.0


class BandOverlap(Element):
    """50/50 superposition of the two gain bands translated by -/+ q0.

    For every recentred frequency q with offset-axis component in
    [-q0, q0), the output mode is ``[a(q + q0) + a(q - q0)]/sqrt(2)`` per
    sideband (superposition phase 0; it is physically arbitrary).  The output
    grid keeps the field of view but halves its frequency band along the
    offset axis to 2m columns, where ``m = q0 / dq``; input modes feeding
    neither retained output are dropped (traced out, i.e. lost into the
    unmonitored splitter port).

    Discretisation note: the output band-edge column (its own Nyquist row)
    draws from the input frequencies {0, -2 q0}; the correlation partner of
    the -2 q0 column is retained only when 2 q0 is itself the input Nyquist
    frequency, i.e. ``m = nx/4``.  At that offset the overlap preserves
    near-field local squeezing exactly; for other on-grid offsets the single
    edge column carries halved correlations.
    """

    basis_in = FAR

    def __init__(self, geometry: OverlapGeometry):
        self.geometry = geometry

    def output_grid(self, grid: TransverseGrid) -> TransverseGrid:
        m = self.geometry.offset_index(grid)
        if self.geometry.axis == "x":
            n_axis = grid.nx
        else:
            n_axis = grid.ny
        if m < 1:
            raise ProgramError("overlap offset must be at least one q step")
        if 4 * m > n_axis:
            raise ProgramError(
                f"band [-q0, q0) with q0 = {m} steps needs input frequencies up "
                f"to 2*q0; grid supports at most {n_axis // 4} steps"
            )
        if self.geometry.axis == "x":
            return TransverseGrid(2 * m, grid.ny, grid.extent_x / (2 * m), grid.pitch_y)
        return TransverseGrid(grid.nx, 2 * m, grid.pitch_x, grid.extent_y / (2 * m))

    def _column_map(self, grid: TransverseGrid):
        """Output-axis index -> the two source input-axis indices."""
        m = self.geometry.offset_index(grid)
        n_axis = grid.nx if self.geometry.axis == "x" else grid.ny
        out_idx = np.arange(2 * m)
        signed = np.where(out_idx < m, out_idx, out_idx - 2 * m)
        hi = (signed + m) % n_axis
        lo = (signed - m) % n_axis
        return out_idx, hi, lo

    def _point_map(self, grid: TransverseGrid):
        """Flat output-point index -> the two flat input-point indices."""
        out_idx, hi, lo = self._column_map(grid)
        if self.geometry.axis == "x":
            rows = np.arange(grid.ny)[:, None]
            out_pts = (rows * out_idx.size + out_idx[None, :]).ravel()
            hi_pts = (rows * grid.nx + hi[None, :]).ravel()
            lo_pts = (rows * grid.nx + lo[None, :]).ravel()
        else:
            cols = np.arange(grid.nx)[None, :]
            out_pts = (out_idx[:, None] * grid.nx + cols).ravel()
            hi_pts = (hi[:, None] * grid.nx + cols).ravel()
            lo_pts = (lo[:, None] * grid.nx + cols).ravel()
        return out_pts, hi_pts, lo_pts

    def bogoliubov(self, grid: TransverseGrid):
        out_grid = self.output_grid(grid)
        n_in, n_out = grid.n_points, out_grid.n_points
        v = np.zeros((n_out, n_in))
        out_pts, hi_pts, lo_pts = self._point_map(grid)
        root_half = 1.0 / np.sqrt(2.0)
        v[out_pts, hi_pts] += root_half
        v[out_pts, lo_pts] += root_half
        a = np.zeros((2 * n_out, 2 * n_in), dtype=complex)
        a[:n_out, :n_in] = v
        a[n_out:, n_in:] = v
        return a, None

    def back_propagate(self, c: np.ndarray, grid: TransverseGrid):
        out_grid = self.output_grid(grid)
        n_in, n_out = grid.n_points, out_grid.n_points
        out_pts, hi_pts, lo_pts = self._point_map(grid)
        root_half = 1.0 / np.sqrt(2.0)
        result = np.zeros(2 * n_in, dtype=complex)
        for s in (0, 1):
            block = c[s * n_out:(s + 1) * n_out]
            np.add.at(result, s * n_in + hi_pts, root_half * block[out_pts])
            np.add.at(result, s * n_in + lo_pts, root_half * block[out_pts])
        return result, 0.0


class Loss(Element):
    """Uniform attenuation: ``Sigma -> eta Sigma + (1 - eta) Sigma_vac``.

    The beamsplitter-with-vacuum-ancilla CP map applied directly to the
    covariance; no ancilla modes are materialised.
    """

    def __init__(self, eta: float):
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"transmission eta must lie in [0, 1], got {eta}")
        self.eta = float(eta)

    @property
    def is_lossy(self) -> bool:
        return True

    def bogoliubov(self, grid: TransverseGrid):
        raise ProgramError("Loss has no symplectic realisation; it is a CP map")

    def apply_cov(self, cov: np.ndarray, grid: TransverseGrid) -> np.ndarray:
        dim = cov.shape[0]
        return self.eta * cov + (1.0 - self.eta) * VACUUM_VARIANCE * np.eye(dim)

    def back_propagate(self, c: np.ndarray, grid: TransverseGrid):
        vac = (1.0 - self.eta) * VACUUM_VARIANCE * float(np.vdot(c, c).real)
        return np.sqrt(self.eta) * c, vac


class SpatialLoss(Element):
    """Mode-dependent attenuation from a near-field transmission map.

    ``transmission`` maps a grid to intensity transmissions eta(rho) in
    [0, 1], applied identically to both sidebands.  Models a soft aperture:
    outside the transmitting region the state relaxes to vacuum.
    """

    basis_in = NEAR

    def __init__(self, transmission: Callable[[TransverseGrid], np.ndarray], label: str = ""):
        self.transmission = transmission
        self.label = label

    @property
    def is_lossy(self) -> bool:
        return True

    def eta_modes(self, grid: TransverseGrid) -> np.ndarray:
        eta = np.asarray(self.transmission(grid), dtype=float).ravel()
        if eta.size != grid.n_points:
            raise ProgramError(
                f"transmission map has {eta.size} entries, expected {grid.n_points}"
            )
        if np.any(eta < 0) or np.any(eta > 1):
            raise ProgramError("transmission values must lie in [0, 1]")
        return np.concatenate([eta, eta])

    def bogoliubov(self, grid: TransverseGrid):
        raise ProgramError("SpatialLoss has no symplectic realisation; it is a CP map")

    def apply_cov(self, cov: np.ndarray, grid: TransverseGrid) -> np.ndarray:
        eta = self.eta_modes(grid)
        d = np.sqrt(np.concatenate([eta, eta]))
        out = d[:, None] * cov * d[None, :]
        out[np.diag_indices_from(out)] += (1.0 - np.concatenate([eta, eta])) * VACUUM_VARIANCE
        return out

    def back_propagate(self, c: np.ndarray, grid: TransverseGrid):
        eta = self.eta_modes(grid)
        vac = VACUUM_VARIANCE * float(np.sum((1.0 - eta) * np.abs(c) ** 2))
        return np.sqrt(eta) * c, vac


# ---------------------------------------------------------------------------
# element constructors / program fragments
# ---------------------------------------------------------------------------

def squeeze_layer(profile: GainProfile, s_scale: float = 1.0) -> SqueezeLayer:
    return SqueezeLayer(profile, s_scale)


def fresnel_slice(dz_mm: float, wavelength_mm: float, refractive_index: float = 1.0) -> FresnelSlice:
    return FresnelSlice(dz_mm, wavelength_mm, refractive_index)


def band_overlap(geometry: OverlapGeometry) -> BandOverlap:
    return BandOverlap(geometry)


def loss(eta: float) -> Loss:
    return Loss(eta)


def gain_region_aperture(waist_mm: float, order: int = 4) -> SpatialLoss:
    """Soft super-Gaussian aperture bounding the squeezed-emission region.

    Intensity transmission ``eta(rho) = exp(-2 (r/waist)^(2*order))``;
    order 1 is a Gaussian envelope, larger orders are flat-topped.  ``waist``
    is the 1/e^2 transmission radius for every order.
    """
    if waist_mm <= 0:
        raise ValueError("aperture waist must be positive")
    if order < 1:
        raise ValueError("aperture order must be >= 1")

    def transmission(grid: TransverseGrid) -> np.ndarray:
        xx, yy = grid.meshgrid()
        r2 = (xx**2 + yy**2) / waist_mm**2
        return np.exp(-2.0 * r2**order)

    return SpatialLoss(transmission, label=f"aperture(w={waist_mm}, order={order})")


def build_medium(medium: MediumSpec, profile: GainProfile) -> Tuple[Element, ...]:
    """Far-field program fragment for the finite-length amplifier cell.

    M repetitions of [squeeze(1/M), propagate(l/M)] bracketed by two
    half-length back-propagations so the reference plane is the cell centre.
    A zero-length medium reduces to a single thin squeeze layer.
    """
    m_slices = medium.slices
    elements: list[Element] = []
    if medium.length_mm == 0.0:
        return (SqueezeLayer(profile, 1.0 / m_slices),) * m_slices if m_slices > 1 else (
            SqueezeLayer(profile, 1.0),
        )
    lam = medium.wavelength_mm
    n_ref = medium.refractive_index
    elements.append(FresnelSlice(-medium.length_mm / 2.0, lam, n_ref))
    for _ in range(m_slices):
        elements.append(SqueezeLayer(profile, 1.0 / m_slices))
        elements.append(FresnelSlice(medium.length_mm / m_slices, lam, n_ref))
    elements.append(FresnelSlice(-medium.length_mm / 2.0, lam, n_ref))
    return tuple(elements)
