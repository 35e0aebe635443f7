"""Transverse sampling grid and mode bookkeeping.

A state lives on a rectangular near-field grid of ``nx x ny`` points with
sample spacing ``pitch_x``/``pitch_y`` (mm).  The conjugate spatial-frequency
grid follows the discrete-Fourier convention exactly: along each axis the
frequencies are ``2*pi*fftfreq(n, pitch)`` in rad/mm, so the q-spacing is
``2*pi/(n*pitch)`` and index ``n//2`` is the Nyquist frequency ``-pi/pitch``.

Near-field coordinates are centred: ``x[i] = (i - nx//2) * pitch_x``, so the
origin is always a sample point.

Each grid point carries two optical modes, one per frequency sideband
(upper = probe side, lower = conjugate side).  The global mode ordering is
total and fixed everywhere in the package: sideband-major, then row-major
grid order (flat grid index ``g = iy*nx + ix``), i.e. mode ``m = s*nx*ny + g``
with sideband ``s`` = 0 (upper) or 1 (lower).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

UPPER = 0  #: sideband index of the probe-side (+) component
LOWER = 1  #: sideband index of the conjugate-side (-) component

NEAR = "near"
FAR = "far"


@dataclass(frozen=True)
class TransverseGrid:
    """Discretised transverse plane and its conjugate frequency grid.

    ``pitch_x`` and ``pitch_y`` may differ; :func:`make_grid` produces square
    pixels, but the band-recentering overlap returns grids whose x pitch has
    been coarsened (fewer spatial-frequency columns over the same field of
    view).
    """

    nx: int
    ny: int
    pitch_x: float
    pitch_y: float

    def __post_init__(self):
        for name, n in (("nx", self.nx), ("ny", self.ny)):
            if not isinstance(n, (int, np.integer)) or n < 2 or n % 2 != 0:
                raise ValueError(f"{name} must be an even integer >= 2, got {n!r}")
        for name, p in (("pitch_x", self.pitch_x), ("pitch_y", self.pitch_y)):
            if not p > 0:
                raise ValueError(f"{name} must be positive, got {p!r}")

    # -- sizes ---------------------------------------------------------------

    @property
    def n_points(self) -> int:
        return self.nx * self.ny

    @property
    def n_modes(self) -> int:
        """Total mode count over both sidebands."""
        return 2 * self.n_points

    @property
    def extent_x(self) -> float:
        return self.nx * self.pitch_x

    @property
    def extent_y(self) -> float:
        return self.ny * self.pitch_y

    # -- frequency-side geometry ----------------------------------------------

    @property
    def dqx(self) -> float:
        """q-grid spacing along x, ``2*pi/(nx*pitch_x)`` [rad/mm]."""
        return 2.0 * np.pi / self.extent_x

    @property
    def dqy(self) -> float:
        return 2.0 * np.pi / self.extent_y

    @cached_property
    def qx(self) -> np.ndarray:
        q = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.pitch_x)
        q.flags.writeable = False
        return q

    @cached_property
    def qy(self) -> np.ndarray:
        q = 2.0 * np.pi * np.fft.fftfreq(self.ny, d=self.pitch_y)
        q.flags.writeable = False
        return q

    @cached_property
    def q_radius(self) -> np.ndarray:
        """``|q|`` on the (ny, nx) frequency grid."""
        r = np.hypot(self.qy[:, None], self.qx[None, :])
        r.flags.writeable = False
        return r

    # -- near-field geometry ---------------------------------------------------

    @cached_property
    def x(self) -> np.ndarray:
        v = (np.arange(self.nx) - self.nx // 2) * self.pitch_x
        v.flags.writeable = False
        return v

    @cached_property
    def y(self) -> np.ndarray:
        v = (np.arange(self.ny) - self.ny // 2) * self.pitch_y
        v.flags.writeable = False
        return v

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Near-field (X, Y) coordinate arrays of shape (ny, nx)."""
        return np.meshgrid(self.x, self.y)

    # -- index maps -------------------------------------------------------------

    def flat_index(self, ix, iy):
        """Flat grid index of column ``ix``, row ``iy`` (row-major)."""
        return iy * self.nx + ix

    def mode_number(self, ix: int, iy: int, sideband: int) -> int:
        if sideband not in (UPPER, LOWER):
            raise ValueError(f"sideband must be {UPPER} or {LOWER}")
        return sideband * self.n_points + self.flat_index(ix, iy)

    @cached_property
    def negation_permutation(self) -> np.ndarray:
        """Flat-grid permutation mapping index of q to the index of -q.

        Mirrors each frequency axis modulo the grid, so the permutation is a
        total involution: ``P[P[g]] == g`` for every g.  The Nyquist row and
        column map to themselves because ``-pi/pitch`` and ``+pi/pitch`` are
        the same discrete frequency.
        """
        ix = np.arange(self.nx)
        iy = np.arange(self.ny)
        mx = (-ix) % self.nx
        my = (-iy) % self.ny
        perm = my[:, None] * self.nx + mx[None, :]
        perm = perm.ravel()
        perm.flags.writeable = False
        return perm

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """Boolean (flat) mask of grid points on a Nyquist row or column.

        These frequencies are their own negation on the discrete grid; they
        are flagged in output metadata because the q value printed for them
        (``-pi/pitch``) is aliased with ``+pi/pitch``.
        """
        ix = np.arange(self.nx)
        iy = np.arange(self.ny)
        mask = (iy[:, None] == self.ny // 2) | (ix[None, :] == self.nx // 2)
        mask = mask.ravel()
        mask.flags.writeable = False
        return mask

    def pair_block_permutation(self) -> np.ndarray:
        """Mode permutation that makes two-mode pair blocks contiguous.

        Modes are reordered as ``[(g, upper), (P[g], lower)]`` for each flat
        grid index g, placing every squeezed pair in adjacent slots.  The
        returned array ``perm`` satisfies ``reordered[i] = modes[perm[i]]``
        and is its own inverse under the pair swap structure, i.e. applying
        it twice restores the original ordering.
        """
        n = self.n_points
        perm = np.empty(2 * n, dtype=np.intp)
        neg = self.negation_permutation
        perm[0::2] = np.arange(n)
        perm[1::2] = n + neg
        return perm

    def compatible(self, other: "TransverseGrid") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and np.isclose(self.pitch_x, other.pitch_x, rtol=1e-12, atol=0)
            and np.isclose(self.pitch_y, other.pitch_y, rtol=1e-12, atol=0)
        )


@dataclass(frozen=True)
class ModeIndex:
    """Label of a single optical mode: grid point, sideband and basis."""

    ix: int
    iy: int
    sideband: int
    basis: str = NEAR

    def __post_init__(self):
        if self.sideband not in (UPPER, LOWER):
            raise ValueError("sideband must be UPPER (0) or LOWER (1)")
        if self.basis not in (NEAR, FAR):
            raise ValueError("basis must be 'near' or 'far'")

    def flat(self, grid: TransverseGrid) -> int:
        return grid.mode_number(self.ix, self.iy, self.sideband)


def make_grid(nx: int, ny: int, pitch: float) -> TransverseGrid:
    """Build a square-pixel transverse grid.

    ``nx``/``ny`` must be even so that q and -q are both grid frequencies for
    every non-Nyquist q; ``pitch`` is the near-field sample spacing in mm.
    """
    return TransverseGrid(nx=int(nx), ny=int(ny), pitch_x=float(pitch), pitch_y=float(pitch))
