"""Gaussian states over the two-sideband transverse mode set.

Quadrature convention (fixed package-wide): ``X = (a' + a)/2`` and
``Y = i(a' - a)/2`` where ``a'`` is the creation operator, so every vacuum
quadrature has variance 1/4 and the Heisenberg bound reads
``Var(X) * Var(Y) >= 1/16``.  All detection outputs are ratios to the vacuum
level, so the convention never leaks into results.

Covariance matrices are real symmetric of size ``2*n_modes`` in block (xxpp)
ordering: the first ``n_modes`` rows are X quadratures in the fixed mode
ordering of :mod:`msqsim.grid`, the remaining rows the matching Y quadratures.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .grid import NEAR, TransverseGrid

VACUUM_VARIANCE = 0.25

#: default ceiling on the number of modes a dense covariance may hold
DEFAULT_MODE_CAP = 4096

#: tolerance for structural invariants (uncertainty, symplecticity)
TOL_STRUCTURAL = 1e-9
#: tolerance for exact identities (unitarity round trips, vacuum checks)
TOL_EXACT = 1e-12


def symplectic_form(n_modes: int) -> np.ndarray:
    """The antisymmetric form J encoding [X_i, Y_j] = (i/2) delta_ij."""
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


class GaussianState:
    """Zero-mean Gaussian state: dense covariance or a program over vacuum.

    Immutable after construction.  A dense state stores its covariance
    directly; a program-backed state stores a :class:`SymplecticProgram`
    understood as acting on vacuum, which the implicit detection engine can
    evaluate without ever materialising the covariance.
    """

    def __init__(
        self,
        grid: TransverseGrid,
        basis: str,
        cov: Optional[np.ndarray] = None,
        program=None,
        input_grid: Optional[TransverseGrid] = None,
        mode_cap: int = DEFAULT_MODE_CAP,
    ):
        if (cov is None) == (program is None):
            raise ValueError("exactly one of cov/program must be given")
        self.grid = grid
        self.basis = basis
        self._mode_cap = mode_cap
        if cov is not None:
            cov = np.asarray(cov, dtype=float)
            dim = 2 * grid.n_modes
            if cov.shape != (dim, dim):
                raise ValueError(f"covariance must be {dim}x{dim}, got {cov.shape}")
            rel = np.max(np.abs(cov - cov.T)) / max(1.0, np.max(np.abs(cov)))
            if rel > 1e-12:
                raise ValueError(f"covariance not symmetric (relative asymmetry {rel:.2e})")
            cov = 0.5 * (cov + cov.T)
            cov.flags.writeable = False
        self._cov = cov
        self._program = program
        self._input_grid = input_grid
        self._input_basis = NEAR

    # -- constructors ----------------------------------------------------------

    @classmethod
    def from_covariance(cls, grid: TransverseGrid, cov: np.ndarray, basis: str = NEAR):
        return cls(grid, basis, cov=cov)

    @classmethod
    def from_program(cls, program, input_grid: TransverseGrid, basis_in: str = NEAR,
                     mode_cap: int = DEFAULT_MODE_CAP):
        """State obtained by running ``program`` on vacuum of ``input_grid``."""
        out_grid, out_basis = program.validate(input_grid, basis_in)
        state = cls(out_grid, out_basis, program=program, input_grid=input_grid,
                    mode_cap=mode_cap)
        state._input_basis = basis_in
        return state

    # -- representation --------------------------------------------------------

    @property
    def is_dense(self) -> bool:
        return self._cov is not None

    @property
    def program(self):
        return self._program

    @property
    def input_grid(self) -> Optional[TransverseGrid]:
        return self._input_grid

    @property
    def input_basis(self) -> str:
        return self._input_basis

    def covariance(self) -> np.ndarray:
        """Dense covariance matrix, realising the program if needed."""
        if self._cov is None:
            from .program import dense_realize

            cov = dense_realize(self._program, self._input_grid,
                                basis=self._input_basis, mode_cap=self._mode_cap)
            cov.flags.writeable = False
            # cache: the state is immutable so this is observationally pure
            self._cov = cov
        return self._cov

    # -- diagnostics -------------------------------------------------------------

    def symplectic_spectrum(self) -> np.ndarray:
        return symplectic_spectrum(self.covariance())

    def purity(self) -> float:
        """Tr(rho^2); 1 for vacuum and any pure Gaussian state."""
        nu = self.symplectic_spectrum()
        return float(np.prod(VACUUM_VARIANCE / nu))


def vacuum(grid: TransverseGrid, mode_cap: int = DEFAULT_MODE_CAP) -> GaussianState:
    """Vacuum state: covariance exactly (1/4) * identity."""
    if grid.n_modes > mode_cap:
        raise ValueError(
            f"grid has {grid.n_modes} modes, above the dense cap {mode_cap}"
        )
    cov = VACUUM_VARIANCE * np.eye(2 * grid.n_modes)
    return GaussianState.from_covariance(grid, cov)


def check_uncertainty(state: GaussianState) -> float:
    """Worst eigenvalue of the uncertainty matrix ``Sigma + (i/4) J``.

    Physical states give a nonnegative value up to numerical tolerance;
    pure states saturate it at zero.
    """
    cov = state.covariance()
    n_modes = cov.shape[0] // 2
    herm = cov + 0.25j * symplectic_form(n_modes)
    eigvals = np.linalg.eigvalsh(herm)
    return float(eigvals[0])


def symplectic_spectrum(cov: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a covariance matrix (vacuum value 1/4).

    Computed as the positive halves of the spectrum of ``i J Sigma``; invariant
    under every symplectic transform, hence a basis-independent purity probe.
    """
    n_modes = cov.shape[0] // 2
    m = 1j * symplectic_form(n_modes) @ cov
    ev = np.linalg.eigvals(m)
    nu = np.sort(np.abs(ev))
    # eigenvalues come in +/- pairs; keep one of each
    return nu[::2] if nu.size % 2 == 0 else nu
