"""Symplectic programs: ordered optical elements and the dense oracle engine.

Every lossless element is a Bogoliubov map ``a -> A a + B a*`` on the mode
annihilation operators; its quadrature-space realisation in xxpp ordering is

    S = [[Re(A+B), -Im(A-B)],
         [Im(A+B),  Re(A-B)]]

which satisfies ``S J S^T = J`` (rectangular isometries map the input form to
the output form).  Loss is not symplectic: it is the beamsplitter-with-vacuum
CP map applied directly to the covariance.

The dense engine composes elements left to right on an explicit covariance
matrix and is the reference oracle the matrix-free detection path is checked
against.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .grid import FAR, NEAR, TransverseGrid
from .state import DEFAULT_MODE_CAP, TOL_STRUCTURAL, VACUUM_VARIANCE, symplectic_form


class ProgramError(ValueError):
    """Raised for inconsistent program composition or engine misuse."""


class Element(ABC):
    """One optical element of a symplectic program."""

    #: basis the element expects its input state in: 'near', 'far' or 'any'
    basis_in: str = "any"

    def output_basis(self, basis: str) -> str:
        return basis

    def output_grid(self, grid: TransverseGrid) -> TransverseGrid:
        return grid

    def check_basis(self, basis: str) -> None:
        if self.basis_in != "any" and basis != self.basis_in:
            raise ProgramError(
                f"{type(self).__name__} expects a {self.basis_in!r}-basis state, got {basis!r}"
            )

    @abstractmethod
    def bogoliubov(self, grid: TransverseGrid) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Dense (A, B) blocks of the mode map on ``grid``; B may be None."""

    @abstractmethod
    def back_propagate(self, c: np.ndarray, grid: TransverseGrid) -> Tuple[np.ndarray, float]:
        """Adjoint action on a complex measurement vector.

        Maps a vector on the element's *output* modes to one on its input
        modes via ``c -> A^H c + B^T conj(c)`` and returns any vacuum-noise
        contribution picked up here (nonzero only for lossy elements).
        ``grid`` is the element's input grid.
        """

    # -- dense-engine hooks -----------------------------------------------------

    def quadrature_matrix(self, grid: TransverseGrid) -> np.ndarray:
        a, b = self.bogoliubov(grid)
        return quadrature_matrix(a, b)

    def apply_cov(self, cov: np.ndarray, grid: TransverseGrid) -> np.ndarray:
        s = self.quadrature_matrix(grid)
        return s @ cov @ s.T

    @property
    def is_lossy(self) -> bool:
        return False


def quadrature_matrix(a: np.ndarray, b: Optional[np.ndarray]) -> np.ndarray:
    """Real quadrature realisation of the Bogoliubov blocks (A, B)."""
    if b is None:
        apb = a
        amb = a
    else:
        apb = a + b
        amb = a - b
    return np.block([[apb.real, -amb.imag], [apb.imag, amb.real]])


def symplectic_defect(s: np.ndarray, n_in: int) -> float:
    """Max-norm deviation of ``S J_in S^T`` from the output-form J."""
    j_in = symplectic_form(n_in)
    n_out = s.shape[0] // 2
    j_out = symplectic_form(n_out)
    return float(np.max(np.abs(s @ j_in @ s.T - j_out)))


@dataclass(frozen=True)
class SymplecticProgram:
    """Ordered element list, evaluated dense (oracle) or implicitly."""

    elements: Tuple[Element, ...]

    def __init__(self, elements: Iterable[Element] = ()):
        object.__setattr__(self, "elements", tuple(elements))

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def extended(self, *more: Element) -> "SymplecticProgram":
        return SymplecticProgram(self.elements + tuple(more))

    def validate(self, grid: TransverseGrid, basis: str = NEAR) -> Tuple[TransverseGrid, str]:
        """Walk the program checking basis consistency; return final (grid, basis)."""
        if basis not in (NEAR, FAR):
            raise ProgramError(f"unknown basis {basis!r}")
        for el in self.elements:
            el.check_basis(basis)
            grid = el.output_grid(grid)
            basis = el.output_basis(basis)
        return grid, basis

    def output_grid(self, grid: TransverseGrid) -> TransverseGrid:
        return self.validate(grid)[0]

    def grid_trace(self, grid: TransverseGrid) -> Tuple[TransverseGrid, ...]:
        """Input grid of each element plus the final grid."""
        grids = [grid]
        for el in self.elements:
            grid = el.output_grid(grid)
            grids.append(grid)
        return tuple(grids)


def dense_realize(
    program: SymplecticProgram,
    grid: TransverseGrid,
    basis: str = NEAR,
    mode_cap: int = DEFAULT_MODE_CAP,
    check_symplectic: bool = True,
    tol: float = TOL_STRUCTURAL,
) -> np.ndarray:
    """Reference-oracle covariance of ``program`` applied to vacuum.

    Composes ``Sigma -> S Sigma S^T`` left to right; lossy elements apply
    their CP map directly.  Refuses grids above ``mode_cap`` modes and raises
    on any internally non-symplectic element realisation.
    """
    grids = program.grid_trace(grid)
    worst = max(g.n_modes for g in grids)
    if worst > mode_cap:
        raise ProgramError(
            f"program touches {worst} modes, above the dense-engine cap {mode_cap}"
        )
    program.validate(grid, basis)
    cov = VACUUM_VARIANCE * np.eye(2 * grid.n_modes)
    for el, g in zip(program.elements, grids):
        if check_symplectic and not el.is_lossy:
            s = el.quadrature_matrix(g)
            defect = symplectic_defect(s, g.n_modes)
            if defect > tol:
                raise ProgramError(
                    f"{type(el).__name__} realisation is not symplectic "
                    f"(defect {defect:.3e} > {tol:.1e})"
                )
            cov = s @ cov @ s.T
        else:
            cov = el.apply_cov(cov, g)
    return 0.5 * (cov + cov.T)
