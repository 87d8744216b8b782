"""Dense operators on the composite atom x cavity space.

Ordering is atom (x) cavity everywhere: the basis state with atomic level
``l`` and ``n`` photons sits at index ``l * n_fock + n``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidLevelError, InvalidSpaceError


@dataclass(frozen=True)
class SpaceLayout:
    n_levels: int
    n_fock: int

    def __post_init__(self):
        if self.n_levels < 1 or self.n_fock < 1:
            raise InvalidSpaceError(
                f"layout needs positive sizes, got {self.n_levels}x{self.n_fock}"
            )

    @property
    def dim(self):
        return self.n_levels * self.n_fock

    def index(self, level, photons):
        if not 0 <= level < self.n_levels:
            raise InvalidLevelError(f"level {level} outside [0, {self.n_levels})")
        if not 0 <= photons < self.n_fock:
            raise InvalidSpaceError(f"photon number {photons} outside [0, {self.n_fock})")
        return level * self.n_fock + photons

    def basis_state(self, level, photons=0):
        """Density matrix |level, photons><level, photons|."""
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        i = self.index(level, photons)
        rho[i, i] = 1.0
        return rho


def kron(a, b):
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def annihilation(n_fock):
    if n_fock < 2:
        raise InvalidSpaceError(f"annihilation operator needs n_fock >= 2, got {n_fock}")
    return np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), k=1).astype(complex)


def creation(n_fock):
    return annihilation(n_fock).conj().T


def cavity_annihilation(layout):
    """Cavity lowering operator lifted to the composite space."""
    return kron(np.eye(layout.n_levels), annihilation(layout.n_fock))


def transition(layout, from_level, to_level):
    """|to><from| on the atom, identity on the cavity."""
    for level in (from_level, to_level):
        if not 0 <= level < layout.n_levels:
            raise InvalidLevelError(f"level {level} outside [0, {layout.n_levels})")
    atom = np.zeros((layout.n_levels, layout.n_levels), dtype=complex)
    atom[to_level, from_level] = 1.0
    return kron(atom, np.eye(layout.n_fock))


def expectation(op, rho):
    op = np.asarray(op)
    rho = np.asarray(rho)
    if op.shape != rho.shape:
        raise DimensionMismatchError(f"operator {op.shape} vs state {rho.shape}")
    # Tr(A rho) without forming the product
    return complex(np.einsum("ij,ji->", op, rho))


def dagger(op):
    return np.asarray(op).conj().T


def hermiticity_error(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def min_eigenvalue(rho):
    rho = np.asarray(rho)
    return float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])


def is_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-10, pos_tol=1e-9):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    return (
        hermiticity_error(rho) <= herm_tol
        and abs(np.trace(rho) - 1.0) <= trace_tol
        and min_eigenvalue(rho) >= -pos_tol
    )


def level_populations(rho, layout):
    """Occupation of each atomic level, traced over the cavity."""
    diag = np.real(np.diagonal(np.asarray(rho), axis1=-2, axis2=-1))
    return diag.reshape(diag.shape[:-1] + (layout.n_levels, layout.n_fock)).sum(axis=-1)
