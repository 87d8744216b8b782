"""Concrete emitter-cavity systems.

Frequencies and rates are quoted as ordinary frequencies f in GHz (so
"g = 20" means g / 2pi = 20 GHz) and converted to rad/ns by ``angular``
when the Lindblad system is built. All Hamiltonians are written in the frame
rotating at the probe frequency.

Level indices
    three-level lambda system: 0 = |g0>, 1 = |g1>, 2 = |e>
    four-level Voigt dot:      0 = |g0>, 1 = |g1>, 2 = |e0>, 3 = |e1>
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidSpaceError
from .lindblad import LindbladSystem
from .operators import SpaceLayout, cavity_annihilation, dagger, transition

G0, G1 = 0, 1
E = 2  # three-level excited state
E0, E1 = 2, 3  # four-level excited states

MODELS = ("three_level", "four_level")


def angular(f):
    """GHz -> rad/ns."""
    return 2.0 * math.pi * f


def from_angular(w):
    """rad/ns -> GHz."""
    return w / (2.0 * math.pi)


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters; frequencies and rates in GHz.

    ``epsilon`` is the probe amplitude in sqrt(photons/ns); ``None`` selects
    the weak-drive default of 0.01 photons per modified lifetime.
    ``input_coupling`` is the fraction of the cavity decay rate through
    which the probe enters (0.5 for a symmetric two-port cavity).
    """

    g: float = 20.0
    kappa: float = 6.0
    gamma: tuple = (0.1, 0.1, 0.1, 0.1)
    gamma_d: float = 0.0
    delta_z: float = 100.0
    omega_c: float = 0.0
    omega_a: float = 0.0
    omega_laser: float = 0.0
    epsilon: float = None
    eta: float = 0.01
    delta_omega: float = 0.0
    input_coupling: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(x) for x in self.gamma))
        rates = {"g": self.g, "kappa": self.kappa, "gamma_d": self.gamma_d}
        rates.update({f"gamma[{i}]": x for i, x in enumerate(self.gamma)})
        for name, value in rates.items():
            if not value >= 0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if not 0 <= self.eta <= 1:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0 < self.input_coupling <= 1:
            raise ValueError(f"input_coupling must lie in (0, 1], got {self.input_coupling}")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class DiffusionSpec:
    gamma_I: float = 0.0
    n_nodes: int = 21
    span: float = 1.5  # diagnostic only; node placement is fixed by the quadrature


def default_epsilon(p):
    """sqrt(0.01 * 2 g^2 / kappa) with angular g and kappa."""
    if p.kappa <= 0:
        raise ValueError("kappa must be positive to set the default drive")
    return math.sqrt(0.01 * 2.0 * angular(p.g) ** 2 / angular(p.kappa))


def resolved_epsilon(p):
    return default_epsilon(p) if p.epsilon is None else float(p.epsilon)


def cooperativity(p):
    """C = 2 g^2 / (kappa gamma0); the 2pi factors cancel."""
    denom = p.kappa * p.gamma[0]
    if denom == 0:
        raise ZeroDivisionError("cooperativity needs kappa > 0 and gamma0 > 0")
    return 2.0 * p.g**2 / denom


def _drive(p, a):
    amp = math.sqrt(p.input_coupling * angular(p.kappa)) * resolved_epsilon(p)
    return amp * (a + dagger(a))


def _coupling(g, a, lower, upper, layout):
    # i g (a |upper><lower| - a^+ |lower><upper|)
    up = transition(layout, lower, upper)
    return 1j * angular(g) * (a @ up - dagger(a) @ dagger(up))


def build_three_level(p, layout):
    if layout.n_levels != 3:
        raise InvalidSpaceError(f"three-level model needs 3 atomic levels, got {layout.n_levels}")
    if len(p.gamma) < 2:
        raise ValueError("three-level model needs gamma = (gamma0, gamma1, ...)")
    a = cavity_annihilation(layout)
    n_cav = dagger(a) @ a
    proj_e = transition(layout, E, E)
    h = angular(p.omega_c - p.omega_laser) * n_cav
    h = h + angular(p.omega_a + p.delta_omega - p.omega_laser) * proj_e
    h = h + _coupling(p.g, a, G0, E, layout) + _drive(p, a)
    h = 0.5 * (h + dagger(h))
    c_ops = [
        (angular(p.kappa), a),
        (angular(p.gamma[0]), transition(layout, E, G0)),
        (angular(p.gamma[1]), transition(layout, E, G1)),
    ]
    if p.gamma_d > 0:
        c_ops.append((2.0 * angular(p.gamma_d), proj_e))
    return LindbladSystem(h, tuple(c_ops), output_op=a, output_rate=angular(p.kappa), layout=layout)


def build_four_level(p, layout, g_second=None):
    """Voigt-geometry dot; ``g_second`` overrides the |g1>-|e1> coupling."""
    if layout.n_levels != 4:
        raise InvalidSpaceError(f"four-level model needs 4 atomic levels, got {layout.n_levels}")
    if len(p.gamma) < 4:
        raise ValueError("four-level model needs gamma = (gamma0, gamma1, gamma2, gamma3)")
    g2 = p.g if g_second is None else g_second
    a = cavity_annihilation(layout)
    n_cav = dagger(a) @ a
    proj_e0 = transition(layout, E0, E0)
    proj_e1 = transition(layout, E1, E1)
    # spectral diffusion shifts both excited levels rigidly; delta_z is preserved
    shift = p.omega_a + p.delta_omega - p.omega_laser
    h = angular(p.omega_c - p.omega_laser) * n_cav
    h = h + angular(shift) * proj_e0 + angular(shift - p.delta_z) * proj_e1
    # cavity is V-polarized: only the vertical transitions couple
    h = h + _coupling(p.g, a, G0, E0, layout) + _coupling(g2, a, G1, E1, layout)
    h = h + _drive(p, a)
    h = 0.5 * (h + dagger(h))
    c_ops = [
        (angular(p.kappa), a),
        (angular(p.gamma[0]), transition(layout, E0, G0)),
        (angular(p.gamma[1]), transition(layout, E0, G1)),
        (angular(p.gamma[2]), transition(layout, E1, G0)),
        (angular(p.gamma[3]), transition(layout, E1, G1)),
    ]
    if p.gamma_d > 0:
        c_ops.append((2.0 * angular(p.gamma_d), proj_e0))
        c_ops.append((2.0 * angular(p.gamma_d), proj_e1))
    return LindbladSystem(h, tuple(c_ops), output_op=a, output_rate=angular(p.kappa), layout=layout)


def build_model(model, p, n_fock):
    if model == "three_level":
        return build_three_level(p, SpaceLayout(3, n_fock))
    if model == "four_level":
        return build_four_level(p, SpaceLayout(4, n_fock))
    raise ValueError(f"unknown model {model!r}; choose from {MODELS}")


def sample_diffusion(spec):
    """Gauss-Hermite nodes for a Gaussian of FWHM ``gamma_I`` (GHz).

    Returns a list of (delta_omega, weight) with weights summing to 1.
    """
    n = spec.n_nodes
    if n < 3 or n % 2 == 0:
        raise ValueError(f"n_nodes must be odd and >= 3, got {n}")
    if not spec.gamma_I >= 0:
        raise ValueError(f"gamma_I must be >= 0, got {spec.gamma_I}")
    if spec.gamma_I == 0:
        return [(0.0, 1.0)]
    sigma = spec.gamma_I / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    x, w = np.polynomial.hermite.hermgauss(n)
    w = w / w.sum()
    nodes = math.sqrt(2.0) * sigma * x
    # exact symmetry: hermgauss rounding can leave the centre at ~1e-17
    nodes = 0.5 * (nodes - nodes[::-1])
    w = 0.5 * (w + w[::-1])
    return [(float(d), float(wi)) for d, wi in zip(nodes, w)]


def gaussian_density(delta_omega, gamma_I):
    """Normalized Gaussian line shape with FWHM ``gamma_I``."""
    return (
        2.0
        / gamma_I
        * math.sqrt(math.log(2.0) / math.pi)
        * np.exp(-4.0 * math.log(2.0) * (np.asarray(delta_omega) / gamma_I) ** 2)
    )
