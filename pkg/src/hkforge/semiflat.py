"""Semiflat Darboux coordinates and the zeroth-order two-forms.

The semiflat coordinate of a charge at twistor parameter zeta is

    X_gamma(zeta) = exp[ pi R Z_gamma / zeta + i theta_gamma
                         + pi R zeta conj(Z_gamma) ],

where theta_gamma is a twisted character of the lattice: angles add up to
the twisting shift pi <gamma, gamma'>.  Pairing the log-derivatives of these
coordinates reproduces the one-parameter family of holomorphic symplectic
forms, whose Laurent coefficients in zeta are the holomorphic symplectic
form and the Kahler form of the semiflat metric.  Everything here is in
closed form, which makes this module the oracle for the corrected pipeline.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .lattice import Charge, Lattice

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelPoint:
    """Evaluation site: base point, coupling R, torus angles."""

    u: complex
    R: float
    theta: tuple[float, ...]

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        object.__setattr__(self, "u", complex(self.u))
        object.__setattr__(self, "theta",
                           tuple(float(t) % TWO_PI for t in self.theta))

    def shifted(self, du: complex = 0.0, dtheta: tuple[float, ...] | None = None
                ) -> "ModelPoint":
        theta = self.theta if dtheta is None else tuple(
            t + d for t, d in zip(self.theta, dtheta))
        return ModelPoint(self.u + du, self.R, theta)


@dataclass(frozen=True)
class CoordinateValue:
    """Value of one coordinate function at fixed (point, zeta)."""

    gamma: Charge
    zeta: complex
    value: complex
    log_value: complex


def twist_parity(lattice: Lattice, gamma: Charge) -> int:
    """Quadratic refinement q(gamma) mod 2 entering the twisted character.

    q(gamma) = sum_{i<j} gamma^i gamma^j <e_i, e_j> satisfies
    q(a) + q(b) - q(a+b) = <a, b> mod 2, which is exactly the twisting rule.
    """
    q = 0
    cs = gamma.coeffs
    for i in range(len(cs)):
        for j in range(i + 1, len(cs)):
            q += cs[i] * cs[j] * lattice.pairing[i][j]
    return q % 2


def theta_eval(lattice: Lattice, point: ModelPoint, gamma: Charge) -> float:
    """Twisted-character angle theta_gamma, reduced to [0, 2 pi)."""
    if len(point.theta) != gamma.dim:
        raise ValueError("theta vector does not match charge dimension")
    base = sum(c * t for c, t in zip(gamma.coeffs, point.theta))
    return (base + math.pi * twist_parity(lattice, gamma)) % TWO_PI


def xsf_log(model, point: ModelPoint, gamma: Charge, zeta: complex) -> complex:
    """Logarithm of the semiflat coordinate (the chosen branch)."""
    zeta = complex(zeta)
    if zeta == 0:
        raise ValueError("zeta must be nonzero")
    z = model.Z.of(gamma, point.u)
    th = theta_eval(model.lattice, point, gamma)
    return (math.pi * point.R * z / zeta + 1j * th
            + math.pi * point.R * zeta * z.conjugate())


def xsf(model, point: ModelPoint, gamma: Charge, zeta: complex) -> CoordinateValue:
    lv = xsf_log(model, point, gamma, zeta)
    return CoordinateValue(gamma=gamma, zeta=complex(zeta),
                           value=cmath.exp(lv), log_value=lv)


# ---------------------------------------------------------------------------
# Two-forms in the real coordinates (Re u, Im u, theta_1, theta_2); the
# closed-form expressions below are restricted to a one-dimensional base.


def _require_r1(model) -> None:
    lat = model.lattice
    if lat.rank_total != 2 or lat.flavor_rank != 0:
        raise ValueError("two-form assembly implemented for rank-2 "
                         "flavorless lattices (one-dimensional base)")


def pairing_two_form(lattice: Lattice, rows: np.ndarray, scale: float = 1.0
                     ) -> np.ndarray:
    """Assemble scale * <rows ^ rows> as a 4x4 antisymmetric matrix.

    ``rows[i, mu]`` holds the mu-component of the i-th basis covector; the
    contraction uses the dual pairing on the gauge lattice.
    """
    dual = lattice.dual_pairing().astype(complex)
    m = rows.T @ dual @ rows
    return scale * (m - m.T)


def dlog_xsf_matrix(model, point: ModelPoint, zeta: complex) -> np.ndarray:
    """Analytic d log X^sf for the basis charges; rows (2,) x cols (x,y,t1,t2)."""
    _require_r1(model)
    zeta = complex(zeta)
    R = point.R
    dz = model.Z.basis_derivatives(point.u)
    a = np.zeros((2, 4), dtype=complex)
    for i in range(2):
        zp = dz[i]
        a[i, 0] = math.pi * R * (zp / zeta + zeta * zp.conjugate())
        a[i, 1] = math.pi * R * (1j * zp / zeta - 1j * zeta * zp.conjugate())
        a[i, 2 + i] = 1j
    return a


def omega_plus_sf(model, point: ModelPoint) -> np.ndarray:
    """Holomorphic symplectic form -(1/2 pi) <dZ ^ dtheta> as a 4x4 matrix."""
    _require_r1(model)
    dz = model.Z.basis_derivatives(point.u)
    dz_rows = np.zeros((2, 4), dtype=complex)
    dth_rows = np.zeros((2, 4), dtype=complex)
    for i in range(2):
        dz_rows[i, 0] = dz[i]
        dz_rows[i, 1] = 1j * dz[i]
        dth_rows[i, 2 + i] = 1.0
    dual = model.lattice.dual_pairing().astype(complex)
    m = dz_rows.T @ dual @ dth_rows
    return (-1.0 / TWO_PI) * (m - m.T)


def omega3_sf(model, point: ModelPoint) -> np.ndarray:
    """Semiflat Kahler form (R/4)<dZ ^ dZbar> - (1/8 pi^2 R)<dtheta ^ dtheta>."""
    _require_r1(model)
    R = point.R
    dz = model.Z.basis_derivatives(point.u)
    dz_rows = np.zeros((2, 4), dtype=complex)
    dzbar_rows = np.zeros((2, 4), dtype=complex)
    dth_rows = np.zeros((2, 4), dtype=complex)
    for i in range(2):
        dz_rows[i, 0] = dz[i]
        dz_rows[i, 1] = 1j * dz[i]
        dzbar_rows[i, 0] = dz[i].conjugate()
        dzbar_rows[i, 1] = -1j * dz[i].conjugate()
        dth_rows[i, 2 + i] = 1.0
    dual = model.lattice.dual_pairing().astype(complex)
    mz = dz_rows.T @ dual @ dzbar_rows
    mt = dth_rows.T @ dual @ dth_rows
    form = (R / 4.0) * (mz - mz.T) - (mt - mt.T) / (8.0 * math.pi ** 2 * R)
    if np.max(np.abs(form.imag)) > 1e-12 * (1.0 + np.max(np.abs(form.real))):
        raise ValueError("semiflat Kahler form has a spurious imaginary part")
    return form.real


def varpi_sf(model, point: ModelPoint, zeta: complex) -> np.ndarray:
    """Semiflat two-form family from the analytic coordinate derivatives."""
    a = dlog_xsf_matrix(model, point, zeta)
    return pairing_two_form(model.lattice, a,
                            scale=1.0 / (8.0 * math.pi ** 2 * point.R))


def varpi_expected(omega_plus: np.ndarray, omega_3: np.ndarray,
                   zeta: complex) -> np.ndarray:
    """Laurent assembly -(i/2 zeta) w_+ + w_3 - (i/2) zeta conj(w_+)."""
    zeta = complex(zeta)
    return (-0.5j / zeta) * omega_plus + omega_3 \
        - 0.5j * zeta * np.conj(omega_plus)
