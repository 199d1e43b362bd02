"""Two-form family of the corrected coordinates, Laurent split, metric.

Pulling back the torus symplectic structure along the corrected coordinates
gives, at each twistor parameter, an antisymmetric matrix over the real
coordinates (Re u, Im u, theta_1, theta_2):

    varpi(zeta) = (1/8 pi^2 R) < d log X(zeta) ^ d log X(zeta) >.

The coordinate jumps across BPS rays act by Poisson morphisms, so this
family is continuous in zeta even though X is not.  Fitting its unit-circle
samples to a/zeta + b + c zeta splits off the holomorphic symplectic form
(the residue) and the Kahler form (the constant term); an appreciable fit
residual signals spurious higher Laurent terms and fails the run.  The
metric follows from the triple algebra: with w1, w2 the real and imaginary
parts of the residue form, J = -w1^{-1} w2 is an almost complex structure
and g = w3 J its metric, positive definite in the large-R regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .semiflat import ModelPoint, pairing_two_form
from .solver import (GridSpec, RaySolution, _log_xsf_on_nodes, solve,
                     upsilon)

H_THETA = 1e-4


def _h_u(point: ModelPoint) -> float:
    return 1e-4 * max(abs(point.u), 0.1)


@dataclass
class VarpiSampler:
    """Central-difference d log X over displaced re-solves of one point.

    The eight displaced problems share the discretization and warm-start
    from the center solution; evaluating many zetas then reuses them all.
    ``semiflat_only`` drops the corrections but keeps the same finite
    differences, which is the cross-check against the closed forms.
    """

    model: object
    point: ModelPoint
    spec: GridSpec = GridSpec()
    tol_iter: float = 1e-11
    semiflat_only: bool = False

    def __post_init__(self):
        mdl, pt = self.model, self.point
        self._basis = mdl.lattice.basis()[:2]
        hu, ht = _h_u(pt), H_THETA
        displacements = [hu, 1j * hu,
                         (ht, 0.0), (0.0, ht)]
        self._steps = [hu, hu, ht, ht]
        self._solutions = []
        center = None if self.semiflat_only else solve(
            mdl, pt, spec=self.spec, tol_iter=self.tol_iter)
        for disp in displacements:
            pair = []
            for sign in (+1, -1):
                if isinstance(disp, tuple):
                    p = pt.shifted(dtheta=(sign * disp[0], sign * disp[1]))
                else:
                    p = pt.shifted(du=sign * disp)
                sol = None if self.semiflat_only else solve(
                    mdl, p, spec=self.spec, tol_iter=self.tol_iter,
                    warm=center)
                pair.append((p, sol))
            self._solutions.append(pair)

    def dlog_matrix(self, zeta: complex, side: int | None = None
                    ) -> np.ndarray:
        """Rows: basis charges; columns: the four real coordinate derivatives."""
        zeta = complex(zeta)
        a = np.zeros((2, 4), dtype=complex)
        for mu, pair in enumerate(self._solutions):
            vals = []
            for p, sol in pair:
                row = []
                for gamma in self._basis:
                    lv = _log_xsf_on_nodes(self.model, p, gamma,
                                           np.array([zeta]))[0]
                    if sol is not None:
                        lv = lv + upsilon(self.model, sol, gamma, zeta,
                                          side=side)
                    row.append(lv)
                vals.append(row)
            for i in range(2):
                a[i, mu] = (vals[0][i] - vals[1][i]) / (2.0 * self._steps[mu])
        return a

    def varpi(self, zeta: complex, side: int | None = None) -> np.ndarray:
        a = self.dlog_matrix(zeta, side=side)
        return pairing_two_form(self.model.lattice, a,
                                scale=1.0 / (8.0 * math.pi ** 2 * self.point.R))


def varpi_at(model, point: ModelPoint, zeta: complex,
             spec: GridSpec = GridSpec(), tol_iter: float = 1e-11,
             semiflat_only: bool = False) -> np.ndarray:
    """One-shot two-form sample; batch work should use VarpiSampler."""
    sampler = VarpiSampler(model, point, spec=spec, tol_iter=tol_iter,
                           semiflat_only=semiflat_only)
    return sampler.varpi(zeta)


@dataclass
class LaurentFit:
    omega_plus: np.ndarray
    omega_3: np.ndarray
    residual: float
    omega3_imag: float
    conj_defect: float


def laurent_fit(zetas: list[complex], samples: list[np.ndarray],
                residual_tol: float = 1e-6) -> LaurentFit:
    """Split varpi samples into simple-pole, constant and linear parts.

    Least squares of every matrix entry against [1/zeta, 1, zeta]; the
    reality of the family ties the linear coefficient to the conjugate of
    the pole coefficient, and both identifications are reported as defects.
    A residual above ``residual_tol`` means higher Laurent terms are
    present, which the twistor family of a genuine solution cannot have.
    """
    if len(zetas) < 5:
        raise ValueError("need at least 5 zeta samples for a stable fit")
    zs = np.asarray(zetas, dtype=complex)
    basis = np.stack([1.0 / zs, np.ones_like(zs), zs], axis=1)
    stacked = np.stack([m.reshape(16) for m in samples])
    coeffs, *_ = np.linalg.lstsq(basis, stacked, rcond=None)
    fitted = basis @ coeffs
    residual = float(np.max(np.abs(fitted - stacked)))
    if residual > residual_tol:
        raise ValueError(
            f"higher Laurent terms present: fit residual {residual:.3e}")
    a = coeffs[0].reshape(4, 4)
    b = coeffs[1].reshape(4, 4)
    c = coeffs[2].reshape(4, 4)
    omega_plus = 2j * a
    omega3_imag = float(np.max(np.abs(b.imag)))
    conj_defect = float(np.max(np.abs(c + np.conj(a))))
    return LaurentFit(omega_plus=omega_plus, omega_3=b.real.copy(),
                      residual=residual, omega3_imag=omega3_imag,
                      conj_defect=conj_defect)


@dataclass
class MetricSample:
    g: np.ndarray
    J: np.ndarray
    j_squared_defect: float
    eigenvalues: np.ndarray

    @property
    def positive_definite(self) -> bool:
        return bool(np.all(self.eigenvalues > 0))


def metric_from_triple(omega_plus: np.ndarray, omega_3: np.ndarray,
                       j_tol: float = 1e-6) -> MetricSample:
    """Metric from the triple: J = -w1^{-1} w2 and g = w3 J, symmetrized."""
    w1 = omega_plus.real
    w2 = omega_plus.imag
    j = -np.linalg.solve(w1, w2)
    defect = float(np.max(np.abs(j @ j + np.eye(4))))
    if defect > j_tol:
        raise ValueError(
            f"triple not hyperkahler at this point: |J^2 + 1| = {defect:.3e}")
    g = omega_3 @ j
    g = 0.5 * (g + g.T)
    return MetricSample(g=g, J=j, j_squared_defect=defect,
                        eigenvalues=np.linalg.eigvalsh(g))


def wedge4(a: np.ndarray, b: np.ndarray) -> complex:
    """Coefficient of the volume form dx^dy^dt1^dt2 in a ^ b."""
    return (a[0, 1] * b[2, 3] - a[0, 2] * b[1, 3] + a[0, 3] * b[1, 2]
            + a[2, 3] * b[0, 1] - a[1, 3] * b[0, 2] + a[1, 2] * b[0, 3])


@dataclass
class TripleCheck:
    equal_squares_defect: float
    mixed_defect: float
    volume: float


def triple_wedge_check(omega_plus: np.ndarray, omega_3: np.ndarray
                       ) -> TripleCheck:
    """Equal squares and vanishing mixed products of the form triple."""
    forms = [omega_plus.real, omega_plus.imag, omega_3]
    squares = [wedge4(w, w).real for w in forms]
    scale = max(abs(s) for s in squares)
    if scale == 0.0:
        raise ValueError("degenerate triple: vanishing top wedge")
    eq = max(abs(squares[i] - squares[0]) for i in (1, 2)) / scale
    mixed = max(abs(wedge4(forms[i], forms[j]))
                for i in range(3) for j in range(3) if i != j) / scale
    return TripleCheck(equal_squares_defect=eq, mixed_defect=mixed,
                       volume=squares[0])


def metric_zetas(solution: RaySolution, n: int = 12) -> list[complex]:
    """Unit-circle fit points interleaved between the rays of a solution."""
    from .solver import midsector_zetas
    return midsector_zetas(solution, n=n)


def fit_point(model, point: ModelPoint, n_zetas: int = 12,
              spec: GridSpec = GridSpec(), tol_iter: float = 1e-11,
              semiflat_only: bool = False
              ) -> tuple[LaurentFit, MetricSample, TripleCheck]:
    """Full pipeline at one point: samples, Laurent split, metric, algebra."""
    sampler = VarpiSampler(model, point, spec=spec, tol_iter=tol_iter,
                           semiflat_only=semiflat_only)
    sol = solve(model, point, spec=spec, tol_iter=tol_iter)
    zetas = metric_zetas(sol, n=n_zetas)
    samples = [sampler.varpi(z) for z in zetas]
    fit = laurent_fit(zetas, samples)
    metric = metric_from_triple(fit.omega_plus, fit.omega_3)
    algebra = triple_wedge_check(fit.omega_plus, fit.omega_3)
    return fit, metric, algebra
