"""Fixed-point solver for the ray-jump integral equation.

The corrected coordinates satisfy

    X_gamma(z) = X^sf_gamma(z) * exp[ -(1/4 pi i) sum_g' Omega(g')<gamma,g'>
                  int_{ray(g')} (dz'/z') (z'+z)/(z'-z) log(1 - X_{g'}(z')) ]

and the only data the right side needs are the coordinates of the active
charges on their own rays.  Substituting z' = direction * e^s turns each ray
integral into a line integral whose integrand decays like exp(-2 pi R |Z|
cosh s), so truncated Gauss-Legendre panels resolve it to quadrature
precision.  The iteration starts from the semiflat values; its contraction
rate is set by the largest exp(-2 pi R |Z|) among active charges.

The log-corrections Upsilon = log(X / X^sf) are the stored unknowns: they
stay O(exp(-2 pi R |Z|)), which avoids the huge semiflat exponentials and
makes the smallness of the quantum corrections explicit.

Near-ray evaluation subtracts the Cauchy kernel singularity and integrates
coth((s - w)/2) in closed form; the two directed boundary values differ by
the residue term +-2 pi i, which is how the expected coordinate jumps
emerge from one integral representation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .lattice import Charge, Ray, bps_rays
from .semiflat import CoordinateValue, ModelPoint, theta_eval

FOUR_PI_I = 4j * math.pi
NEAR_ANGLE = 0.2          # switch to the subtracted kernel below this offset
DEFAULT_MIN_ANGLE = 1e-3  # undirected evaluation forbidden below this offset


class RSmallError(ValueError):
    """Semiflat coordinates reach |X| >= 1 on a ray: R too small."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


class RayProximityError(ValueError):
    """zeta within the directed-limit tolerance of a BPS ray."""


@dataclass(frozen=True)
class GridSpec:
    """Discretization parameters shared by all rays of one solve."""

    eps_quad: float = 1e-12
    panels: int = 16
    nodes_per_panel: int = 16
    eps_spec: float = 1e-16
    r_small_threshold: float = 0.9
    tail_margin: float = 4.0


@dataclass
class QuadratureGrid:
    """Gauss-Legendre panels on s in [-s_max, s_max] along one BPS ray."""

    ray: Ray
    s_nodes: np.ndarray
    weights: np.ndarray
    s_max: float

    @property
    def zeta_nodes(self) -> np.ndarray:
        return self.ray.direction * np.exp(self.s_nodes)

    @property
    def node_count(self) -> int:
        return len(self.s_nodes)


@dataclass
class RaySolution:
    """Converged log-corrections on every ray node, plus diagnostics."""

    point: ModelPoint
    grids: list[QuadratureGrid]
    log_xsf: list[dict[Charge, np.ndarray]]
    upsilon: list[dict[Charge, np.ndarray]]
    iterations: int
    residual: float
    residual_history: list[float]
    recheck_residual: float
    tol_iter: float
    spec: GridSpec

    def max_correction(self) -> float:
        vals = [float(np.max(np.abs(u))) for ups in self.upsilon
                for u in ups.values()]
        return max(vals, default=0.0)


def _gl_panels(s_max: float, panels: int, per_panel: int):
    base_x, base_w = np.polynomial.legendre.leggauss(per_panel)
    edges = np.linspace(-s_max, s_max, panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * base_x)
        weights.append(half * base_w)
    return np.concatenate(nodes), np.concatenate(weights)


def build_grids(model, point: ModelPoint, spec: GridSpec = GridSpec()
                ) -> list[QuadratureGrid]:
    """One truncated quadrature grid per BPS ray at the given point.

    The truncation solves exp(-2 pi R |Z| cosh s_max) < eps_quad with a
    safety margin; if the semiflat modulus on some ray already exceeds the
    threshold at s = 0 the iteration could leave the log(1 - X) domain, and
    the point is rejected as "R too small".
    """
    rays = bps_rays(model.spectrum, model.Z, point.u, R=point.R,
                    eps_spec=spec.eps_spec)
    grids = []
    for ray in rays:
        min_z = ray.min_abs_z()
        peak = math.exp(-2.0 * math.pi * point.R * min_z)
        if peak >= spec.r_small_threshold:
            raise RSmallError(
                f"R too small: |X^sf| reaches {peak:.3f} on the ray of "
                f"{ray.charges[0]} (needs < {spec.r_small_threshold})")
        arg = (-math.log(spec.eps_quad) + spec.tail_margin) \
            / (2.0 * math.pi * point.R * min_z)
        s_max = math.acosh(max(arg, 1.5))
        s_nodes, weights = _gl_panels(s_max, spec.panels, spec.nodes_per_panel)
        grids.append(QuadratureGrid(ray=ray, s_nodes=s_nodes,
                                    weights=weights, s_max=s_max))
    return grids


def _log_xsf_on_nodes(model, point: ModelPoint, gamma: Charge,
                      zetas: np.ndarray) -> np.ndarray:
    z = model.Z.of(gamma, point.u)
    th = theta_eval(model.lattice, point, gamma)
    piR = math.pi * point.R
    return piR * z / zetas + 1j * th + piR * zetas * np.conj(z)


def _wrap(a: float) -> float:
    while a <= -math.pi:
        a += 2.0 * math.pi
    while a > math.pi:
        a -= 2.0 * math.pi
    return a


def _coth_half(x: np.ndarray) -> np.ndarray:
    return 1.0 / np.tanh(0.5 * x)


def _kernel_C(w, s_max: float):
    """Closed form of int_{-S}^{S} coth((s-w)/2) ds, principal branch.

    Continuous for 0 < |Im w| < pi; the signed-zero limits Im w = +-0.0
    reproduce the one-sided boundary values (residue term -+ ... +-2 pi i).
    """
    return (2.0 * s_max
            + 2.0 * (np.log(1.0 - np.exp(-(s_max - w)))
                     - np.log(1.0 - np.exp(s_max + w))))


def _subtracted_rows(s_src: np.ndarray, weights: np.ndarray,
                     g: np.ndarray, w, s_max: float, g_at_pole):
    """Integral of coth((s-w)/2) g(s) via singularity subtraction.

    ``w`` may be a scalar or a vector of pole positions; ``g_at_pole`` the
    matching values of the analytic continuation of g at those poles.
    Subtracting the continued value (not g at Re w) keeps the subtracted
    integrand smooth on the scale of g itself rather than on the scale of
    the pole offset, so fixed nodes resolve it at any offset.
    """
    w_arr = np.atleast_1d(np.asarray(w, dtype=complex))
    gs = np.atleast_1d(np.asarray(g_at_pole, dtype=complex))
    x = s_src[None, :] - w_arr[:, None]
    small = np.abs(x) < 1e-6
    kern = np.empty_like(x)
    safe = ~small
    kern[safe] = _coth_half(x[safe])
    kern[small] = 0.0
    diff = g[None, :] - gs[:, None]
    main = (kern * diff) @ weights
    # Taylor fallback where a node almost coincides with the pole.
    if np.any(small):
        idx = np.nonzero(small)
        tiny = np.abs(x[idx]) < 1e-12
        corr = np.zeros(len(idx[0]), dtype=complex)
        xs = x[idx]
        corr[~tiny] = 2.0 * diff[idx][~tiny] / xs[~tiny]
        rows = idx[0]
        np.add.at(main, rows, corr * weights[idx[1]])
    return main + gs * _kernel_C(w_arr, s_max)


@dataclass
class _Workspace:
    charges: list[list[tuple[Charge, int, complex]]]
    kernels: dict
    pair_cache: dict


def _prepare(model, point: ModelPoint, grids: list[QuadratureGrid]) -> _Workspace:
    lat = model.lattice
    charges = []
    for grid in grids:
        entries = [(g, om, z) for g, om, z in
                   zip(grid.ray.charges, grid.ray.omegas, grid.ray.zs)]
        charges.append(entries)

    kernels = {}
    nr = len(grids)
    for rt in range(nr):
        for rs in range(nr):
            if rs == rt:
                continue
            needed = any(lat.pair(gt, gs) != 0
                         for gt, _, _ in charges[rt] for gs, _, _ in charges[rs])
            if not needed:
                continue
            dphi = _wrap(grids[rt].ray.angle - grids[rs].ray.angle)
            if abs(dphi) >= NEAR_ANGLE:
                zt = grids[rt].zeta_nodes[:, None]
                zs = grids[rs].zeta_nodes[None, :]
                kernels[(rt, rs)] = ("plain", (zs + zt) / (zs - zt))
            else:
                w = grids[rt].s_nodes + 1j * dphi
                kernels[(rt, rs)] = ("sub", w)
    pair_cache = {}
    for rt in range(nr):
        for gt, _, _ in charges[rt]:
            for rs in range(nr):
                for gs, _, _ in charges[rs]:
                    pair_cache[(gt, gs)] = lat.pair(gt, gs)
    return _Workspace(charges=charges, kernels=kernels, pair_cache=pair_cache)


def iterate(model, point: ModelPoint, grids: list[QuadratureGrid] | None = None,
            tol_iter: float = 1e-10, max_iter: int = 50,
            spec: GridSpec = GridSpec(),
            warm: RaySolution | None = None) -> RaySolution:
    """Solve the integral equation by iteration from the semiflat seed.

    Distinct rays never coincide off the walls, and charges sharing a ray
    pair to zero, so no principal values arise: every integral a node needs
    is over some other ray.  Iterations stop when the largest node update
    drops below ``tol_iter``; the converged data are re-checked by one more
    application of the map.
    """
    if grids is None:
        grids = build_grids(model, point, spec)
    ws = _prepare(model, point, grids)
    nr = len(grids)

    log_xsf = []
    ups = []
    for r, grid in enumerate(grids):
        zetas = grid.zeta_nodes
        log_xsf.append({g: _log_xsf_on_nodes(model, point, g, zetas)
                        for g, _, _ in ws.charges[r]})
        ups.append({g: np.zeros(grid.node_count, dtype=complex)
                    for g, _, _ in ws.charges[r]})
    if warm is not None and len(warm.grids) == nr:
        compatible = all(warm.grids[r].node_count == grids[r].node_count
                         and set(warm.upsilon[r]) == set(ups[r])
                         for r in range(nr))
        if compatible:
            for r in range(nr):
                for g in ups[r]:
                    ups[r][g] = warm.upsilon[r][g].copy()

    def apply_once(current):
        gvals, splines = {}, {}
        for r in range(nr):
            for g, _, _ in ws.charges[r]:
                x = np.exp(log_xsf[r][g] + current[r][g])
                if float(np.max(np.abs(x))) >= 1.0 - 1e-9:
                    raise RSmallError(
                        "iteration left the log(1 - X) domain: R too small")
                gvals[(r, g)] = np.log(1.0 - x)
        for (r, g), vals in gvals.items():
            splines[(r, g)] = CubicSpline(grids[r].s_nodes, vals)
        new = [dict() for _ in range(nr)]
        for rt in range(nr):
            for gt, _, _ in ws.charges[rt]:
                acc = np.zeros(grids[rt].node_count, dtype=complex)
                for rs in range(nr):
                    if rs == rt or (rt, rs) not in ws.kernels:
                        continue
                    kind, data = ws.kernels[(rt, rs)]
                    for gs, om_s, _ in ws.charges[rs]:
                        p = ws.pair_cache[(gt, gs)]
                        if p == 0:
                            continue
                        coef = -om_s * p / FOUR_PI_I
                        gv = gvals[(rs, gs)]
                        if kind == "plain":
                            acc += coef * (data @ (grids[rs].weights * gv))
                        else:
                            sigma = np.real(data)
                            dphi = float(np.imag(data[0]))
                            inside = np.abs(sigma) <= grids[rs].s_max
                            sig_c = np.clip(sigma, -grids[rs].s_max,
                                            grids[rs].s_max)
                            sp = splines[(rs, gs)]
                            # Taylor continuation of g to the complex pole.
                            gpole = (sp(sig_c) + 1j * dphi * sp(sig_c, 1)
                                     - 0.5 * dphi ** 2 * sp(sig_c, 2))
                            gpole = np.where(inside, gpole, 0.0)
                            acc += coef * _subtracted_rows(
                                grids[rs].s_nodes, grids[rs].weights,
                                gv, data, grids[rs].s_max, gpole)
                new[rt][gt] = acc
        return new

    history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        new = apply_once(ups)
        iterations += 1
        residual = 0.0
        for r in range(nr):
            for g in new[r]:
                residual = max(residual,
                               float(np.max(np.abs(new[r][g] - ups[r][g]))))
        ups = new
        history.append(residual)
        if residual < tol_iter:
            break
    else:
        raise NonConvergenceError(
            f"no convergence within {max_iter} iterations "
            f"(last residual {history[-1]:.3e})", history)

    recheck = apply_once(ups)
    recheck_residual = 0.0
    for r in range(nr):
        for g in recheck[r]:
            recheck_residual = max(
                recheck_residual,
                float(np.max(np.abs(recheck[r][g] - ups[r][g]))))

    return RaySolution(point=point, grids=grids, log_xsf=log_xsf,
                       upsilon=ups, iterations=iterations,
                       residual=history[-1], residual_history=history,
                       recheck_residual=recheck_residual,
                       tol_iter=tol_iter, spec=spec)


def solve(model, point: ModelPoint, spec: GridSpec = GridSpec(),
          tol_iter: float = 1e-10, max_iter: int = 50,
          warm: RaySolution | None = None) -> RaySolution:
    return iterate(model, point, build_grids(model, point, spec),
                   tol_iter=tol_iter, max_iter=max_iter, spec=spec, warm=warm)


# ---------------------------------------------------------------------------
# Evaluation off the grid


def _g_on_ray(solution: RaySolution, r: int, gamma: Charge) -> np.ndarray:
    return np.log(1.0 - np.exp(solution.log_xsf[r][gamma]
                               + solution.upsilon[r][gamma]))


def _ray_integral(model, solution: RaySolution, r: int, gamma_s: Charge,
                  zeta: complex, side: int | None,
                  min_angle: float, exact_sigma: bool) -> complex:
    """One Cauchy-type integral over ray r for the charge gamma_s at zeta."""
    grid = solution.grids[r]
    d = grid.ray.direction
    w = cmath.log(zeta / d)
    sigma, dphi = w.real, w.imag
    g = _g_on_ray(solution, r, gamma_s)

    if abs(dphi) >= NEAR_ANGLE:
        kern = (grid.zeta_nodes + zeta) / (grid.zeta_nodes - zeta)
        return complex(np.sum(grid.weights * kern * g))

    if abs(dphi) < min_angle:
        if side is None:
            raise RayProximityError(
                f"zeta={zeta} within {min_angle} rad of the ray of "
                f"{gamma_s}; request a directed limit")
        # A truly infinitesimal offset keeps the branch of the closed-form
        # kernel on the requested side (signed zeros do not survive the
        # subtraction inside the logarithms).
        w = sigma + 1j * (side * 1e-300)
    if abs(sigma) <= grid.s_max:
        if exact_sigma:
            gpole = _g_exact_at(model, solution, r, gamma_s, w)
        else:
            sp = CubicSpline(grid.s_nodes, g)
            dw = w - sigma
            gpole = complex(sp(sigma) + dw * sp(sigma, 1)
                            + 0.5 * dw * dw * sp(sigma, 2))
    else:
        gpole = 0.0
    out = _subtracted_rows(grid.s_nodes, grid.weights, g, w, grid.s_max,
                           gpole)
    return complex(out[0])


def _g_exact_at(model, solution: RaySolution, r: int, gamma_s: Charge,
                w: complex) -> complex:
    """Analytic continuation of log(1 - X) off the charge's own ray.

    X_{gamma_s} is continuous across its own ray (proportional charges pair
    to zero), so the continuation to d e^w is just the coordinate there.
    The correction needs only integrals over *other* rays, evaluated with
    spline-interpolated densities; this keeps the recursion depth at one.
    """
    zeta_w = solution.grids[r].ray.direction * cmath.exp(complex(w))
    ups = _upsilon_value(model, solution, gamma_s, zeta_w, side=None,
                         min_angle=1e-9, exact_sigma=False, skip_ray=r)
    pt = solution.point
    log_sf = _log_xsf_on_nodes(model, pt, gamma_s,
                               np.array([zeta_w]))[0]
    return complex(np.log(1.0 - np.exp(log_sf + ups)))


def _upsilon_value(model, solution: RaySolution, gamma: Charge, zeta: complex,
                   side: int | None, min_angle: float,
                   exact_sigma: bool, skip_ray: int | None = None) -> complex:
    lat = model.lattice
    total = 0.0 + 0.0j
    for r, grid in enumerate(solution.grids):
        if r == skip_ray:
            continue
        for gamma_s, om_s, _ in zip(grid.ray.charges, grid.ray.omegas,
                                    grid.ray.zs):
            p = lat.pair(gamma, gamma_s)
            if p == 0 or om_s == 0:
                continue
            val = _ray_integral(model, solution, r, gamma_s, zeta, side,
                                min_angle, exact_sigma)
            total += (-om_s * p / FOUR_PI_I) * val
    return complex(total)


def upsilon(model, solution: RaySolution, gamma: Charge, zeta: complex,
            side: int | None = None,
            min_angle: float = DEFAULT_MIN_ANGLE) -> complex:
    """Converged log-correction log(X_gamma / X^sf_gamma) at zeta."""
    return _upsilon_value(model, solution, gamma, complex(zeta), side,
                          min_angle, exact_sigma=True)


def evaluate(model, solution: RaySolution, gamma: Charge, zeta: complex,
             side: int | None = None,
             min_angle: float = DEFAULT_MIN_ANGLE) -> CoordinateValue:
    """Corrected coordinate X_gamma(zeta) from the converged ray data.

    ``side=+1/-1`` selects the counterclockwise/clockwise boundary value
    when zeta lies within ``min_angle`` of a BPS ray; without it such a
    zeta raises, since the coordinate jumps there.
    """
    zeta = complex(zeta)
    if zeta == 0:
        raise ValueError("zeta must be nonzero")
    ups = upsilon(model, solution, gamma, zeta, side=side,
                  min_angle=min_angle)
    log_sf = _log_xsf_on_nodes(model, solution.point, gamma,
                               np.array([zeta]))[0]
    lv = log_sf + ups
    return CoordinateValue(gamma=gamma, zeta=zeta, value=cmath.exp(lv),
                           log_value=lv)


def side_limit(model, solution: RaySolution, gamma: Charge, zeta0: complex,
               side: int, delta: float = 2e-4,
               extrap_tol: float = 1e-3) -> CoordinateValue:
    """Directed boundary value on a ray by two-point Richardson in delta.

    Evaluates at angular offsets delta and delta/2 on the requested side and
    extrapolates the log-corrections linearly to the ray.
    """
    if side not in (+1, -1):
        raise ValueError("side must be +1 (counterclockwise) or -1")
    zeta0 = complex(zeta0)
    # both sample points must be genuine off-ray evaluations
    gate = min(DEFAULT_MIN_ANGLE, delta / 8.0)
    u1 = upsilon(model, solution, gamma,
                 zeta0 * cmath.exp(1j * side * delta), min_angle=gate)
    u2 = upsilon(model, solution, gamma,
                 zeta0 * cmath.exp(1j * side * delta / 2.0), min_angle=gate)
    extrapolated = 2.0 * u2 - u1
    if abs(u2 - u1) > extrap_tol * (1.0 + abs(extrapolated)):
        raise RayProximityError(
            f"side-limit extrapolation residual {abs(u2 - u1):.3e} "
            f"exceeds tolerance")
    log_sf = _log_xsf_on_nodes(model, solution.point, gamma,
                               np.array([zeta0]))[0]
    lv = log_sf + extrapolated
    return CoordinateValue(gamma=gamma, zeta=zeta0, value=cmath.exp(lv),
                           log_value=lv)


def on_ray_value(model, solution: RaySolution, gamma: Charge, zeta0: complex,
                 side: int) -> CoordinateValue:
    """Exact directed boundary value (the +-i0 closed-form kernel).

    zeta0 must sit on a ray to machine precision; other rays keep their
    genuine angular offsets.
    """
    zeta0 = complex(zeta0)
    ups = upsilon(model, solution, gamma, zeta0, side=side, min_angle=1e-9)
    log_sf = _log_xsf_on_nodes(model, solution.point, gamma,
                               np.array([zeta0]))[0]
    lv = log_sf + ups
    return CoordinateValue(gamma=gamma, zeta=zeta0, value=cmath.exp(lv),
                           log_value=lv)


def ray_jump_defect(model, solution: RaySolution, ray_index: int,
                    test_charges: list[Charge] | None = None,
                    use_richardson: bool = True) -> float:
    """Largest mismatch between directed limits and the expected ray jump.

    The clockwise value must equal the counterclockwise one multiplied by
    prod (1 - X_{g'}(zeta0))^(Omega <gamma, g'>) over the charges g' on the
    ray, with X_{g'} continuous there.
    """
    grid = solution.grids[ray_index]
    lat = model.lattice
    zeta0 = grid.ray.direction
    if test_charges is None:
        test_charges = lat.basis()
    factors = []
    for g_ray, om, _ in zip(grid.ray.charges, grid.ray.omegas, grid.ray.zs):
        x_on = on_ray_value(model, solution, g_ray, zeta0, side=+1)
        factors.append((g_ray, om, x_on.value))
    worst = 0.0
    for gamma in test_charges:
        if use_richardson:
            ccw = side_limit(model, solution, gamma, zeta0, +1)
            cw = side_limit(model, solution, gamma, zeta0, -1)
        else:
            ccw = on_ray_value(model, solution, gamma, zeta0, +1)
            cw = on_ray_value(model, solution, gamma, zeta0, -1)
        jump = 1.0 + 0.0j
        for g_ray, om, x_on in factors:
            jump *= (1.0 - x_on) ** (om * lat.pair(gamma, g_ray))
        predicted = ccw.value * jump
        scale = max(abs(cw.value), abs(predicted), 1e-300)
        worst = max(worst, abs(cw.value - predicted) / scale)
    return worst


def radial_limit(model, solution: RaySolution, gamma: Charge,
                 direction: complex,
                 radii: tuple[float, ...] = (1e-2, 1e-3, 1e-4)) -> complex:
    """Extrapolated zeta -> 0 limit of X/X^sf along a fixed mid-sector arg."""
    d = direction / abs(direction)
    vals = [cmath.exp(upsilon(model, solution, gamma, d * r)) for r in radii]
    # linear-in-radius extrapolation from the two smallest radii
    r1, r2 = radii[-2], radii[-1]
    return vals[-1] + (vals[-1] - vals[-2]) * r2 / (r1 - r2)


def midsector_zetas(solution: RaySolution, n: int = 8,
                    modulus: float = 1.0) -> list[complex]:
    """Unit-scale zetas at angular midpoints between adjacent rays."""
    angles = sorted(g.ray.angle for g in solution.grids)
    if not angles:
        return [modulus * cmath.exp(2j * math.pi * (k + 0.5) / n)
                for k in range(n)]
    mids = []
    for i, a in enumerate(angles):
        b = angles[(i + 1) % len(angles)] + (2 * math.pi if i + 1 == len(angles) else 0)
        mids.append(0.5 * (a + b))
    out = []
    k = 0
    while len(out) < n:
        base = mids[k % len(mids)]
        jitter = 0.15 * ((k // len(mids)) % 3 - 1)
        out.append(modulus * cmath.exp(1j * (base + jitter)))
        k += 1
    return out


@dataclass
class WallReport:
    separations: list[float]
    discrepancies: list[float]
    orders: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.orders = [math.log2(a / b) if b > 0 else math.inf
                       for a, b in zip(self.discrepancies[:-1],
                                       self.discrepancies[1:])]

    def min_order(self) -> float:
        return min(self.orders) if self.orders else math.nan


def check_wall_continuity(model, u_in: complex, u_out: complex, R: float,
                          theta: tuple[float, ...],
                          zeta_list: list[complex],
                          halvings: int = 4,
                          spectrum_override=None,
                          tol_iter: float = 1e-11,
                          spec: GridSpec = GridSpec()) -> WallReport:
    """Coordinate mismatch across a wall for a halving sequence of pairs.

    Both sides are solved with their own chamber spectra (or a forced
    spectrum, for negative controls) and compared at the supplied zetas.
    The comparison is between the corrections X / X^sf: the semiflat factor
    is identical smooth data on both sides, and only the correction part
    carries the chamber spectrum whose consistency is under test.
    Continuity shows up as discrepancies scaling linearly to zero; a wrong
    spectrum on one side leaves a floor at the scale of the missing ray.
    """
    mdl = model if spectrum_override is None else \
        model.with_spectrum(spectrum_override)
    mid = 0.5 * (u_in + u_out)
    basis = model.lattice.basis()
    seps, discs = [], []
    for k in range(halvings + 1):
        ua = mid + (u_in - mid) / 2 ** k
        ub = mid + (u_out - mid) / 2 ** k
        sol_a = solve(mdl, ModelPoint(ua, R, theta), spec=spec,
                      tol_iter=tol_iter)
        sol_b = solve(mdl, ModelPoint(ub, R, theta), spec=spec,
                      tol_iter=tol_iter)
        worst = 0.0
        for z in zeta_list:
            for gamma in basis:
                va = cmath.exp(upsilon(mdl, sol_a, gamma, z))
                vb = cmath.exp(upsilon(mdl, sol_b, gamma, z))
                worst = max(worst, abs(va - vb))
        seps.append(abs(ua - ub))
        discs.append(worst)
    return WallReport(separations=seps, discrepancies=discs)


@dataclass
class DecayReport:
    r_values: list[float]
    max_corrections: list[float]
    slope: float
    target: float

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.target) / abs(self.target)


def correction_decay(model, u: complex, theta: tuple[float, ...],
                     r_values: list[float], n_angles: int = 12,
                     spec: GridSpec = GridSpec()) -> DecayReport:
    """Fit log(max correction over the unit circle) against R.

    The maximum is scanned over mid-sector points and directed on-ray
    values, where the boundary term makes the correction largest; its decay
    rate is -2 pi min|Z| over the active charges.
    """
    basis = model.lattice.basis()
    maxima = []
    min_z = None
    for R in r_values:
        point = ModelPoint(u, R, theta)
        sol = solve(model, point, spec=spec)
        if min_z is None:
            min_z = min(g.ray.min_abs_z() for g in sol.grids)
        peak = 0.0
        zetas = midsector_zetas(sol, n=n_angles)
        for z in zetas:
            for gamma in basis:
                peak = max(peak, abs(upsilon(model, sol, gamma, z)))
        for grid in sol.grids:
            for side in (+1, -1):
                for gamma in basis:
                    val = _upsilon_value(model, sol, gamma,
                                         grid.ray.direction, side=side,
                                         min_angle=1e-9,
                                         exact_sigma=True)
                    peak = max(peak, abs(val))
        maxima.append(peak)
    slope = float(np.polyfit(np.asarray(r_values, dtype=float),
                             np.log(np.asarray(maxima)), 1)[0])
    return DecayReport(r_values=list(r_values), max_corrections=maxima,
                       slope=slope, target=-2.0 * math.pi * float(min_z))
