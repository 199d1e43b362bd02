"""Command-line entry point: validation, solving, checks, data emission.

Every subcommand is deterministic given its flags (randomized sampling is
seeded), failure paths exit with distinct codes and a one-line reason:
exit 0 on success, 1 on a failed check or solver error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import cmath
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import geometry, ks, models, solver, trees
from .lattice import charge, validate_conditions
from .semiflat import ModelPoint, xsf_log


class CheckFailure(RuntimeError):
    """A verification subcommand found a violation."""


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("HKFORGE_THREADS", "1")))
    except ValueError:
        return 1


def parse_complex(text: str) -> complex:
    try:
        re_part, im_part = text.split(",")
        return complex(float(re_part), float(im_part))
    except Exception as exc:
        raise argparse.ArgumentTypeError(
            f"expected 're,im', got {text!r}") from exc


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except Exception as exc:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated floats, got {text!r}") from exc


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def point_from_args(args) -> ModelPoint:
    return ModelPoint(args.u, args.R, args.theta)


def grid_spec_from_args(args) -> solver.GridSpec:
    return solver.GridSpec(eps_quad=args.eps_quad, panels=args.panels,
                           nodes_per_panel=args.nodes)


def add_point_args(p, theta_required=True):
    p.add_argument("--u", type=parse_complex, required=True,
                   metavar="RE,IM", help="base point")
    p.add_argument("--R", type=float, required=True, help="radius parameter")
    p.add_argument("--theta", type=parse_floats, metavar="T1,T2",
                   required=theta_required, default=(0.0, 0.0),
                   help="torus angles in radians")


def add_solver_args(p):
    p.add_argument("--tol", type=float, default=1e-10, dest="tol",
                   help="iteration stopping tolerance")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--nodes", type=int, default=16,
                   help="Gauss-Legendre nodes per panel")
    p.add_argument("--panels", type=int, default=16, help="panels per ray")
    p.add_argument("--eps-quad", type=float, default=1e-12)


def _positive_checks(args) -> None:
    for name in ("R", "tol", "eps_quad"):
        if hasattr(args, name) and getattr(args, name) is not None \
                and getattr(args, name) <= 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    for name in ("nodes", "panels", "order", "cutoff", "halvings"):
        if hasattr(args, name) and getattr(args, name) is not None \
                and getattr(args, name) < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# subcommands


def cmd_model_info(args) -> int:
    model = models.load_model(args.model)
    print(models.model_info(model))
    return 0


def cmd_validate(args) -> int:
    model = models.load_model(args.model)
    report = validate_conditions(model, n_grid=args.grid)
    print(report.table())
    if not report.ok:
        print(f"FAIL: residual above {report.threshold:g}")
        return 1
    return 0


def cmd_wcf_check(args) -> int:
    model = models.load_model(args.model)
    if model.name != "pentagon":
        print("wcf-check: only the pentagon model carries a wall")
        return 1
    grading = ks.ConeGrading(model.lattice, tuple(model.lattice.basis()))
    g1, g2 = charge(1, 0), charge(0, 1)
    lhs = ks.ordered_product([ks.ks_transform(grading, g1, 1, args.order),
                              ks.ks_transform(grading, g2, 1, args.order)])
    rhs = ks.ordered_product([ks.ks_transform(grading, g2, 1, args.order),
                              ks.ks_transform(grading, g1 + g2, 1, args.order),
                              ks.ks_transform(grading, g1, 1, args.order)])
    if args.dump_series:
        for label, side in (("lhs K1 K2", lhs), ("rhs K2 K12 K1", rhs)):
            print(f"# {label}")
            for i, cof in enumerate(side.cofactors):
                print(f"## image cofactor of basis charge {i + 1}")
                for line in cof.dump_lines():
                    print(line)
    equal, first = ks.check_wcf(lhs, rhs)
    if equal:
        print(f"pentagon identity: PASS order {args.order}")
        return 0
    print(f"pentagon identity: FAIL first discrepancy at degree {first}")
    return 1


def _solution_payload(model, point, spec, sol) -> dict:
    cfg = {"model": model.config,
           "point": {"u": [point.u.real, point.u.imag], "R": point.R,
                     "theta": list(point.theta)},
           "spec": {"eps_quad": spec.eps_quad, "panels": spec.panels,
                    "nodes_per_panel": spec.nodes_per_panel},
           "tol_iter": sol.tol_iter}
    rays = []
    for grid, ups in zip(sol.grids, sol.upsilon):
        entries = []
        for gamma, vals in ups.items():
            entries.append({
                "charge": list(gamma.coeffs),
                "upsilon": [[v.real, v.imag] for v in vals],
            })
        rays.append({"direction": [grid.ray.direction.real,
                                   grid.ray.direction.imag],
                     "s_max": grid.s_max,
                     "charges": entries})
    return {"hash": config_hash(cfg), "config": cfg, "rays": rays,
            "iterations": sol.iterations, "residual": sol.residual}


def load_solution(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = payload["config"]
    if config_hash(cfg) != payload.get("hash"):
        raise CheckFailure(f"solution file {path}: content hash mismatch")
    model = models.model_from_config(cfg["model"])
    point = ModelPoint(complex(*cfg["point"]["u"]), cfg["point"]["R"],
                       tuple(cfg["point"]["theta"]))
    spec = solver.GridSpec(eps_quad=cfg["spec"]["eps_quad"],
                           panels=cfg["spec"]["panels"],
                           nodes_per_panel=cfg["spec"]["nodes_per_panel"])
    sol = solver.solve(model, point, spec=spec, tol_iter=cfg["tol_iter"])
    # replace the recomputed corrections with the stored ones
    for ray_payload, grid, ups in zip(payload["rays"], sol.grids, sol.upsilon):
        stored_dir = complex(*ray_payload["direction"])
        if abs(stored_dir - grid.ray.direction) > 1e-9:
            raise CheckFailure(f"solution file {path}: ray layout mismatch")
        for entry in ray_payload["charges"]:
            gamma = charge(*entry["charge"])
            vals = np.array([complex(a, b) for a, b in entry["upsilon"]])
            if gamma not in ups or len(vals) != len(ups[gamma]):
                raise CheckFailure(
                    f"solution file {path}: charge table mismatch")
            ups[gamma] = vals
    return model, point, sol


def cmd_solve(args) -> int:
    model = models.load_model(args.model)
    point = point_from_args(args)
    spec = grid_spec_from_args(args)
    sol = solver.solve(model, point, spec=spec, tol_iter=args.tol,
                       max_iter=args.max_iter)
    print(f"converged in {sol.iterations} iteration(s), "
          f"residual {sol.residual:.3e}, recheck {sol.recheck_residual:.3e}")
    print(f"rays: {len(sol.grids)}, max correction {sol.max_correction():.3e}")
    for grid in sol.grids:
        print(f"  ray {grid.ray.angle:+8.5f} rad  charges "
              f"{[c.coeffs for c in grid.ray.charges]}  s_max {grid.s_max:.3f}"
              f"  nodes {grid.node_count}")
    if args.out:
        payload = _solution_payload(model, point, spec, sol)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"solution written to {args.out} (hash {payload['hash']})")
    return 0


def cmd_jump_check(args) -> int:
    model, point, sol = load_solution(args.solution)
    worst = 0.0
    print("ray angle    jump defect")
    for i, grid in enumerate(sol.grids):
        defect = solver.ray_jump_defect(model, sol, i)
        worst = max(worst, defect)
        print(f"{grid.ray.angle:+9.5f}  {defect:12.4e}")
    print(f"worst jump defect: {worst:.4e} (tolerance {args.tol:g})")
    if worst > args.tol:
        print("FAIL: ray jumps deviate from the expected transformation")
        return 1
    return 0


def cmd_wall_check(args) -> int:
    model = models.load_model(args.model)
    if model.name != "pentagon":
        print("wall-check: only the pentagon model carries a wall")
        return 1
    w = models.pentagon_wall_point(model, args.phi)
    u_in = w * (1.0 - args.sep)
    u_out = w * (1.0 + args.sep)
    probe = solver.solve(model, ModelPoint(u_in, args.R, args.theta))
    zetas = solver.midsector_zetas(probe, n=4)
    report = solver.check_wall_continuity(model, u_in, u_out, args.R,
                                          args.theta, zetas,
                                          halvings=args.halvings)
    print("separation     discrepancy")
    for s, d in zip(report.separations, report.discrepancies):
        print(f"{s:12.4e}  {d:12.4e}")
    print(f"observed orders: {['%.3f' % o for o in report.orders]}")

    support_in = model.spectrum.support(u_in)
    from .lattice import Spectrum
    frozen = Spectrum(lambda g, u: 1 if g in support_in else 0,
                      lambda u: support_in)
    control = solver.check_wall_continuity(model, u_in, u_out, args.R,
                                           args.theta, zetas,
                                           halvings=args.halvings,
                                           spectrum_override=frozen)
    print(f"negative-control orders: {['%.3f' % o for o in control.orders]}")
    ok = report.min_order() >= args.min_order
    control_stalls = control.min_order() < args.min_order
    if not ok:
        print(f"FAIL: continuity order {report.min_order():.3f} "
              f"< {args.min_order}")
        return 1
    if not control_stalls:
        print("FAIL: negative control unexpectedly continuous")
        return 1
    print(f"wall continuity: PASS (order >= {args.min_order}, "
          f"control stalls)")
    return 0


def cmd_tree_compare(args) -> int:
    model = models.load_model(args.model)
    point = point_from_args(args)
    sol = solver.solve(model, point, tol_iter=1e-13)
    integ = trees.TreeIntegrator(model, point, sol.grids)
    gamma = charge(*args.charge)
    ref = solver.evaluate(model, sol, gamma, args.zeta)
    print(f"reference log X from the ray solver: {ref.log_value:.15g}")
    print("cutoff   log X (tree series)                 |dlog|")
    last = math.inf
    for cutoff in range(1, args.cutoff + 1):
        sv = trees.series_solution(model, point, gamma, args.zeta, cutoff,
                                   integrator=integ)
        last = abs(sv.log_value - ref.log_value)
        print(f"{cutoff:6d}   {sv.log_value:.15g}   {last:.3e}")
    min_z = min(g.ray.min_abs_z() for g in sol.grids)
    bound = max(math.exp(-2 * math.pi * point.R * (args.cutoff + 1) * min_z),
                10 * sol.spec.eps_quad)
    print(f"agreement bound: {bound:.3e}")
    if last > bound:
        print("FAIL: tree series disagrees beyond the cutoff bound")
        return 1
    return 0


def cmd_ov_compare(args) -> int:
    model = models.load_model("ov")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for k in range(args.count):
        R = args.r_list[k % len(args.r_list)]
        u = (0.3 + 0.5 * rng.random()) * cmath.exp(2j * math.pi * rng.random())
        if abs(cmath.phase(u)) > math.pi - 0.4:
            u = abs(u)
        theta = (2 * math.pi * rng.random(), 2 * math.pi * rng.random())
        point = ModelPoint(u, R, theta)
        sol = solver.solve(model, point)
        zeta = (0.4 + 1.2 * rng.random()) * cmath.exp(2j * math.pi * rng.random())
        angles = [abs(cmath.phase(zeta / g.ray.direction)) for g in sol.grids]
        if min(angles) < 0.05:
            zeta *= cmath.exp(0.3j)
        gamma = charge(1, 0)
        got = solver.evaluate(model, sol, gamma, zeta)
        want = models.ov_oracle(model, point, gamma, zeta)
        err = abs(got.value - want.value) / max(abs(want.value), 1e-300)
        worst = max(worst, err)
    print(f"one-step oracle comparison over {args.count} samples: "
          f"worst relative error {worst:.3e}")
    if worst > args.tol:
        print(f"FAIL: above tolerance {args.tol:g}")
        return 1
    return 0


def cmd_decay_scan(args) -> int:
    model = models.load_model(args.model)
    report = solver.correction_decay(model, args.u, args.theta, args.r_list)
    print("R        max correction")
    for r, m in zip(report.r_values, report.max_corrections):
        print(f"{r:6.3f}   {m:.6e}")
    print(f"fitted slope {report.slope:+.6f}, "
          f"expected {report.target:+.6f}, "
          f"relative error {report.relative_error:.3%}")
    if report.relative_error > args.tol_rel:
        print(f"FAIL: decay-rate error above {args.tol_rel:.1%}")
        return 1
    return 0


def cmd_metric(args) -> int:
    model = models.load_model(args.model)
    point = point_from_args(args)
    fit, metric, algebra = geometry.fit_point(
        model, point, n_zetas=args.zetas, semiflat_only=args.semiflat_only)

    def show_matrix(name, m):
        print(name)
        for row in m:
            print("   " + "  ".join(f"{x:+12.6e}" for x in row))

    show_matrix("metric g:", metric.g)
    show_matrix("complex structure J:", metric.J)
    print(f"laurent residual {fit.residual:.3e}, "
          f"omega_3 imaginary defect {fit.omega3_imag:.3e}")
    print(f"J^2 defect {metric.j_squared_defect:.3e}")
    print(f"triple algebra: equal-squares {algebra.equal_squares_defect:.3e}, "
          f"mixed {algebra.mixed_defect:.3e}")
    print("eigenvalues: " + "  ".join(f"{v:.6e}" for v in metric.eigenvalues))
    if args.emit_grid:
        rows = _metric_grid_rows(model, point, args.emit_grid,
                                 args.semiflat_only)
        with open(args.grid_out, "w", encoding="utf-8") as fh:
            fh.write("# re_u im_u " + " ".join(
                f"g{i}{j}" for i in range(4) for j in range(i, 4)) + "\n")
            for row in rows:
                fh.write(" ".join(f"{v:.10e}" for v in row) + "\n")
        print(f"metric grid written to {args.grid_out}")
    if not metric.positive_definite:
        print("FAIL: metric not positive definite at this point")
        return 1
    return 0


def _metric_grid_rows(model, point, n, semiflat_only):
    base = point.u
    offsets = np.linspace(-0.15, 0.15, n)

    def one(du):
        p = ModelPoint(base + du * max(abs(base), 1.0), point.R, point.theta)
        _, metric, _ = geometry.fit_point(model, p,
                                          semiflat_only=semiflat_only)
        g = metric.g
        return [p.u.real, p.u.imag] + [g[i, j] for i in range(4)
                                       for j in range(i, 4)]

    if worker_count() > 1:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            return list(pool.map(one, offsets))
    return [one(du) for du in offsets]


def cmd_semiflat_sample(args) -> int:
    model = models.load_model(args.model)
    point = point_from_args(args)
    basis = model.lattice.basis()
    print("zeta_re        zeta_im        charge    Re log X^sf     Im log X^sf")
    for k in range(args.zeta_grid):
        z = cmath.exp(2j * math.pi * (k + 0.37) / args.zeta_grid)
        for gamma in basis:
            lv = xsf_log(model, point, gamma, z)
            print(f"{z.real:+12.8f}  {z.imag:+12.8f}  {str(gamma.coeffs):8}"
                  f"  {lv.real:+14.8e}  {lv.imag:+14.8e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hkforge",
        description="quantum-corrected hyperkahler metrics from "
                    "integrable-system data")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model-info", help="print a model summary")
    p.add_argument("model")
    p.set_defaults(fn=cmd_model_info)

    p = sub.add_parser("validate", help="check the defining conditions")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int, default=16)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("wcf-check", help="verify the wall-crossing identity")
    p.add_argument("--model", required=True)
    p.add_argument("--order", type=int, default=8)
    p.add_argument("--dump-series", action="store_true")
    p.set_defaults(fn=cmd_wcf_check)

    p = sub.add_parser("solve", help="solve the ray integral equation")
    p.add_argument("--model", required=True)
    add_point_args(p)
    add_solver_args(p)
    p.add_argument("--out", help="write the solution file here")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("jump-check", help="verify ray jumps of a solution")
    p.add_argument("--solution", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(fn=cmd_jump_check)

    p = sub.add_parser("wall-check", help="continuity across the wall")
    p.add_argument("--model", required=True)
    p.add_argument("--phi", type=float, default=0.9)
    p.add_argument("--sep", type=float, default=0.02)
    p.add_argument("--R", type=float, default=0.35)
    p.add_argument("--theta", type=parse_floats, default=(0.37, 1.29))
    p.add_argument("--halvings", type=int, default=4)
    p.add_argument("--min-order", type=float, default=0.9, dest="min_order")
    p.set_defaults(fn=cmd_wall_check)

    p = sub.add_parser("tree-compare", help="tree series vs ray solver")
    p.add_argument("--model", required=True)
    add_point_args(p)
    p.add_argument("--cutoff", type=int, default=4)
    p.add_argument("--zeta", type=parse_complex, required=True)
    p.add_argument("--charge", type=lambda s: tuple(int(x) for x in s.split(",")),
                   default=(1, 0))
    p.set_defaults(fn=cmd_tree_compare)

    p = sub.add_parser("ov-compare", help="solver vs independent quadrature")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--r-list", type=parse_floats, default=(0.5, 1.0, 2.0),
                   dest="r_list")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_ov_compare)

    p = sub.add_parser("decay-scan", help="correction decay against R")
    p.add_argument("--model", required=True)
    p.add_argument("--u", type=parse_complex, required=True)
    p.add_argument("--theta", type=parse_floats, default=(0.37, 1.29))
    p.add_argument("--R-list", type=parse_floats, dest="r_list",
                   default=(1.0, 1.5, 2.0, 2.5, 3.0, 4.0))
    p.add_argument("--tol-rel", type=float, default=0.02, dest="tol_rel")
    p.set_defaults(fn=cmd_decay_scan)

    p = sub.add_parser("metric", help="assemble the metric at a point")
    p.add_argument("--model", required=True)
    add_point_args(p)
    p.add_argument("--semiflat-only", action="store_true")
    p.add_argument("--zetas", type=int, default=12)
    p.add_argument("--emit-grid", type=int, default=0, dest="emit_grid")
    p.add_argument("--grid-out", default="metric_grid.txt", dest="grid_out")
    p.set_defaults(fn=cmd_metric)

    p = sub.add_parser("semiflat-sample", help="table of semiflat coordinates")
    p.add_argument("--model", required=True)
    add_point_args(p)
    p.add_argument("--zeta-grid", type=int, default=8, dest="zeta_grid")
    p.set_defaults(fn=cmd_semiflat_sample)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        _positive_checks(args)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (solver.RSmallError, solver.NonConvergenceError,
            solver.RayProximityError, CheckFailure) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
