"""Manufactured solutions, error norms, and experiment drivers.

Errors are computed against the cellwise L2 projections of the discrete
solution (conforming velocity part and pressure); all norms are relative
unless the exact norm vanishes, in which case the absolute error is
reported.  The convergence and conditioning drivers write plain CSV files
with one row per (mesh level) or (basis, alpha) combination.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import polybasis as pb
from .assembly import assemble, condition_number, solve_stokes, with_alpha
from .geometry import generate_mesh
from .stokes_local import StabilizationConfig

__all__ = ["ManufacturedCase", "trig_case", "poly_case", "patch_case",
           "ErrorReport", "compute_errors", "run_convergence",
           "run_alpha_sweep", "write_csv", "DEFAULT_ALPHAS"]

DEFAULT_ALPHAS = (1e-15, 1e-12, 1e-9, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1,
                  1.0, 10.0, 1e2, 1e3)


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact Stokes solution on the unit square with zero-mean pressure.

    velocity/forcing map (n, 2) points to (n, 2) values; pressure maps to
    (n,); grad_velocity maps to (n, 2, 2) with [i, c, d] = d u_c / d x_d.
    """

    name: str
    velocity: callable
    pressure: callable
    forcing: callable
    grad_velocity: callable


def trig_case():
    """Divergence-free trigonometric flow with a trigonometric pressure."""
    two_pi = 2.0 * np.pi

    def velocity(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([np.sin(two_pi * y) * (1.0 - np.cos(two_pi * x)),
                         np.sin(two_pi * x) * (np.cos(two_pi * y) - 1.0)], axis=1)

    def pressure(pts):
        x, y = pts[:, 0], pts[:, 1]
        return two_pi * (np.cos(two_pi * y) - np.cos(two_pi * x))

    def forcing(pts):
        x, y = pts[:, 0], pts[:, 1]
        sx, cx = np.sin(two_pi * x), np.cos(two_pi * x)
        sy, cy = np.sin(two_pi * y), np.cos(two_pi * y)
        f1 = -4.0 * np.pi ** 2 * sy * (2.0 * cx - 1.0) + 4.0 * np.pi ** 2 * sx
        f2 = 4.0 * np.pi ** 2 * sx * (2.0 * cy - 1.0) - 4.0 * np.pi ** 2 * sy
        return np.stack([f1, f2], axis=1)

    def grad_velocity(pts):
        x, y = pts[:, 0], pts[:, 1]
        sx, cx = np.sin(two_pi * x), np.cos(two_pi * x)
        sy, cy = np.sin(two_pi * y), np.cos(two_pi * y)
        g = np.empty((len(pts), 2, 2))
        g[:, 0, 0] = two_pi * sy * sx
        g[:, 0, 1] = two_pi * cy * (1.0 - cx)
        g[:, 1, 0] = two_pi * cx * (cy - 1.0)
        g[:, 1, 1] = -two_pi * sx * sy
        return g

    return ManufacturedCase("test1", velocity, pressure, forcing, grad_velocity)


def poly_case():
    """Divergence-free polynomial flow; the pressure is shifted to zero mean."""

    def velocity(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([(x ** 4 - 2 * x ** 3 + x ** 2) * (2 * y ** 3 - y),
                         -(2 * x ** 3 - 3 * x ** 2 + x) * (y ** 4 - y ** 2)], axis=1)

    def pressure(pts):
        x, y = pts[:, 0], pts[:, 1]
        return ((4 * x ** 3 - 6 * x ** 2 + 2 * x) * (2 * y ** 3 - y)
                + 0.2 * (6 * x ** 5 - 15 * x ** 4 + 10 * x ** 3) * y
                - 0.1 + 0.05)

    def forcing(pts):
        x, y = pts[:, 0], pts[:, 1]
        f1 = -6.0 * y * (x ** 4 - 2 * x ** 3 + x ** 2)
        f2 = ((12 * x - 6) * (y ** 4 - y ** 2)
              + (2 * x ** 3 - 3 * x ** 2 + x) * (12 * y ** 2 - 2)
              + (4 * x ** 3 - 6 * x ** 2 + 2 * x) * (6 * y ** 2 - 1)
              + 0.2 * (6 * x ** 5 - 15 * x ** 4 + 10 * x ** 3))
        return np.stack([f1, f2], axis=1)

    def grad_velocity(pts):
        x, y = pts[:, 0], pts[:, 1]
        g = np.empty((len(pts), 2, 2))
        g[:, 0, 0] = (4 * x ** 3 - 6 * x ** 2 + 2 * x) * (2 * y ** 3 - y)
        g[:, 0, 1] = (x ** 4 - 2 * x ** 3 + x ** 2) * (6 * y ** 2 - 1)
        g[:, 1, 0] = -(6 * x ** 2 - 6 * x + 1) * (y ** 4 - y ** 2)
        g[:, 1, 1] = -(2 * x ** 3 - 3 * x ** 2 + x) * (4 * y ** 3 - 2 * y)
        return g

    return ManufacturedCase("test2", velocity, pressure, forcing, grad_velocity)


def patch_case(k):
    """Harmonic polynomial velocity of degree k, low-order pressure.

    The discrete solution reproduces these fields exactly (up to roundoff)
    for the matching method order.
    """
    if k == 1:
        def velocity(pts):
            return np.stack([pts[:, 1], pts[:, 0]], axis=1)

        def pressure(pts):
            return pts[:, 0] + pts[:, 1] - 1.0

        def forcing(pts):
            return np.ones((len(pts), 2))

        def grad_velocity(pts):
            g = np.zeros((len(pts), 2, 2))
            g[:, 0, 1] = 1.0
            g[:, 1, 0] = 1.0
            return g
    elif k == 2:
        def velocity(pts):
            return np.stack([3 * pts[:, 1] ** 2, -3 * pts[:, 0] ** 2], axis=1)

        def pressure(pts):
            return pts[:, 0] + pts[:, 1] - 1.0

        def forcing(pts):
            x = np.empty((len(pts), 2))
            x[:, 0] = -6.0 + 1.0
            x[:, 1] = 6.0 + 1.0
            return x

        def grad_velocity(pts):
            g = np.zeros((len(pts), 2, 2))
            g[:, 0, 1] = 6 * pts[:, 1]
            g[:, 1, 0] = -6 * pts[:, 0]
            return g
    elif k == 3:
        def velocity(pts):
            return np.stack([4 * pts[:, 1] ** 3, -4 * pts[:, 0] ** 3], axis=1)

        def pressure(pts):
            return pts[:, 0] ** 2 + pts[:, 1] ** 2 - 2.0 / 3.0

        def forcing(pts):
            return np.stack([-24 * pts[:, 1] + 2 * pts[:, 0],
                             24 * pts[:, 0] + 2 * pts[:, 1]], axis=1)

        def grad_velocity(pts):
            g = np.zeros((len(pts), 2, 2))
            g[:, 0, 1] = 12 * pts[:, 1] ** 2
            g[:, 1, 0] = -12 * pts[:, 0] ** 2
            return g
    else:
        raise ValueError("patch cases exist for k in {1, 2, 3}")
    return ManufacturedCase(f"patch_k{k}", velocity, pressure, forcing,
                            grad_velocity)


_CASES = {"test1": trig_case, "test2": poly_case}


def get_case(name):
    if name in _CASES:
        return _CASES[name]()
    if name.startswith("patch_k"):
        return patch_case(int(name[len("patch_k"):]))
    raise KeyError(f"unknown case {name!r}")


@dataclass(frozen=True)
class ErrorReport:
    err0_u: float       # relative L2 velocity error of the projection
    err1_u: float       # relative H1-seminorm velocity error
    err0_p: float       # relative L2 pressure error


def _relative(err2, ref2):
    err = np.sqrt(err2)
    ref = np.sqrt(ref2)
    return float(err / ref) if ref > 1e-14 else float(err)


def compute_errors(solution, case):
    """Projection-based error norms of a discrete solution."""
    mesh, k = solution.mesh, solution.k
    dof_map = solution.dof_map
    e0u = e1u = e0p = n0u = n1u = n0p = 0.0
    for c, ctx in enumerate(solution.contexts):
        gd = dof_map.cell_scalar_dofs(mesh, c)
        ops = ctx.operators
        cux = ops.pizero_k @ solution.ux[gd]
        cuy = ops.pizero_k @ solution.uy[gd]
        cp = ops.pizero_k @ solution.p[gd]
        pts, w = ctx.quad.points, ctx.quad.weights
        basis_k = ctx.basis.prefix(k)
        phi = pb.evaluate(basis_k, pts)
        gphi = pb.gradient(basis_k, pts)           # (nq, nk, 2)

        u = case.velocity(pts)
        gu = case.grad_velocity(pts)
        p = case.pressure(pts)

        du0 = phi @ cux - u[:, 0]
        du1 = phi @ cuy - u[:, 1]
        dp = phi @ cp - p
        e0u += w @ (du0 ** 2 + du1 ** 2)
        e0p += w @ (dp ** 2)
        n0u += w @ (u[:, 0] ** 2 + u[:, 1] ** 2)
        n0p += w @ (p ** 2)

        gh0 = np.einsum("qjd,j->qd", gphi, cux)
        gh1 = np.einsum("qjd,j->qd", gphi, cuy)
        d0 = gh0 - gu[:, 0, :]
        d1 = gh1 - gu[:, 1, :]
        e1u += w @ np.sum(d0 ** 2 + d1 ** 2, axis=1)
        n1u += w @ np.sum(gu[:, 0, :] ** 2 + gu[:, 1, :] ** 2, axis=1)

    return ErrorReport(err0_u=_relative(e0u, n0u),
                       err1_u=_relative(e1u, n1u),
                       err0_p=_relative(e0p, n0p))


def _rate(prev_err, prev_h, err, h):
    if prev_err is None or err <= 0 or prev_err <= 0:
        return float("nan")
    return float(np.log(prev_err / err) / np.log(prev_h / h))


CONVERGENCE_FIELDS = ["family", "level", "k", "h", "n_dofs", "err0_u",
                      "err1_u", "err0_p", "rate0_u", "rate1_u", "rate0_p",
                      "seconds"]


def run_convergence(family, levels, k, case, basis_kind="scaled_monomial",
                    alpha=1.0, rng_seed=0, timings=True):
    """Solve on a mesh sequence and tabulate errors and observed rates."""
    if isinstance(case, str):
        case = get_case(case)
    config = StabilizationConfig(alpha=alpha)
    rows = []
    prev = None
    for level in levels:
        t0 = time.perf_counter()
        mesh = generate_mesh(family, level, rng_seed=rng_seed)
        sol = solve_stokes(mesh, k, f=case.forcing, g=case.velocity,
                           config=config, basis_kind=basis_kind)
        rep = compute_errors(sol, case)
        seconds = time.perf_counter() - t0 if timings else 0.0
        row = {
            "family": family, "level": level, "k": k, "h": mesh.h,
            "n_dofs": sol.n_dofs,
            "err0_u": rep.err0_u, "err1_u": rep.err1_u, "err0_p": rep.err0_p,
            "rate0_u": _rate(prev and prev["err0_u"], prev and prev["h"],
                             rep.err0_u, mesh.h) if prev else float("nan"),
            "rate1_u": _rate(prev and prev["err1_u"], prev and prev["h"],
                             rep.err1_u, mesh.h) if prev else float("nan"),
            "rate0_p": _rate(prev and prev["err0_p"], prev and prev["h"],
                             rep.err0_p, mesh.h) if prev else float("nan"),
            "seconds": seconds,
        }
        rows.append(row)
        prev = row
    return rows


ALPHA_FIELDS = ["basis", "k", "alpha", "cond"]


def run_alpha_sweep(family, level, k, alphas=DEFAULT_ALPHAS,
                    basis_kinds=("scaled_monomial", "l2_orthonormal"),
                    rng_seed=0):
    """Condition number of the reduced system over a stabilization sweep."""
    mesh = generate_mesh(family, level, rng_seed=rng_seed)
    rows = []
    for kind in basis_kinds:
        base = assemble(mesh, k, g=lambda p: np.zeros_like(p),
                        config=StabilizationConfig(alpha=alphas[0]),
                        basis_kind=kind, condensed=True)
        for alpha in alphas:
            system = with_alpha(base, alpha)
            rows.append({"basis": kind, "k": k, "alpha": alpha,
                         "cond": condition_number(system)})
    return rows


def write_csv(path, rows, fields):
    """Write rows (dicts) to CSV with full-precision, repr-stable floats."""
    def fmt(v):
        if isinstance(v, float):
            return repr(v)
        return v

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([fmt(row[f]) for f in fields])
