"""Regenerate the frozen reference values in tests/oracle_values.py.

Independent of the package: symbolic algebra and high-precision ODE integration via sympy/mpmath.
Run with ``python3 tools/derive_oracles.py`` and paste the output.
"""
from __future__ import annotations

import mpmath as mp
import sympy as sp

mp.mp.dps = 40
y1, y2, x1, x2, t = sp.symbols("y1 y2 x1 x2 t", real=True)

F = {
    "fold": y1**3 / 3 + y2**2 / 2,
    "cusp": y1**4 / 4 + y1**2 * y2 + y2**2 / 2,
    "elliptic": y1**3 / 3 - y1 * y2**2,
}
F["perturbed"] = F["elliptic"] + (y1**2 + y2**2) / 2


def hessian_at(f, p):
    H = sp.hessian(f, (y1, y2)).subs({y1: p[0], y2: p[1]})
    return [[float(H[0, 0]), float(H[0, 1])], [float(H[1, 0]), float(H[1, 1])]]


def critical_points(f, x):
    eqs = [sp.diff(f, y1) - x[0], sp.diff(f, y2) - x[1]]
    sols = sp.solve(eqs, (y1, y2), dict=True)
    pts = []
    for s in sols:
        a, b = complex(s[y1]), complex(s[y2])
        if abs(a.imag) < 1e-14 and abs(b.imag) < 1e-14:
            pts.append((float(a.real), float(b.real)))
    return sorted(pts)


def main() -> None:
    out = {}
    out["potential_cusp_1_1"] = float(F["cusp"].subs({y1: 1, y2: 1}))
    out["hessian_cusp_origin"] = hessian_at(F["cusp"], (0, 0))
    out["hessian_fold_1_5"] = hessian_at(F["fold"], (1, 5))
    out["elliptic_points_x_1_0"] = critical_points(F["elliptic"], (1, 0))
    out["elliptic_points_x_m1_0"] = critical_points(F["elliptic"], (-1, 0))
    out["elliptic_points_x_0_1"] = critical_points(F["elliptic"], (0, 1))
    out["perturbed_points_x_0_0"] = critical_points(F["perturbed"], (0, 0))
    # cusp caustic: det Hess = 0 at y = (1, 1/2), image under grad f
    g = [sp.diff(F["cusp"], v) for v in (y1, y2)]
    out["cusp_det_hess_at_1_half"] = float(sp.hessian(F["cusp"], (y1, y2)).det().subs({y1: 1, y2: sp.Rational(1, 2)}))
    out["cusp_caustic_image_1_half"] = [float(e.subs({y1: 1, y2: sp.Rational(1, 2)})) for e in g]
    # elliptic polar form at x = 0, rho = 1, theta = pi/6 from the Cartesian field
    rho, th = sp.symbols("rho theta", positive=True)
    ge = [sp.diff(F["elliptic"], v) for v in (y1, y2)]
    sub = {y1: rho * sp.cos(th), y2: rho * sp.sin(th)}
    rdot = sp.simplify((ge[0] * sp.cos(th) + ge[1] * sp.sin(th)).subs(sub))
    tdot = sp.simplify(((-ge[0] * sp.sin(th) + ge[1] * sp.cos(th)) / rho).subs(sub))
    out["polar_x0_rho1_pi6"] = [float(rdot.subs({rho: 1, th: sp.pi / 6})), float(tdot.subs({rho: 1, th: sp.pi / 6}))]
    # fold line y1' = y1^2 - 1 from 0
    sol = mp.odefun(lambda s, y: y**2 - 1, 0, mp.mpf(0))
    out["fold_line_y1_at_t1"] = float(sol(1))
    # perturbed axis connection at x = (1, 0): y1' = y1^2 + y1 - 1 from 0
    sol = mp.odefun(lambda s, y: y**2 + y - 1, 0, mp.mpf(0))
    out["perturbed_axis_y1"] = [[tt, float(sol(tt))] for tt in (0.5, 1.0, 2.0, 4.0)]
    solb = mp.odefun(lambda s, y: -(y**2 + y - 1), 0, mp.mpf(0))
    out["perturbed_axis_y1_backward"] = [[-tt, float(solb(tt))] for tt in (0.5, 1.0, 2.0, 4.0)]
    # perturbed critical points on x2 = 0 at three sample x1
    out["perturbed_axis_points"] = {str(a): critical_points(F["perturbed"], (sp.Rational(a), 0)) for a in ("1/2", "-1/8", "1")}
    for k, v in out.items():
        print(f"{k.upper()} = {v!r}")


if __name__ == "__main__":
    main()
