"""Scalar Dormand-Prince 5(4) integrator for planar fields, with dense output and events.

Written for two-component systems with plain floats: per-step overhead matters
far more than vectorization when thousands of short manifold shots are taken.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from scipy.optimize import brentq

Rhs = Callable[[float, float], tuple[float, float]]

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# error weights b - b*
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# dense output
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423


class Termination(str, Enum):
    SECTION_HIT = "section_hit"
    ESCAPED = "escaped"
    CONVERGED = "converged"
    MAX_TIME = "max_time"


class StepUnderflow(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowControls:
    atol: float = 1e-10
    rtol: float = 1e-8
    escape_radius: float = 60.0
    max_time: float = 200.0
    basin_radius: float = 1e-5
    min_step: float = 1e-14
    max_steps: int = 200000


@dataclass(frozen=True)
class LineEvent:
    """Stop at the first crossing of the line through ``base`` with unit normal ``normal``."""

    base: tuple[float, float]
    normal: tuple[float, float]


@dataclass
class Trajectory:
    t: list[float]
    y1: list[float]
    y2: list[float]
    termination: Termination
    target: str | None = None           # label for CONVERGED
    crossing: tuple[float, float] | None = None
    crossing_time: float | None = None
    dense: list[tuple] = field(default_factory=list, repr=False)

    @property
    def samples(self) -> list[tuple[float, tuple[float, float]]]:
        return [(t, (a, b)) for t, a, b in zip(self.t, self.y1, self.y2)]

    @property
    def end(self) -> tuple[float, float]:
        return self.y1[-1], self.y2[-1]

    def at(self, t: float) -> tuple[float, float]:
        """Dense-output value at time ``t`` inside the integrated span."""
        if not self.dense:
            raise ValueError("trajectory was integrated without dense output")
        sgn = 1.0 if self.t[-1] >= self.t[0] else -1.0
        s = sgn * (t - self.t[0])
        lo, hi = 0, len(self.dense) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if sgn * (self.dense[mid][0] - self.t[0]) + self.dense[mid][1] < s:
                lo = mid + 1
            else:
                hi = mid
        t0, h, r1, r2 = self.dense[lo]
        th = (sgn * (t - t0)) / h if h else 0.0
        return _interp(r1, th), _interp(r2, th)


def _interp(r, th: float) -> float:
    c1, c2, c3, c4, c5 = r
    th1 = 1.0 - th
    return c1 + th * (c2 + th1 * (c3 + th * (c4 + th1 * c5)))


def integrate_rhs(rhs: Rhs, y0: Sequence[float], direction: int = 1, controls: FlowControls = FlowControls(),
                  line: LineEvent | None = None, targets: Sequence[tuple[str, float, float]] = (),
                  t_end: float | None = None, dense: bool = False, h0: float | None = None) -> Trajectory:
    """Integrate ``dy/dt = rhs(y)`` forward (``direction=1``) or backward (``-1``)."""
    sgn = 1.0 if direction >= 0 else -1.0
    atol, rtol = controls.atol, controls.rtol
    R2 = controls.escape_radius ** 2
    T = controls.max_time if t_end is None else min(abs(t_end), controls.max_time)
    basin = controls.basin_radius

    def f(a: float, b: float) -> tuple[float, float]:
        v1, v2 = rhs(a, b)
        return sgn * v1, sgn * v2

    y1, y2 = float(y0[0]), float(y0[1])
    tau = 0.0
    ts, ys1, ys2 = [0.0], [y1], [y2]
    dens: list[tuple] = []
    k1 = f(y1, y2)

    if line is not None:
        lb1, lb2 = line.base
        ln1, ln2 = line.normal
        g_prev = (y1 - lb1) * ln1 + (y2 - lb2) * ln2
    if h0 is None:
        sc1 = atol + rtol * abs(y1)
        sc2 = atol + rtol * abs(y2)
        d0 = math.hypot(y1 / sc1, y2 / sc2)
        d1 = math.hypot(k1[0] / sc1, k1[1] / sc2)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        # second-derivative estimate from one explicit Euler step (Hairer-Wanner starting step)
        p1, p2 = f(y1 + h * k1[0], y2 + h * k1[1])
        d2 = math.hypot((p1 - k1[0]) / sc1, (p2 - k1[1]) / sc2) / h
        dd = max(d1, d2)
        h1 = max(1e-6, h * 1e-3) if dd <= 1e-15 else (0.01 / dd) ** 0.2
        h = min(100.0 * h, h1, 0.1, T)
    else:
        h = h0
    nsteps = 0
    last = False
    while True:
        if tau + h >= T:
            h = T - tau
            last = True
        if h < controls.min_step:
            if tau >= T - controls.min_step:
                break
            raise StepUnderflow(f"step size {h:.3g} underflow at t={sgn * tau:.6g}, y=({y1:.6g}, {y2:.6g})")
        nsteps += 1
        if nsteps > controls.max_steps:
            raise StepUnderflow(f"exceeded {controls.max_steps} steps at t={sgn * tau:.6g}")
        a1, a2 = k1
        k2 = f(y1 + h * A21 * a1, y2 + h * A21 * a2)
        k3 = f(y1 + h * (A31 * a1 + A32 * k2[0]), y2 + h * (A31 * a2 + A32 * k2[1]))
        k4 = f(y1 + h * (A41 * a1 + A42 * k2[0] + A43 * k3[0]),
               y2 + h * (A41 * a2 + A42 * k2[1] + A43 * k3[1]))
        k5 = f(y1 + h * (A51 * a1 + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
               y2 + h * (A51 * a2 + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]))
        k6 = f(y1 + h * (A61 * a1 + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
               y2 + h * (A61 * a2 + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]))
        n1 = y1 + h * (A71 * a1 + A73 * k3[0] + A74 * k4[0] + A75 * k5[0] + A76 * k6[0])
        n2 = y2 + h * (A71 * a2 + A73 * k3[1] + A74 * k4[1] + A75 * k5[1] + A76 * k6[1])
        if not (math.isfinite(n1) and math.isfinite(n2)):
            h *= 0.25
            last = False
            continue
        k7 = f(n1, n2)
        e1 = h * (E1 * a1 + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0])
        e2 = h * (E1 * a2 + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1])
        s1 = atol + rtol * max(abs(y1), abs(n1))
        s2 = atol + rtol * max(abs(y2), abs(n2))
        err = math.sqrt(0.5 * ((e1 / s1) ** 2 + (e2 / s2) ** 2))
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            last = False
            continue
        # accepted step
        need_dense = dense or line is not None
        if need_dense:
            r1 = _coeffs(y1, n1, h, a1, k3[0], k4[0], k5[0], k6[0], k7[0])
            r2 = _coeffs(y2, n2, h, a2, k3[1], k4[1], k5[1], k6[1], k7[1])
        if line is not None:
            g_new = (n1 - lb1) * ln1 + (n2 - lb2) * ln2
            if (g_prev < 0.0) != (g_new < 0.0) and g_prev != 0.0:
                def gfun(th: float) -> float:
                    return (_interp(r1, th) - lb1) * ln1 + (_interp(r2, th) - lb2) * ln2
                th = brentq(gfun, 0.0, 1.0, xtol=1e-15, rtol=1e-15) if g_new != 0.0 else 1.0
                c1, c2 = _interp(r1, th), _interp(r2, th)
                tc = tau + th * h
                ts.append(sgn * tc)
                ys1.append(c1)
                ys2.append(c2)
                dens.append((sgn * tau, h, r1, r2))
                return Trajectory(ts, ys1, ys2, Termination.SECTION_HIT, crossing=(c1, c2),
                                  crossing_time=sgn * tc, dense=dens)
            g_prev = g_new
        if dense:
            dens.append((sgn * tau, h, r1, r2))
        tau += h
        y1, y2 = n1, n2
        k1 = k7
        ts.append(sgn * tau)
        ys1.append(y1)
        ys2.append(y2)
        if y1 * y1 + y2 * y2 > R2:
            return Trajectory(ts, ys1, ys2, Termination.ESCAPED, dense=dens)
        for lab, c1, c2 in targets:
            if (y1 - c1) ** 2 + (y2 - c2) ** 2 < basin * basin:
                return Trajectory(ts, ys1, ys2, Termination.CONVERGED, target=lab, dense=dens)
        if last:
            break
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h *= fac
    return Trajectory(ts, ys1, ys2, Termination.MAX_TIME, dense=dens)


def _coeffs(y0, y1, h, k1, k3, k4, k5, k6, k7):
    c2 = y1 - y0
    c3 = h * k1 - c2
    c4 = c2 - h * k7 - c3
    c5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
    return (y0, c2, c3, c4, c5)
