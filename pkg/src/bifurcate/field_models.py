"""Generating families and the gradient fields they induce.

Every family supplies a potential ``f`` on the phase plane. For a parameter
``x`` the flow is ``dy/dt = grad f(y) - x`` and its Jacobian is ``Hess f(y)``,
independent of ``x``.

The polynomial formulas are written with plain arithmetic so that the same
code evaluates scalars and numpy arrays alike.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi


class FamilyKind(str, Enum):
    FOLD = "fold"
    CUSP = "cusp"
    ELLIPTIC = "elliptic"
    PERTURBED = "perturbed"
    BUMP = "bump"


CLOSED_FORM_KINDS = (FamilyKind.FOLD, FamilyKind.CUSP, FamilyKind.ELLIPTIC, FamilyKind.PERTURBED)


@dataclass(frozen=True)
class ParameterPoint:
    x1: float
    x2: float

    @property
    def r(self) -> float:
        return math.hypot(self.x1, self.x2)

    @property
    def alpha(self) -> float:
        return math.atan2(self.x2, self.x1) % TWO_PI

    @classmethod
    def polar(cls, r: float, alpha: float) -> ParameterPoint:
        return cls(r * math.cos(alpha), r * math.sin(alpha))

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])


@dataclass(frozen=True)
class PhasePoint:
    y1: float
    y2: float

    @property
    def rho(self) -> float:
        return math.hypot(self.y1, self.y2)

    @property
    def theta(self) -> float:
        return math.atan2(self.y2, self.y1) % TWO_PI

    def as_array(self) -> np.ndarray:
        return np.array([self.y1, self.y2])


class FieldValue(NamedTuple):
    v1: float
    v2: float


@dataclass(frozen=True)
class Bump:
    """Compactly supported smooth bump ``eps * exp(1/(u-1))`` with ``u = |y-c|^2/sigma^2``."""

    center: tuple[float, float]
    sigma: float
    eps: float

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError(f"bump sigma must be positive, got {self.sigma}")


# Polynomial parts. Each returns f, (f1, f2), (f11, f12, f22).

def _fold_f(y1, y2):
    return y1 * y1 * y1 / 3.0 + y2 * y2 / 2.0


def _fold_grad(y1, y2):
    return y1 * y1, y2


def _fold_hess(y1, y2):
    return 2.0 * y1, 0.0 * y1, 1.0 + 0.0 * y1


def _cusp_f(y1, y2):
    y1s = y1 * y1
    return y1s * y1s / 4.0 + y1s * y2 + y2 * y2 / 2.0


def _cusp_grad(y1, y2):
    return y1 * y1 * y1 + 2.0 * y1 * y2, y1 * y1 + y2


def _cusp_hess(y1, y2):
    return 3.0 * y1 * y1 + 2.0 * y2, 2.0 * y1, 1.0 + 0.0 * y1


def _elliptic_f(y1, y2):
    return y1 * y1 * y1 / 3.0 - y1 * y2 * y2


def _elliptic_grad(y1, y2):
    return y1 * y1 - y2 * y2, -2.0 * y1 * y2


def _elliptic_hess(y1, y2):
    return 2.0 * y1, -2.0 * y2, -2.0 * y1


def _perturbed_f(y1, y2):
    return y1 * y1 * y1 / 3.0 - y1 * y2 * y2 + 0.5 * (y1 * y1 + y2 * y2)


def _perturbed_grad(y1, y2):
    return y1 * y1 - y2 * y2 + y1, -2.0 * y1 * y2 + y2


def _perturbed_hess(y1, y2):
    return 2.0 * y1 + 1.0, -2.0 * y2, 1.0 - 2.0 * y1


_POLY = {
    FamilyKind.FOLD: (_fold_f, _fold_grad, _fold_hess),
    FamilyKind.CUSP: (_cusp_f, _cusp_grad, _cusp_hess),
    FamilyKind.ELLIPTIC: (_elliptic_f, _elliptic_grad, _elliptic_hess),
    FamilyKind.PERTURBED: (_perturbed_f, _perturbed_grad, _perturbed_hess),
}


def _bump_terms(bump: Bump, y1, y2, order: int):
    """Bump value and derivatives up to ``order`` on scalars or arrays."""
    c1, c2 = bump.center
    s2 = bump.sigma * bump.sigma
    d1 = np.asarray(y1, dtype=float) - c1
    d2 = np.asarray(y2, dtype=float) - c2
    u = (d1 * d1 + d2 * d2) / s2
    inside = u < 1.0
    w = np.where(inside, u - 1.0, -1.0)
    g = np.where(inside, np.exp(1.0 / w), 0.0) * bump.eps
    if order == 0:
        return g
    # dg/du = -g/(u-1)^2, d2g/du2 = g(2u-1)/(u-1)^4
    w2 = w * w
    gu = -g / w2
    # grad u = 2 d / sigma^2
    u1 = 2.0 * d1 / s2
    u2 = 2.0 * d2 / s2
    if order == 1:
        return g, gu * u1, gu * u2
    guu = g * (2.0 * u - 1.0) / (w2 * w2)
    diag = 2.0 * gu / s2
    return (
        g,
        (gu * u1, gu * u2),
        (guu * u1 * u1 + diag, guu * u1 * u2, guu * u2 * u2 + diag),
    )


def _scalar_bump_terms(bump: Bump, y1: float, y2: float, order: int):
    """Same as ``_bump_terms`` for plain floats, without numpy overhead."""
    c1, c2 = bump.center
    s2 = bump.sigma * bump.sigma
    d1 = y1 - c1
    d2 = y2 - c2
    u = (d1 * d1 + d2 * d2) / s2
    if u >= 1.0:
        return (0.0, 0.0, 0.0) if order == 1 else (0.0, (0.0, 0.0), (0.0, 0.0, 0.0))
    w = u - 1.0
    g = bump.eps * math.exp(1.0 / w)
    w2 = w * w
    gu = -g / w2
    u1 = 2.0 * d1 / s2
    u2 = 2.0 * d2 / s2
    if order == 1:
        return g, gu * u1, gu * u2
    guu = g * (2.0 * u - 1.0) / (w2 * w2)
    diag = 2.0 * gu / s2
    return g, (gu * u1, gu * u2), (guu * u1 * u1 + diag, guu * u1 * u2, guu * u2 * u2 + diag)


def _scalar_bump_grad(bump: Bump) -> Callable[[float, float], tuple[float, float]]:
    c1, c2 = bump.center
    s2 = bump.sigma * bump.sigma
    eps = bump.eps

    def grad(y1: float, y2: float) -> tuple[float, float]:
        d1 = y1 - c1
        d2 = y2 - c2
        w = (d1 * d1 + d2 * d2) / s2 - 1.0
        if w >= 0.0:
            return 0.0, 0.0
        gu = -eps * math.exp(1.0 / w) / (w * w) * 2.0 / s2
        return gu * d1, gu * d2

    return grad


@dataclass(frozen=True)
class GeneratingFamily:
    """One of the model families, optionally with a compact bump added."""

    kind: FamilyKind
    base: FamilyKind | None = None
    bump: Bump | None = None

    def __post_init__(self) -> None:
        if self.kind is FamilyKind.BUMP:
            if self.base is None or self.base is FamilyKind.BUMP or self.bump is None:
                raise ValueError("a bump family needs a closed-form base kind and bump parameters")
        elif self.bump is not None:
            raise ValueError(f"family {self.kind.value} does not take bump parameters")

    @classmethod
    def bumped(cls, base: FamilyKind, center: tuple[float, float], sigma: float, eps: float) -> GeneratingFamily:
        return cls(FamilyKind.BUMP, base, Bump((float(center[0]), float(center[1])), float(sigma), float(eps)))

    @property
    def core(self) -> FamilyKind:
        """The closed-form kind underlying this family."""
        return self.base if self.kind is FamilyKind.BUMP else self.kind

    @property
    def name(self) -> str:
        if self.kind is FamilyKind.BUMP:
            return f"bump[{self.core.value}]"
        return self.kind.value

    def potential(self, y1, y2):
        val = _POLY[self.core][0](y1, y2)
        if self.bump is not None:
            val = val + _bump_terms(self.bump, y1, y2, 0)
        return val

    def gradient(self, y1, y2):
        g1, g2 = _POLY[self.core][1](y1, y2)
        if self.bump is not None:
            terms = _scalar_bump_terms if type(y1) is float and type(y2) is float else _bump_terms
            _, b1, b2 = terms(self.bump, y1, y2, 1)
            g1, g2 = g1 + b1, g2 + b2
        return g1, g2

    def hessian(self, y1, y2):
        """Return ``(f11, f12, f22)``."""
        h11, h12, h22 = _POLY[self.core][2](y1, y2)
        if self.bump is not None:
            terms = _scalar_bump_terms if type(y1) is float and type(y2) is float else _bump_terms
            _, _, (b11, b12, b22) = terms(self.bump, y1, y2, 2)
            h11, h12, h22 = h11 + b11, h12 + b12, h22 + b22
        return h11, h12, h22

    def hess_det(self, y1, y2):
        h11, h12, h22 = self.hessian(y1, y2)
        return h11 * h22 - h12 * h12

    def rhs(self, x: ParameterPoint | tuple[float, float]) -> Callable[[float, float], tuple[float, float]]:
        """Fast scalar closure ``(y1, y2) -> (v1, v2)`` for the integrator."""
        x1, x2 = _xy(x)
        core = self.core
        if core is FamilyKind.FOLD:
            def poly(y1, y2):
                return y1 * y1 - x1, y2 - x2
        elif core is FamilyKind.CUSP:
            def poly(y1, y2):
                return y1 * y1 * y1 + 2.0 * y1 * y2 - x1, y1 * y1 + y2 - x2
        elif core is FamilyKind.ELLIPTIC:
            def poly(y1, y2):
                return y1 * y1 - y2 * y2 - x1, -2.0 * y1 * y2 - x2
        else:
            def poly(y1, y2):
                return y1 * y1 - y2 * y2 + y1 - x1, y2 - 2.0 * y1 * y2 - x2
        if self.bump is None:
            return poly
        bgrad = _scalar_bump_grad(self.bump)

        def bumped(y1, y2):
            p1, p2 = poly(y1, y2)
            b1, b2 = bgrad(y1, y2)
            return p1 + b1, p2 + b2

        return bumped


def _xy(p) -> tuple[float, float]:
    if isinstance(p, (ParameterPoint,)):
        return p.x1, p.x2
    if isinstance(p, PhasePoint):
        return p.y1, p.y2
    return float(p[0]), float(p[1])


def eval_f(family: GeneratingFamily, y: PhasePoint | tuple[float, float]) -> float:
    y1, y2 = _xy(y)
    return float(family.potential(y1, y2))


def eval_field(family: GeneratingFamily, x: ParameterPoint | tuple[float, float],
               y: PhasePoint | tuple[float, float]) -> FieldValue:
    x1, x2 = _xy(x)
    y1, y2 = _xy(y)
    g1, g2 = family.gradient(y1, y2)
    return FieldValue(float(g1) - x1, float(g2) - x2)


def eval_jacobian(family: GeneratingFamily, x: ParameterPoint | tuple[float, float] | None,
                  y: PhasePoint | tuple[float, float]) -> np.ndarray:
    """Jacobian of the field at ``y``; it does not depend on ``x``."""
    y1, y2 = _xy(y)
    h11, h12, h22 = family.hessian(y1, y2)
    return np.array([[float(h11), float(h12)], [float(h12), float(h22)]])


def polar_field(x: ParameterPoint | tuple[float, float], y_polar: tuple[float, float]) -> tuple[float, float]:
    """``(drho/dt, dtheta/dt)`` of the elliptic flow in polar coordinates.

    With ``x = r e^{i alpha}``:
    ``rho' = rho^2 cos 3theta - r cos(theta - alpha)`` and
    ``theta' = -rho sin 3theta + (r/rho) sin(theta - alpha)``.
    """
    rho, theta = float(y_polar[0]), float(y_polar[1])
    if not rho > 0.0:
        raise ValueError("polar angle is undefined at rho = 0")
    x1, x2 = _xy(x)
    # r cos(theta - alpha) = x1 cos theta + x2 sin theta, r sin(theta - alpha) = x1 sin theta - x2 cos theta
    c, s = math.cos(theta), math.sin(theta)
    rdot = rho * rho * math.cos(3.0 * theta) - (x1 * c + x2 * s)
    tdot = -rho * math.sin(3.0 * theta) + (x1 * s - x2 * c) / rho
    return rdot, tdot


def parse_family(settings: dict[str, str]) -> GeneratingFamily:
    """Build a family from ``family``/``bump.*`` config entries."""
    try:
        kind = FamilyKind(settings.get("family", "").strip().lower())
    except ValueError:
        names = "|".join(k.value for k in FamilyKind)
        raise ValueError(f"family must be one of {names}, got {settings.get('family')!r}") from None
    if kind is not FamilyKind.BUMP:
        return GeneratingFamily(kind)
    try:
        base = FamilyKind(settings.get("bump.base", "elliptic").strip().lower())
    except ValueError:
        raise ValueError(f"bump.base must be a closed-form family, got {settings.get('bump.base')!r}") from None
    center = _parse_pair(settings.get("bump.center", "0,0"), "bump.center")
    sigma = float(settings.get("bump.sigma", "0.2"))
    eps = float(settings.get("bump.eps", "0.01"))
    return GeneratingFamily.bumped(base, center, sigma, eps)


def _parse_pair(text: str, key: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"{key} expects two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])
