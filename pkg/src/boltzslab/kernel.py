"""Collision cross-sections, their level-n truncations, and a numeric
checker for the structural assumptions that the long-range theory places on
the kernel.

The parametric family implemented here is

    B(z, omega) = |z|**gamma * b(cos(theta)),
    b(cos(theta)) = K * theta**(-1 - sprime) / sin(theta)   on (0, theta_support],

so that sin(theta) * b(cos(theta)) = K * theta**(-1-sprime) exactly, with
gamma = (s-5)/(s-1) and sprime = 2/(s-1) for an inverse s-power potential.
Hard spheres use B = |z| / (4 pi).  A level-n truncation masks the angle
below 1/n and the relative speed outside [1/n, n**2], which makes every
integral finite while recovering the full singularity as n grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergentIntegralError, InsufficientResolutionError
from .quadrature import (
    QuadratureResult,
    gauss_panels,
    geometric_edges,
    graded_gauss,
    improper_lower,
    is_divergent,
    refine_until,
)

INVERSE_POWER = "inverse-power"
HARD_SPHERE = "hard-sphere"
TABULATED = "tabulated"


@dataclass(frozen=True)
class CrossSectionSpec:
    """Parametric collision kernel with angular and kinetic singularity
    exponents (gamma, sprime)."""

    kind: str
    K: float = 1.0
    s: float | None = None
    gamma: float = 0.0
    sprime: float = 0.0
    theta_support: float = math.pi / 2
    # tabulated kind only: b(theta) samples, interpolated linearly
    theta_table: tuple = field(default=(), repr=False)
    b_table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in (INVERSE_POWER, HARD_SPHERE, TABULATED):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if not (0.0 < self.theta_support <= math.pi):
            raise ConfigError("theta_support must lie in (0, pi]")
        if self.kind == INVERSE_POWER:
            if self.s is None or self.s <= 1.0:
                raise ConfigError("inverse-power kernel needs exponent s > 1")
            object.__setattr__(self, "gamma", (self.s - 5.0) / (self.s - 1.0))
            object.__setattr__(self, "sprime", 2.0 / (self.s - 1.0))
        if self.kind == HARD_SPHERE:
            object.__setattr__(self, "gamma", 1.0)
            object.__setattr__(self, "sprime", 0.0)
        if self.kind == TABULATED:
            if len(self.theta_table) < 2 or len(self.theta_table) != len(self.b_table):
                raise ConfigError("tabulated kernel needs matching theta/b samples")
            object.__setattr__(self, "theta_table", tuple(float(t) for t in self.theta_table))
            object.__setattr__(self, "b_table", tuple(float(b) for b in self.b_table))
        if self.K < 0:
            raise ConfigError("angular amplitude K must be nonnegative")

    @staticmethod
    def inverse_power(s: float, K: float = 1.0, theta_support: float = math.pi / 2):
        return CrossSectionSpec(kind=INVERSE_POWER, s=s, K=K, theta_support=theta_support)

    @staticmethod
    def hard_sphere(theta_support: float = math.pi / 2):
        return CrossSectionSpec(kind=HARD_SPHERE)._replace_support(theta_support)

    def _replace_support(self, theta_support):
        object.__setattr__(self, "theta_support", float(theta_support))
        return self

    @property
    def is_admissible(self) -> bool:
        """Parameter window gamma >= -3, 0 <= sprime < 2, sprime + gamma < 2."""
        return (self.gamma >= -3.0 and 0.0 <= self.sprime < 2.0
                and self.sprime + self.gamma < 2.0)

    # angular factor b(cos theta), vectorized over theta
    def angular(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        inside = (theta > 0.0) & (theta <= self.theta_support)
        if self.kind == INVERSE_POWER:
            t = theta[inside]
            out[inside] = self.K * t ** (-1.0 - self.sprime) / np.sin(t)
        elif self.kind == HARD_SPHERE:
            out[inside] = 1.0 / (4.0 * math.pi)
        else:
            tt = np.asarray(self.theta_table)
            if theta[inside].size and theta[inside].min() < tt[0]:
                raise InsufficientResolutionError(
                    f"tabulated kernel has no samples below theta={tt[0]:.3g}")
            out[inside] = np.interp(theta[inside], tt, np.asarray(self.b_table))
        return out

    def radial(self, z):
        """|z|**gamma factor; hard spheres fold the 1/(4 pi) here instead."""
        z = np.asarray(z, dtype=float)
        if self.kind == HARD_SPHERE:
            return z
        with np.errstate(divide="ignore"):
            return np.where(z > 0, z, 1.0) ** self.gamma * np.where(
                (z == 0) & (self.gamma < 0), np.inf, 1.0) * np.where(
                (z == 0) & (self.gamma > 0), 0.0, 1.0)

    def eval(self, z: float, cos_theta: float) -> float:
        return eval_kernel(self, z, cos_theta)


@dataclass(frozen=True)
class TruncatedKernel:
    """Level-n cutoff of a cross-section: angle below 1/n and relative speed
    outside [1/n, n**2] are masked, leaving a bounded compactly supported
    kernel that is pointwise below the base kernel."""

    base: CrossSectionSpec
    n: int
    damping: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("truncation level n must be a positive integer")

    @property
    def theta_min(self) -> float:
        return 1.0 / self.n

    @property
    def z_min(self) -> float:
        return 1.0 / self.n

    @property
    def z_max(self) -> float:
        return float(self.n) ** 2

    @property
    def theta_support(self) -> float:
        return self.base.theta_support

    @property
    def gamma(self) -> float:
        return self.base.gamma

    @property
    def sprime(self) -> float:
        return self.base.sprime

    def z_window(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return ((z >= self.z_min) & (z <= self.z_max)).astype(float)

    def angular(self, theta):
        theta = np.asarray(theta, dtype=float)
        mask = (theta >= self.theta_min) & (theta <= math.pi)
        return np.where(mask, self.base.angular(np.where(mask, theta, 1.0)), 0.0)

    def eval(self, z: float, cos_theta: float) -> float:
        return eval_truncated(self, z, cos_theta)


def _theta_of(cos_theta: float) -> float:
    if not -1.0 <= cos_theta <= 1.0:
        raise ConfigError(f"cos_theta={cos_theta} outside [-1, 1]")
    return math.acos(cos_theta)


def eval_kernel(spec: CrossSectionSpec, z: float, cos_theta: float) -> float:
    """Pointwise kernel value B(|z|, cos theta).

    Returns +inf at the unmasked singular points (theta = 0 for an untruncated
    singular angular part, z = 0 with gamma < 0); callers must truncate.
    """
    if z < 0:
        raise ConfigError("relative speed must be nonnegative")
    theta = _theta_of(cos_theta)
    if theta > spec.theta_support:
        return 0.0
    if spec.kind == HARD_SPHERE:
        return z / (4.0 * math.pi)
    if theta == 0.0:
        return math.inf if spec.K > 0 else 0.0
    ang = float(spec.angular(theta))
    if z == 0.0:
        if spec.gamma < 0:
            return math.inf if ang > 0 else 0.0
        if spec.gamma > 0:
            return 0.0
        return ang
    return z ** spec.gamma * ang


def eval_truncated(k: TruncatedKernel, z: float, cos_theta: float) -> float:
    """Base kernel masked by the theta and |z| windows; always finite."""
    if z < 0:
        raise ConfigError("relative speed must be nonnegative")
    theta = _theta_of(cos_theta)
    if theta < k.theta_min or z < k.z_min or z > k.z_max:
        return 0.0
    return eval_kernel(k.base, z, cos_theta)


def _theta_bounds(kernel) -> tuple[float, float]:
    if isinstance(kernel, TruncatedKernel):
        return kernel.theta_min, kernel.theta_support
    return 0.0, kernel.theta_support


def _base_of(kernel) -> CrossSectionSpec:
    return kernel.base if isinstance(kernel, TruncatedKernel) else kernel


def angular_moment(kernel, weight, n_panels: int = 16,
                   nodes_per_panel: int = 8) -> QuadratureResult:
    """2 pi * integral of b(cos t) * weight(t) * sin(t) over the kernel's
    theta window, with graded Gauss panels and refinement evidence.

    For an untruncated kernel the window reaches theta = 0 and the improper
    integral is probed by shrinking cutoffs (divergence flagged, not summed).
    """
    lo, hi = _theta_bounds(kernel)
    base = _base_of(kernel)

    def f(t):
        return 2.0 * math.pi * base.angular(t) * weight(t) * np.sin(t)

    if lo >= hi:
        return QuadratureResult(0.0, 0, 0.0, False, (0.0,))
    if lo > 0.0:
        return refine_until(f, lo, hi, n_panels=n_panels,
                            nodes_per_panel=nodes_per_panel)
    return improper_lower(f, hi, n_panels=n_panels, nodes_per_panel=nodes_per_panel)


def moment_M_alpha(kernel, z: float, alpha: float, n_panels: int = 16,
                   nodes_per_panel: int = 8) -> float:
    """Sphere integral of B(z, omega) * (1 - cos theta)**(alpha/2).

    Finite for sprime < 2 when alpha is at least the angular exponent; a
    non-converging refinement sequence raises DivergentIntegralError.
    """
    if z <= 0:
        raise ConfigError("moment_M_alpha needs z > 0")
    if not 0.0 <= alpha <= 2.0:
        raise ConfigError("alpha must lie in [0, 2]")
    if isinstance(kernel, TruncatedKernel):
        if z < kernel.z_min or z > kernel.z_max:
            return 0.0
    res = angular_moment(kernel, lambda t: (1.0 - np.cos(t)) ** (alpha / 2.0))
    if res.divergent:
        raise DivergentIntegralError(
            f"M^alpha(z={z}, alpha={alpha}) diverges", res.history)
    base = _base_of(kernel)
    return float(base.radial(z)) * res.value


def truncated_angular_mass(spec: CrossSectionSpec, n: int,
                           n_panels: int = 16, nodes_per_panel: int = 8) -> float:
    """2 pi * integral of b(cos t) sin t over [1/n, theta_support].

    For the inverse-power family this grows like (2 pi K / sprime) * n**sprime,
    recovering the non-integrable angular singularity as n increases.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    lo = 1.0 / n
    hi = spec.theta_support
    if lo >= hi:
        return 0.0
    x, w = graded_gauss(lo, hi, n_panels, nodes_per_panel)
    return float(np.dot(w, 2.0 * math.pi * spec.angular(x) * np.sin(x)))


@dataclass(frozen=True)
class AssumptionReport:
    """Numeric evidence for the structural kernel assumptions.

    mu0 is the angular cancellation mass (the (1 - cos theta)-weighted sphere
    integral of the angular factor); the borderline split assigns it to the
    |z|**-3 component exactly at gamma = -3, otherwise the whole kernel sits
    in the regular component whose first moment M1 is probed for local
    integrability in z.
    """

    spec: CrossSectionSpec
    borderline_split: str            # "beta0" (gamma == -3) or "B1"
    mu0: QuadratureResult
    m1_local_integrable: bool
    m1_evidence: QuadratureResult
    m_alpha_growth: dict
    angular_divergence: bool
    angular_evidence: QuadratureResult
    grad_cutoff_integrable: bool
    grad_cutoff_mild_growth: bool
    truncation_level: int | None = None

    def to_dict(self) -> dict:
        return {
            "kernel": {
                "kind": self.spec.kind,
                "K": self.spec.K,
                "s": self.spec.s,
                "gamma": self.spec.gamma,
                "sprime": self.spec.sprime,
                "theta_support": self.spec.theta_support,
                "admissible": self.spec.is_admissible,
            },
            "borderline_split": self.borderline_split,
            "mu0": self.mu0.to_dict(),
            "m1_local_integrable": bool(self.m1_local_integrable),
            "m1_evidence": self.m1_evidence.to_dict(),
            "m_alpha_growth": self.m_alpha_growth,
            "angular_divergence": bool(self.angular_divergence),
            "angular_evidence": self.angular_evidence.to_dict(),
            "grad_cutoff": {
                "integrable": bool(self.grad_cutoff_integrable),
                "mild_growth": bool(self.grad_cutoff_mild_growth),
                "truncation_level": self.truncation_level,
            },
        }


def _ball_average_A(kernel, v: float, R: float = 1.0) -> float:
    """integral of A(|z|) over the ball |z - v| <= R, A = sphere mass of B.

    Uses the radial overlap formula for a radial integrand; A(r) = ang * r**gamma
    (windowed for truncated kernels).
    """
    base = _base_of(kernel)
    ang = angular_moment(kernel, lambda t: np.ones_like(t))
    if ang.divergent:
        return math.inf
    lo = max(v - R, 0.0)
    hi = v + R
    if isinstance(kernel, TruncatedKernel):
        lo = max(lo, kernel.z_min)
        hi = min(hi, kernel.z_max)
        if lo >= hi:
            return 0.0
    edges = np.linspace(lo, hi, 33)
    r, w = gauss_panels(edges, 6)
    integrand = base.radial(r) * r * (R ** 2 - (v - r) ** 2)
    return float(ang.value * math.pi / v * np.dot(w, integrand))


def check_assumptions(spec: CrossSectionSpec, n: int | None = None) -> AssumptionReport:
    """Fill an AssumptionReport for a cross-section.

    The Grad-cutoff booleans are evaluated for the level-n truncation when n
    is given (they then hold trivially, and the numbers confirm it); without
    n they refer to the untruncated kernel.
    """
    borderline = "beta0" if spec.gamma == -3.0 else "B1"

    mu0 = angular_moment(spec, lambda t: 1.0 - np.cos(t))

    # M1(|z|) = mu0_angular * |z|**gamma on the regular component; local
    # integrability in z is a radial refinement study near r = 0.
    if borderline == "beta0":
        m1_ev = QuadratureResult(0.0, 0, 0.0, False, (0.0,))
        m1_ok = True
    else:
        if mu0.divergent:
            m1_ev = mu0
            m1_ok = False
        else:
            g = spec.gamma

            def radial(r):
                return mu0.value * r ** (g + 2.0)

            m1_ev = improper_lower(radial, 1.0)
            m1_ok = not m1_ev.divergent

    alphas = (0.0, 1.0, 2.0)
    radii = (10.0, 31.6, 100.0)
    growth: dict = {}
    for a in alphas:
        row = {"alpha": a, "radii": list(radii), "ratios": [], "divergent": False}
        ker = TruncatedKernel(spec, n, damping=False) if n else spec
        for z in radii:
            try:
                m = moment_M_alpha(ker, z, a)
                row["ratios"].append(m / z ** (2.0 - a))
            except DivergentIntegralError:
                row["divergent"] = True
                row["ratios"].append(None)
        vals = [r for r in row["ratios"] if r is not None]
        row["nonincreasing"] = all(x >= y - 1e-12 for x, y in zip(vals, vals[1:]))
        growth[str(a)] = row

    ang = angular_moment(spec, lambda t: np.ones_like(t))
    if spec.kind == TABULATED and spec.theta_table[0] > 1e-6:
        raise InsufficientResolutionError(
            "tabulated kernel lacks small-angle samples; cannot probe the "
            "angular singularity")
    angular_divergent = ang.divergent

    # Grad conditions: the sphere mass A(z) locally integrable in z, plus the
    # mild-growth condition (1+|v|^2)^-1 * ball-average of A -> 0.
    ker = TruncatedKernel(spec, n, damping=False) if n else spec
    if angular_divergent and n is None:
        integrable = False
        mild = False
    else:
        integrable = spec.gamma > -3.0 or n is not None
        probes = [10.0, 30.0, 100.0]
        seq = [_ball_average_A(ker, v) / (1.0 + v * v) for v in probes]
        mild = all(x >= y - 1e-14 for x, y in zip(seq, seq[1:])) and seq[-1] <= seq[0]

    return AssumptionReport(
        spec=spec,
        borderline_split=borderline,
        mu0=mu0,
        m1_local_integrable=m1_ok,
        m1_evidence=m1_ev,
        m_alpha_growth=growth,
        angular_divergence=angular_divergent,
        angular_evidence=ang,
        grad_cutoff_integrable=integrable,
        grad_cutoff_mild_growth=mild,
        truncation_level=n,
    )
