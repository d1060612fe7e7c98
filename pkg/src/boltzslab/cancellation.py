"""Symmetry-induced cancellation kernels of the renormalized formulation.

The gain-loss difference integrated over post-collision velocities collapses
to a convolution with

    S(|z|) = 2 pi * int_0^{theta_support} sin(t) *
             [ cos(t/2)^-3 * B(|z| / cos(t/2), cos t) - B(|z|, cos t) ] dt,

where the dilated argument and the cos^-3 Jacobian come from the change of
variables in dimension 3 (the azimuth contributes the constant 2 pi).  The
bracket vanishes like t^2 as t -> 0, which cancels the angular singularity
for sprime < 2.  The companion weak-form kernel is

    T(phi)(v, v_*) = int_{S^2} B(|v - v_*|, cos t) (phi(v') - phi(v)) domega,

with v' = (v + v_*)/2 + (|v - v_*|/2) omega and the azimuth handled by a
uniform 8-point rule (exact for azimuth-independent integrands).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DivergentIntegralError
from .kernel import CrossSectionSpec, TruncatedKernel, INVERSE_POWER, HARD_SPHERE
from .quadrature import (QuadratureResult, gauss_panels, geometric_edges,
                         is_divergent)


def _kernel_values(kernel, z, theta):
    """Vectorized masked B(z, cos theta) over matching arrays."""
    z = np.asarray(z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    base = kernel.base if isinstance(kernel, TruncatedKernel) else kernel
    vals = np.where(z > 0, z, 1.0) ** base.gamma * base.angular(theta)
    vals = np.where(z > 0, vals, 0.0)
    if isinstance(kernel, TruncatedKernel):
        vals = vals * kernel.z_window(z)
        vals = np.where(theta >= kernel.theta_min, vals, 0.0)
    return vals


def _s_integrand(kernel, z: float, theta: np.ndarray) -> np.ndarray:
    base = kernel.base if isinstance(kernel, TruncatedKernel) else kernel
    c2 = np.cos(0.5 * theta)
    if not isinstance(kernel, TruncatedKernel) and base.kind == INVERSE_POWER:
        # stable combined form: the two singular terms share the factor
        # K z^gamma theta^(-1-sprime); their difference is expm1-small.
        em = np.expm1(-(3.0 + base.gamma) * np.log(c2))
        return (2.0 * math.pi * base.K * z ** base.gamma
                * theta ** (-1.0 - base.sprime) * em)
    gain = c2 ** -3 * _kernel_values(kernel, z / c2, theta)
    loss = _kernel_values(kernel, z, theta)
    return 2.0 * math.pi * np.sin(theta) * (gain - loss)


def _s_breakpoints(kernel, z: float) -> list:
    """Angles where the dilated argument crosses the |z| window edges."""
    if not isinstance(kernel, TruncatedKernel):
        return []
    pts = []
    for edge in (kernel.z_min, kernel.z_max):
        c = z / edge
        if math.cos(0.5 * kernel.theta_support) < c < 1.0:
            pts.append(2.0 * math.acos(c))
    return pts


def s_of(kernel, z: float, n_panels: int = 24, nodes_per_panel: int = 8) -> float:
    """Cancellation kernel S(|z|) by graded panel quadrature.

    Divergent refinement (inadmissible untruncated kernels, sprime >= 2)
    raises DivergentIntegralError.
    """
    if z <= 0:
        raise ConfigError("s_of needs z > 0")
    if isinstance(kernel, TruncatedKernel):
        lo = kernel.theta_min
        hi = kernel.theta_support
        if lo >= hi:
            return 0.0
        edges = geometric_edges(lo, hi, n_panels)
        for bp in _s_breakpoints(kernel, z):
            if lo < bp < hi:
                edges = np.unique(np.concatenate([edges, [bp]]))
        x, w = gauss_panels(edges, nodes_per_panel)
        return float(np.dot(w, _s_integrand(kernel, z, x)))
    # untruncated: improper at theta = 0, refine the floor
    hi = kernel.theta_support
    history = []
    floor = hi / 64.0
    prev = None
    for _ in range(12):
        x, w = gauss_panels(geometric_edges(floor, hi, n_panels), nodes_per_panel)
        val = float(np.dot(w, _s_integrand(kernel, z, x)))
        history.append(val)
        if prev is not None and abs(val - prev) <= 1e-12 * max(abs(val), 1e-300):
            return val
        prev = val
        floor /= 16.0
    if is_divergent(history):
        raise DivergentIntegralError(f"S(|z|={z}) diverges", history)
    return history[-1]


@dataclass(frozen=True)
class SProfile:
    """S(|z|) samples and their |z|^2-normalized growth ratios."""

    radii: tuple
    values: tuple
    growth_ratios: tuple

    def to_dict(self) -> dict:
        return {"radii": list(self.radii), "values": list(self.values),
                "growth_ratios": list(self.growth_ratios)}


def s_profile(kernel, radii) -> SProfile:
    radii = tuple(float(r) for r in radii)
    vals = tuple(s_of(kernel, r) for r in radii)
    ratios = tuple(v / r ** 2 for v, r in zip(vals, radii))
    return SProfile(radii, vals, ratios)


@dataclass(frozen=True)
class TestFunction:
    """Velocity test function with caller-supplied W^{2,inf} norm bound.

    kind/params expose the closed-form families to the compiled sweeps;
    'custom' functions work everywhere a Python callable is acceptable.
    """

    kind: str
    params: tuple
    evaluator: object = field(repr=False)
    w2inf_norm: float = math.nan
    label: str = ""

    @staticmethod
    def constant(c: float = 1.0) -> "TestFunction":
        return TestFunction("const", (c,), lambda v: np.full(np.shape(v)[:-1], c),
                            abs(c), f"const({c})")

    @staticmethod
    def gaussian(amplitude: float, center, sigma: float) -> "TestFunction":
        c = np.asarray(center, dtype=float)
        a, s = float(amplitude), float(sigma)

        def ev(v):
            d = np.asarray(v, dtype=float) - c
            return a * np.exp(-np.sum(d * d, axis=-1) / (2.0 * s * s))

        norm = abs(a) * max(1.0, math.exp(-0.5) / s, 1.0 / (s * s))
        return TestFunction("gaussian", (a, c[0], c[1], c[2], s), ev, norm,
                            f"gaussian(a={a}, sigma={s})")

    @staticmethod
    def bump(center, radius: float) -> "TestFunction":
        c = np.asarray(center, dtype=float)
        R = float(radius)

        def ev(v):
            d = np.asarray(v, dtype=float) - c
            u = 1.0 - np.sum(d * d, axis=-1) / (R * R)
            return np.where(u > 0.0, u * u, 0.0)

        norm = max(1.0, 8.0 / (3.0 * math.sqrt(3.0) * R), 8.0 / (R * R))
        return TestFunction("bump", (c[0], c[1], c[2], R), ev, norm,
                            f"bump(R={R})")

    @staticmethod
    def affine(a: float, b) -> "TestFunction":
        b = np.asarray(b, dtype=float)

        def ev(v):
            return a + np.asarray(v, dtype=float) @ b

        return TestFunction("affine", (a, b[0], b[1], b[2]), ev, math.nan,
                            "affine")

    @staticmethod
    def custom(fn, w2inf_norm: float, label: str = "custom") -> "TestFunction":
        return TestFunction("custom", (), fn, float(w2inf_norm), label)

    def __call__(self, v):
        return self.evaluator(v)

    def numba_code(self):
        from . import _kernels
        codes = {"const": _kernels.PHI_CONST, "gaussian": _kernels.PHI_GAUSSIAN,
                 "bump": _kernels.PHI_BUMP, "affine": _kernels.PHI_AFFINE}
        if self.kind not in codes:
            raise ConfigError(f"test function kind {self.kind!r} has no "
                              "compiled form")
        return codes[self.kind], np.asarray(self.params, dtype=float)


def _triad(khat: np.ndarray):
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(khat)))] = 1.0
    e1 = ref - (ref @ khat) * khat
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(khat, e1)


def _theta_rule(kernel, n_theta: int, nodes_per_panel: int):
    if isinstance(kernel, TruncatedKernel):
        lo, hi = kernel.theta_min, kernel.theta_support
        if lo >= hi:
            return np.empty(0), np.empty(0)
    else:
        hi = kernel.theta_support
        lo = hi * 1e-8
    return gauss_panels(geometric_edges(lo, hi, n_theta), nodes_per_panel)


def t_of(kernel, phi: TestFunction, v, v_star, n_theta: int = 16,
         n_azimuth: int = 8, nodes_per_panel: int = 4) -> float:
    """Weak-form kernel T(phi) at one velocity pair, azimuth averaged.

    Defined by continuity as 0 when v = v_*.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    z = v - v_star
    r = float(np.linalg.norm(z))
    if r == 0.0:
        return 0.0
    th, tw = _theta_rule(kernel, n_theta, nodes_per_panel)
    if len(th) == 0:
        return 0.0
    bsin = _kernel_values(kernel, np.full_like(th, r), th) * np.sin(th)
    khat = z / r
    e1, e2 = _triad(khat)
    az = (np.arange(n_azimuth) + 0.5) * (2.0 * math.pi / n_azimuth)
    azw = 2.0 * math.pi / n_azimuth
    m = 0.5 * (v + v_star)
    ct, st = np.cos(th), np.sin(th)
    # omega over the (theta, azimuth) product grid
    om = (ct[:, None, None] * khat[None, None, :]
          + st[:, None, None] * (np.cos(az)[None, :, None] * e1[None, None, :]
                                 + np.sin(az)[None, :, None] * e2[None, None, :]))
    vp = m[None, None, :] + 0.5 * r * om
    dphi = phi(vp) - float(phi(v[None, :]))
    return float(np.einsum("t,tp->", tw * bsin, dphi) * azw)


@dataclass(frozen=True)
class TBoundReport:
    constant: float
    violations: int
    n_pairs: int
    n_functions: int
    rows: tuple = ()

    def to_dict(self) -> dict:
        return {"constant": self.constant, "violations": self.violations,
                "n_pairs": self.n_pairs, "n_functions": self.n_functions}


def verify_t_bound(kernel, phi_battery, n_pairs: int = 100, seed: int = 2024,
                   pair_scale: float = 1.5, n_theta: int = 16,
                   n_azimuth: int = 8, keep_rows: bool = False) -> TBoundReport:
    """Fit the smallest C with |T(phi)| <= C ||phi|| |z| (1 + |z|) M2(|z|)
    over a battery x pair sample; the violation count (pairs admitting no
    finite C) must be zero.
    """
    from .kernel import moment_M_alpha

    if not phi_battery:
        raise ConfigError("verify_t_bound needs a nonempty battery")
    rng = np.random.default_rng(seed)
    pairs = rng.normal(0.0, pair_scale, size=(n_pairs, 2, 3))
    cbest = 0.0
    violations = 0
    rows = []
    m2_cache: dict = {}
    for (v, vs) in pairs:
        r = float(np.linalg.norm(v - vs))
        if r == 0.0:
            continue
        key = round(r, 12)
        m2 = m2_cache.get(key)
        if m2 is None:
            m2 = moment_M_alpha(kernel, r, 2.0)
            m2_cache[key] = m2
        for phi in phi_battery:
            tval = t_of(kernel, phi, v, vs, n_theta=n_theta, n_azimuth=n_azimuth)
            denom = phi.w2inf_norm * r * (1.0 + r) * m2
            if denom == 0.0:
                if abs(tval) > 1e-10 * max(1.0, phi.w2inf_norm):
                    raise DataError(
                        "T(phi) nonzero where the M2 bound vanishes: "
                        "quadrature windows are inconsistent")
                ratio = 0.0
            else:
                ratio = abs(tval) / denom
                if not np.isfinite(ratio):
                    violations += 1
            cbest = max(cbest, ratio)
            if keep_rows:
                rows.append((r, phi.label, tval, denom, ratio))
    return TBoundReport(cbest, violations, n_pairs, len(phi_battery),
                        tuple(rows))


def s_local_integrability(kernel, r_max: float, n_radial0: int = 16,
                          levels: int = 4) -> QuadratureResult:
    """Refinement study of int_0^{r_max} |S(r)| r^2 dr on doubling radial
    midpoint meshes; the converged flag follows the divergence rule."""
    if r_max <= 0:
        raise ConfigError("s_local_integrability needs r_max > 0")
    history = []
    n = n_radial0
    for _ in range(levels):
        r = (np.arange(n) + 0.5) * (r_max / n)
        vals = np.array([abs(s_of(kernel, ri)) * ri * ri for ri in r])
        history.append(float(vals.sum() * (r_max / n)))
        n *= 2
    delta = abs(history[-1] - history[-2])
    return QuadratureResult(history[-1], n // 2, delta,
                            is_divergent(history), tuple(history))


def default_battery(v_max: float = 6.0) -> list:
    """Five Gaussians and five bump windows spanning the lattice scales."""
    out = []
    centers = [(0, 0, 0), (1, 0.5, -0.5), (-1.5, 1, 0), (0.5, -1, 1.5), (2, 0, 0)]
    sigmas = [1.0, 0.7, 1.5, 2.0, 1.2]
    for c, s in zip(centers, sigmas):
        out.append(TestFunction.gaussian(1.0, c, s))
    radii = [2.0, 3.0, 4.0, v_max, 2.5]
    for c, r in zip(centers, radii):
        out.append(TestFunction.bump(c, r))
    return out
