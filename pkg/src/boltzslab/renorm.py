"""Renormalization functions and the three-part decomposition of the
renormalized collision term.

For a concave renormalization beta, the pointwise algebra

    beta'(f) (f'f'_* - f f_*) =
        [f beta'(f) - beta(f)] (f'_* - f_*)                    (R1 integrand)
      + [f'_* beta(f') - f_* beta(f)]                          (R2 integrand)
      - f'_* [beta(f') - beta(f) - beta'(f)(f' - f)]           (R3 bracket)

telescopes exactly (valid for any values at the primed points, interpolated
or not).  The concavity bracket is nonpositive, so the bracket integral
computed here is single-signed <= 0; it enters the reassembled identity with
a minus sign, which is the sign that makes the nonnegative form of the third
part act as a sink.  R1 collapses to a convolution with the cancellation
kernel S, and R2 is only used against test functions, through T(phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import NGROUPS
from .cancellation import TestFunction, s_of
from .collision import CollisionContext, build_context, collide_cell_raw
from .errors import ConfigError, DivergentIntegralError
from .grid import SphereQuadrature, VelocityGrid
from .kernel import TruncatedKernel


@dataclass(frozen=True)
class BetaFunction:
    """beta(f) = log(1 + delta f) / delta: concave, beta(0) = 0, and
    0 < beta'(f) <= C / (1 + f) with C = max(1, 1/delta)."""

    delta: float = 1.0

    def __post_init__(self):
        if self.delta <= 0:
            raise ConfigError("beta family needs delta > 0")

    @property
    def C_bound(self) -> float:
        return max(1.0, 1.0 / self.delta)

    def beta(self, f):
        return np.log1p(self.delta * np.asarray(f, dtype=float)) / self.delta

    def dbeta(self, f):
        return 1.0 / (1.0 + self.delta * np.asarray(f, dtype=float))

    def d2beta(self, f):
        return -self.delta / (1.0 + self.delta * np.asarray(f, dtype=float)) ** 2


class IdentityBeta:
    """beta(f) = f, for the collisionless Green-formula checks."""

    delta = 0.0

    @staticmethod
    def beta(f):
        return np.asarray(f, dtype=float)

    @staticmethod
    def dbeta(f):
        return np.ones_like(np.asarray(f, dtype=float))


@dataclass(frozen=True)
class SignReport:
    n_positive: int
    n_terms: int
    tolerance: float

    def to_dict(self):
        return {"n_positive": self.n_positive, "n_terms": self.n_terms,
                "tolerance": self.tolerance}


_SMAT_CACHE: dict = {}


def s_convolution_matrix(grid: VelocityGrid, kernel: TruncatedKernel) -> np.ndarray:
    """(size, size) matrix of S(|v_i - v_j|); the diagonal is zero (for a
    truncated kernel S vanishes below z_min / sqrt(2) exactly)."""
    key = (grid.n_per_axis, grid.v_max, kernel.base.kind, kernel.base.K,
           kernel.base.s, kernel.base.gamma, kernel.base.sprime,
           kernel.base.theta_support,
           kernel.n if isinstance(kernel, TruncatedKernel) else None)
    mat = _SMAT_CACHE.get(key)
    if mat is not None:
        return mat
    n = grid.n_per_axis
    idx = np.indices((n, n, n)).reshape(3, -1).T
    d = idx[:, None, :] - idx[None, :, :]
    r2int = np.einsum("ijk,ijk->ij", d, d)
    uniq = np.unique(r2int)
    dv = grid.dv
    svals = {}
    for q in uniq:
        if q == 0:
            svals[0] = 0.0
        else:
            svals[int(q)] = s_of(kernel, dv * math.sqrt(float(q)))
    lut = np.zeros(int(uniq.max()) + 1)
    for q, v in svals.items():
        lut[q] = v
    mat = lut[r2int]
    _SMAT_CACHE[key] = mat
    return mat


def compute_R1(f_cell: np.ndarray, beta, kernel: TruncatedKernel,
               grid: VelocityGrid) -> np.ndarray:
    """(f beta'(f) - beta(f)) times the lattice convolution of f with S."""
    f = np.asarray(f_cell, dtype=float)
    try:
        smat = s_convolution_matrix(grid, kernel)
    except DivergentIntegralError as e:
        raise ConfigError(f"kernel inadmissible for the R1 route: {e}") from e
    conv = smat @ f * grid.weight
    return (f * beta.dbeta(f) - beta.beta(f)) * conv


def _t_quadrature(kernel: TruncatedKernel, n_theta: int, n_azimuth: int
                  ) -> SphereQuadrature:
    return SphereQuadrature.build(kernel.theta_min, kernel.theta_support,
                                  n_theta, n_azimuth, rule="gauss")


def compute_R2_weak(f_cell: np.ndarray, beta: BetaFunction,
                    kernel: TruncatedKernel, grid: VelocityGrid,
                    phi: TestFunction, n_theta: int = 16,
                    n_azimuth: int = 8) -> float:
    """Double lattice sum of f(v_*) beta(f(v)) T(phi)(v, v_*) dv^6, with
    T evaluated analytically at the post-collision points (no interpolation)."""
    ctx = build_context(grid, kernel, _t_quadrature(kernel, n_theta, n_azimuth))
    return _r2_weak_on_ctx(f_cell, beta, ctx, phi)


def _r2_weak_on_ctx(f_cell, beta, ctx: CollisionContext, phi: TestFunction
                    ) -> float:
    grid = ctx.grid
    F = np.ascontiguousarray(f_cell, dtype=float)
    kind, pars = phi.numba_code()
    phi_nodal = np.ascontiguousarray(phi(grid.nodes), dtype=float)
    Wpart = np.zeros(NGROUPS)
    _kernels.sweep_phi(F, grid.n_per_axis, ctx.offs, ctx.rr, ctx.tri, ctx.wbth,
                       ctx.costh, ctx.sinth, ctx.cosaz, ctx.sinaz, ctx.azw,
                       grid.dv, grid.weight, float(grid.axis[0]), beta.delta,
                       kind, pars, phi_nodal, Wpart)
    return float(Wpart.sum()) * grid.weight


def compute_R2_direct(f_cell: np.ndarray, beta: BetaFunction,
                      ctx: CollisionContext) -> np.ndarray:
    """Gain/loss form int B (f'_* beta(f') - f_* beta(f)) on the lattice,
    with interpolated primed values; the weak route is its oracle."""
    grid = ctx.grid
    F = np.ascontiguousarray(f_cell, dtype=float)
    Rpart = np.zeros((NGROUPS, grid.size))
    pospart = np.zeros(NGROUPS)
    _kernels.sweep_bracket(F, grid.n_per_axis, ctx.offs, ctx.rr, ctx.tri,
                           ctx.wbth, ctx.costh, ctx.sinth, ctx.cosaz,
                           ctx.sinaz, ctx.azw, grid.dv, grid.weight,
                           beta.delta, 1, Rpart, pospart, 0.0)
    return Rpart.sum(axis=0)


def compute_R3(f_cell: np.ndarray, beta: BetaFunction, ctx: CollisionContext,
               postol: float | None = None):
    """Triple sum of B_n f'_* [beta(f') - beta(f) - beta'(f)(f' - f)].

    Concavity makes every quadrature bracket nonpositive, so the values are
    <= 0; the sign report counts brackets above the tolerance.
    """
    grid = ctx.grid
    F = np.ascontiguousarray(f_cell, dtype=float)
    if postol is None:
        fmax = float(F.max()) if F.size else 0.0
        postol = 1e-12 * max(1.0, float(beta.beta(fmax)))
    Rpart = np.zeros((NGROUPS, grid.size))
    pospart = np.zeros(NGROUPS)
    _kernels.sweep_bracket(F, grid.n_per_axis, ctx.offs, ctx.rr, ctx.tri,
                           ctx.wbth, ctx.costh, ctx.sinth, ctx.cosaz,
                           ctx.sinaz, ctx.azw, grid.dv, grid.weight,
                           beta.delta, 0, Rpart, pospart, postol)
    n_terms = 2 * ctx.n_terms  # both orientations carry a bracket
    report = SignReport(int(pospart.sum()), n_terms, postol)
    return Rpart.sum(axis=0), report


def decomposition_identity_check(f_cell: np.ndarray, beta: BetaFunction,
                                 kernel: TruncatedKernel, grid: VelocityGrid,
                                 phi_battery, n_theta: int = 16,
                                 n_azimuth: int = 8):
    """Residual table of <beta'(f) Q_raw, phi> against the reassembled
    R1 + R2 - R3_bracket for each test function.

    The identity is exact in the continuum; discretely the residual is the
    quadrature mismatch between the direct sphere sums and the S/T routes,
    and it must shrink as the angular resolution is refined.
    """
    quad = SphereQuadrature.build(kernel.theta_min, kernel.theta_support,
                                  n_theta, n_azimuth)
    ctx = build_context(grid, kernel, quad)
    f = np.asarray(f_cell, dtype=float)
    qraw = collide_cell_raw(f, ctx)
    lhs_field = beta.dbeta(f) * qraw
    r1_field = compute_R1(f, beta, kernel, grid)
    r3_field, sign_report = compute_R3(f, beta, ctx)
    tctx = build_context(grid, kernel,
                         _t_quadrature(kernel, n_theta, n_azimuth))
    w = grid.weight
    rows = []
    for phi in phi_battery:
        phi_nodal = phi(grid.nodes)
        lhs = float(lhs_field @ phi_nodal) * w
        r1 = float(r1_field @ phi_nodal) * w
        r3 = float(r3_field @ phi_nodal) * w
        r2 = _r2_weak_on_ctx(f, beta, tctx, phi)
        scale = abs(lhs) + abs(r1) + abs(r2) + abs(r3)
        rows.append({"phi": phi.label, "lhs": lhs, "r1": r1, "r2": r2,
                     "r3": r3, "residual": abs(lhs - (r1 + r2 - r3)),
                     "scale": scale})
    return rows, sign_report
