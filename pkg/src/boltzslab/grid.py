"""Phase-space discretization shared by all numerics.

Velocity space is a cell-centered cubic lattice symmetric under v -> -v
(no zero node for even counts, which also keeps the grazing set v1 = 0 off
the lattice).  Physical space is a 1-D slab of finite-volume cells with the
two boundary faces at x = 0 (outward normal -e1) and x = L (+e1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .quadrature import geometric_edges, midpoint_panels, gauss_panels, uniform_edges


@dataclass(frozen=True)
class VelocityGrid:
    n_per_axis: int = 12
    v_max: float = 6.0

    def __post_init__(self):
        if self.n_per_axis < 2:
            raise ConfigError("velocity grid needs at least 2 nodes per axis")
        if self.v_max <= 0:
            raise ConfigError("v_max must be positive")

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / self.n_per_axis

    @property
    def weight(self) -> float:
        return self.dv ** 3

    @property
    def size(self) -> int:
        return self.n_per_axis ** 3

    @property
    def axis(self) -> np.ndarray:
        n = self.n_per_axis
        return -self.v_max + (np.arange(n) + 0.5) * self.dv

    @property
    def nodes(self) -> np.ndarray:
        """(size, 3) array of node velocities, flat index ix*N^2 + iy*N + iz."""
        a = self.axis
        vx, vy, vz = np.meshgrid(a, a, a, indexing="ij")
        return np.stack([vx.ravel(), vy.ravel(), vz.ravel()], axis=1)

    @property
    def speeds_sq(self) -> np.ndarray:
        nd = self.nodes
        return np.einsum("ij,ij->i", nd, nd)

    def invariant_basis(self) -> np.ndarray:
        """Orthonormalized collision invariants {1, v1, v2, v3, |v|^2}."""
        nd = self.nodes
        psi = np.column_stack([np.ones(len(nd)), nd[:, 0], nd[:, 1], nd[:, 2],
                               self.speeds_sq])
        q, r = np.linalg.qr(psi)
        if np.min(np.abs(np.diag(r))) < 1e-10 * np.max(np.abs(np.diag(r))):
            raise ConfigError("collision invariants are degenerate on this grid")
        return q


@dataclass(frozen=True)
class SlabMesh:
    length: float = 16.0
    n_cells: int = 16

    def __post_init__(self):
        if self.length <= 0 or self.n_cells < 1:
            raise ConfigError("slab mesh needs positive length and >= 1 cell")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class SphereQuadrature:
    """Deviation-angle nodes on a graded mesh of [theta_min, theta_support]
    plus uniform azimuth nodes whose weights sum to 2 pi.

    The default per-panel rule is the midpoint rule; 'gauss' upgrades each
    panel to a small Gauss rule for the high-accuracy oracles.
    """

    theta_nodes: np.ndarray
    theta_weights: np.ndarray      # plain d-theta weights; sin(theta) not folded
    azimuth_nodes: np.ndarray
    azimuth_weights: np.ndarray

    @staticmethod
    def build(theta_min: float, theta_support: float, n_theta: int = 16,
              n_azimuth: int = 8, rule: str = "midpoint",
              grading: str = "geometric") -> "SphereQuadrature":
        if theta_min <= 0 or theta_min >= theta_support:
            raise ConfigError("sphere quadrature needs 0 < theta_min < theta_support")
        if grading == "geometric":
            edges = geometric_edges(theta_min, theta_support, n_theta)
        else:
            edges = uniform_edges(theta_min, theta_support, n_theta)
        if rule == "midpoint":
            tn, tw = midpoint_panels(edges)
        elif rule == "gauss":
            tn, tw = gauss_panels(edges, 4)
        else:
            raise ConfigError(f"unknown sphere rule {rule!r}")
        az = (np.arange(n_azimuth) + 0.5) * (2.0 * math.pi / n_azimuth)
        aw = np.full(n_azimuth, 2.0 * math.pi / n_azimuth)
        return SphereQuadrature(tn, tw, az, aw)

    @property
    def n_points(self) -> int:
        return len(self.theta_nodes) * len(self.azimuth_nodes)


class DistributionField:
    """Nonnegative number density on (slab cell) x (velocity lattice)."""

    def __init__(self, grid: VelocityGrid, mesh: SlabMesh, values=None,
                 time: float = 0.0):
        self.grid = grid
        self.mesh = mesh
        if values is None:
            values = np.zeros((mesh.n_cells, grid.size))
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_cells, grid.size):
            raise ConfigError(f"field shape {values.shape} does not match "
                              f"({mesh.n_cells}, {grid.size})")
        self.values = values
        self.time = float(time)

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.mesh, self.values.copy(), self.time)

    def check_finite(self):
        if not np.all(np.isfinite(self.values)):
            from .errors import DataError
            raise DataError("distribution field contains NaN/Inf")

    def total_moments(self):
        """(mass, momentum, energy, entropy) integrated over the slab."""
        m = p = e = s = 0.0
        p = np.zeros(3)
        for c in range(self.mesh.n_cells):
            mm, pp, ee, ss = moments(self.values[c], self.grid)
            m += mm
            p = p + pp
            e += ee
            s += ss
        dx = self.mesh.dx
        return m * dx, p * dx, e * dx, s * dx


def xlogx(z: np.ndarray) -> np.ndarray:
    """z * log(z) with the limit convention 0 log 0 = 0."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = z[pos] * np.log(z[pos])
    return out


def h_entropy(z: np.ndarray) -> np.ndarray:
    """h(z) = z log z - z + 1, the nonnegative relative-entropy density."""
    return xlogx(z) - np.asarray(z, dtype=float) + 1.0


def moments(f_cell: np.ndarray, grid: VelocityGrid):
    """Discrete (mass, momentum, energy, entropy) of one cell's density.

    Energy is the plain second moment (no 1/2) to match the ledger forms;
    entropy is the integral of f log f with 0 log 0 = 0.
    """
    f = np.asarray(f_cell, dtype=float)
    w = grid.weight
    nd = grid.nodes
    mass = float(f.sum()) * w
    mom = nd.T @ f * w
    energy = float(grid.speeds_sq @ f) * w
    entropy = float(xlogx(f).sum()) * w
    return mass, mom, energy, entropy


def maxwellian(rho: float, u, T: float, grid: VelocityGrid) -> np.ndarray:
    """Nodal rho * (2 pi T)^{-3/2} exp(-|v-u|^2 / 2T)."""
    if T <= 0:
        raise ConfigError("maxwellian needs temperature T > 0")
    if rho < 0:
        raise ConfigError("maxwellian needs density rho >= 0")
    u = np.asarray(u, dtype=float).reshape(3)
    d = grid.nodes - u[None, :]
    r2 = np.einsum("ij,ij->i", d, d)
    return rho * (2.0 * math.pi * T) ** -1.5 * np.exp(-r2 / (2.0 * T))


def reference_maxwellian(grid: VelocityGrid) -> np.ndarray:
    """The global equilibrium weight (2 pi)^{-3} exp(-|v|^2 / 2) used by all
    relative-entropy ledgers."""
    return (2.0 * math.pi) ** -3 * np.exp(-0.5 * grid.speeds_sq)


def interpolate(f_cell: np.ndarray, grid: VelocityGrid, v) -> np.ndarray:
    """Trilinear interpolation of nodal values at off-grid velocities.

    Returns 0 outside the lattice hull; inside, the value is a convex
    combination of the 8 surrounding nodes (so nonnegativity is preserved).
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = grid.n_per_axis
    f3 = np.asarray(f_cell, dtype=float).reshape(n, n, n)
    xi = (v + grid.v_max) / grid.dv - 0.5
    inside = np.all((xi >= 0.0) & (xi <= n - 1.0), axis=1)
    out = np.zeros(len(v))
    if not inside.any():
        return out if v.shape[0] > 1 else out[0]
    x = xi[inside]
    base = np.minimum(np.floor(x).astype(int), n - 2)
    t = x - base
    val = np.zeros(len(x))
    for cx in (0, 1):
        wx = t[:, 0] if cx else 1.0 - t[:, 0]
        for cy in (0, 1):
            wy = t[:, 1] if cy else 1.0 - t[:, 1]
            for cz in (0, 1):
                wz = t[:, 2] if cz else 1.0 - t[:, 2]
                val += wx * wy * wz * f3[base[:, 0] + cx, base[:, 1] + cy,
                                         base[:, 2] + cz]
    out[inside] = np.maximum(val, 0.0)
    return out if len(out) > 1 else out[0]


def project_conservative(q_values: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Remove the discrete-L2 projection onto span{1, v, |v|^2}.

    The output has exactly zero discrete mass, momentum and energy moments
    (to roundoff); applied to an already-orthogonal input it is the identity.
    """
    basis = _cached_basis(grid)
    q = np.asarray(q_values, dtype=float)
    out = q - basis @ (basis.T @ q)
    # one more sweep pushes the moment residual to the roundoff floor
    out = out - basis @ (basis.T @ out)
    return out


_BASIS_CACHE: dict = {}


def _cached_basis(grid: VelocityGrid) -> np.ndarray:
    key = (grid.n_per_axis, grid.v_max)
    b = _BASIS_CACHE.get(key)
    if b is None:
        b = grid.invariant_basis()
        _BASIS_CACHE[key] = b
    return b
