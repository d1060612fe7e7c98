"""Graded 1-D quadrature rules and refinement-based divergence detection.

Angular integrands here behave like theta**(-1-sp) near theta = 0, so all
rules support geometric grading that accumulates panels at the lower
endpoint.  Divergence of an improper integral is decided empirically, by
driving the lower cutoff toward zero and watching the partial integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# An integral is declared divergent when three successive refinements each
# grow by at least this factor.
DIVERGENCE_GROWTH = 1.10
DIVERGENCE_STREAK = 3


@dataclass(frozen=True)
class QuadratureResult:
    """Value of a numeric integral together with its resolution evidence.

    ``refinement_delta`` is the change produced by the last refinement and
    ``history`` the sequence of partial values, so every reported number
    carries the resolution that produced it.
    """

    value: float
    n_nodes: int
    refinement_delta: float
    divergent: bool = False
    history: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "value": None if self.divergent else float(self.value),
            "n_nodes": int(self.n_nodes),
            "refinement_delta": float(self.refinement_delta),
            "divergent": bool(self.divergent),
            "history": [float(v) for v in self.history],
        }


def geometric_edges(a: float, b: float, n_panels: int) -> np.ndarray:
    """Panel edges on [a, b] in geometric progression accumulating at a."""
    if not (0.0 < a < b):
        raise ValueError(f"geometric grading needs 0 < a < b, got [{a}, {b}]")
    k = np.arange(n_panels + 1, dtype=float) / n_panels
    return a * (b / a) ** k


def uniform_edges(a: float, b: float, n_panels: int) -> np.ndarray:
    return np.linspace(a, b, n_panels + 1)


def gauss_panels(edges: np.ndarray, nodes_per_panel: int = 8):
    """Gauss-Legendre nodes/weights on each panel of a partition."""
    x0, w0 = np.polynomial.legendre.leggauss(nodes_per_panel)
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    half = 0.5 * (hi - lo)
    x = (0.5 * (hi + lo) + half * x0[None, :]).ravel()
    w = (half * w0[None, :]).ravel()
    return x, w


def midpoint_panels(edges: np.ndarray):
    """One-point (midpoint) rule per panel."""
    x = 0.5 * (edges[:-1] + edges[1:])
    w = np.diff(edges)
    return x, w


def graded_gauss(a: float, b: float, n_panels: int = 8, nodes_per_panel: int = 8):
    return gauss_panels(geometric_edges(a, b, n_panels), nodes_per_panel)


def is_divergent(history) -> bool:
    """Apply the three-successive-growths rule to a refinement sequence."""
    vals = [abs(v) for v in history]
    streak = 0
    for prev, cur in zip(vals[:-1], vals[1:]):
        if prev > 0 and cur >= DIVERGENCE_GROWTH * prev:
            streak += 1
            if streak >= DIVERGENCE_STREAK:
                return True
        else:
            streak = 0
    return False


def refine_until(f, a: float, b: float, n_panels: int = 8,
                 nodes_per_panel: int = 8, rtol: float = 1e-12,
                 max_level: int = 8) -> QuadratureResult:
    """Integrate f on [a, b] with graded Gauss panels, doubling the panel
    count until the refinement delta stabilizes.  f must accept an ndarray.
    """
    history = []
    prev = None
    n = n_panels
    for _ in range(max_level):
        x, w = graded_gauss(a, b, n, nodes_per_panel)
        val = float(np.dot(w, f(x)))
        history.append(val)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1.0):
            return QuadratureResult(val, n * nodes_per_panel,
                                    abs(val - prev), False, tuple(history))
        prev = val
        n *= 2
    delta = abs(history[-1] - history[-2]) if len(history) > 1 else np.inf
    return QuadratureResult(history[-1], (n // 2) * nodes_per_panel, delta,
                            is_divergent(history), tuple(history))


def improper_lower(f, b: float, floor0: float = 1e-2, shrink: float = 4.0,
                   n_panels: int = 12, nodes_per_panel: int = 8,
                   rtol: float = 1e-10, max_level: int = 14) -> QuadratureResult:
    """Integrate f over (0, b] by driving the lower cutoff toward zero.

    Partial integrals I(floor_k) with floor_k = floor0 / shrink**k form the
    evidence sequence; monotone growth per the divergence rule flags a
    non-integrable singularity at zero.
    """
    history = []
    prev = None
    floor = min(floor0, b / 4.0)
    for _ in range(max_level):
        x, w = graded_gauss(floor, b, n_panels, nodes_per_panel)
        val = float(np.dot(w, f(x)))
        history.append(val)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1.0):
            return QuadratureResult(val, n_panels * nodes_per_panel,
                                    abs(val - prev), False, tuple(history))
        prev = val
        floor /= shrink
        n_panels += 4
    delta = abs(history[-1] - history[-2])
    return QuadratureResult(history[-1], n_panels * nodes_per_panel, delta,
                            is_divergent(history), tuple(history))
