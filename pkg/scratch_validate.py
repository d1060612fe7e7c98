"""Scratch: validate the numba collision sweep against a brute-force
reference, then benchmark. Not part of the deliverable."""
import time

import numpy as np

from boltzslab.grid import VelocityGrid, SphereQuadrature, interpolate, maxwellian, reference_maxwellian
from boltzslab.kernel import CrossSectionSpec, TruncatedKernel
from boltzslab.collision import build_context, collide_cell_raw


def brute_raw(f, grid, kernel, quad):
    """Ordered-pair reference sum with the canonical-axis sphere sets."""
    nodes = grid.nodes
    M = grid.size
    dv3 = grid.weight
    Q = np.zeros(M)
    th = quad.theta_nodes
    ang = kernel.angular(th) * np.sin(th) * quad.theta_weights
    caz, saz, azw = np.cos(quad.azimuth_nodes), np.sin(quad.azimuth_nodes), quad.azimuth_weights
    for i in range(M):
        vi = nodes[i]
        acc = 0.0
        for j in range(M):
            if i == j:
                continue
            z = vi - nodes[j]
            r = np.linalg.norm(z)
            if r < kernel.z_min or r > kernel.z_max:
                continue
            # canonical (lexicographically positive) pair axis
            d = z
            if (d[0], d[1], d[2]) < (0.0, 0.0, 0.0) or (
                    d[0] < 0 or (d[0] == 0 and (d[1] < 0 or (d[1] == 0 and d[2] < 0)))):
                d = -z
            khat = d / r
            ref = np.zeros(3)
            ref[np.argmin(np.abs(khat))] = 1.0
            e1 = ref - (ref @ khat) * khat
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(khat, e1)
            m = 0.5 * (vi + nodes[j])
            wb = (r ** kernel.base.gamma) * ang
            for t in range(len(th)):
                if wb[t] <= 0:
                    continue
                ct, st = np.cos(th[t]), np.sin(th[t])
                for p in range(len(caz)):
                    om = ct * khat + st * (caz[p] * e1 + saz[p] * e2)
                    vp = m + 0.5 * r * om
                    vs = m - 0.5 * r * om
                    a = interpolate(f, grid, vp) * interpolate(f, grid, vs)
                    acc += wb[t] * azw[p] * (a - f[i] * f[j])
        Q[i] = acc * dv3
    return Q


def main():
    # small-grid correctness
    grid = VelocityGrid(6, 6.0)
    spec = CrossSectionSpec.inverse_power(5.0, K=1.0)
    ker = TruncatedKernel(spec, 8, damping=False)
    quad = SphereQuadrature.build(ker.theta_min, ker.theta_support, 6, 4)
    ctx = build_context(grid, ker, quad)
    rng = np.random.default_rng(42)
    f = rng.random(grid.size)

    t0 = time.time()
    q_fast = collide_cell_raw(f, ctx)
    print(f"compile+first call: {time.time()-t0:.1f}s")
    q_ref = brute_raw(f, grid, ker, quad)
    scale = np.abs(q_ref).max()
    err = np.abs(q_fast - q_ref).max() / scale
    print(f"6^3 brute-force max rel err: {err:.3e}  (scale {scale:.3e})")

    # benchmark at reference resolution
    grid12 = VelocityGrid(12, 6.0)
    quad16 = SphereQuadrature.build(ker.theta_min, ker.theta_support, 16, 8)
    ctx12 = build_context(grid12, ker, quad16)
    f12 = maxwellian(1.0, (0, 0, 0), 1.0, grid12)
    collide_cell_raw(f12, ctx12)  # warm
    t0 = time.time()
    reps = 3
    for _ in range(reps):
        q12 = collide_cell_raw(f12, ctx12)
    dt = (time.time() - t0) / reps
    terms = ctx12.n_terms
    print(f"12^3 16x8: {dt:.2f}s/cell-eval, {terms/1e6:.1f}M pair-angle terms "
          f"(half-space), {terms/dt/1e6:.0f}M terms/s")

    # criterion-6 magnitude probe: ||Q(M,M)||_1 / ||M||_1 for reference Maxwellian
    from boltzslab.grid import project_conservative
    for K in (1.0, 1/(4*np.pi), 1/(16*np.pi)):
        specK = CrossSectionSpec.inverse_power(5.0, K=K)
        kerK = TruncatedKernel(specK, 8, damping=True)
        rel = {}
        for npa, nth in ((8, 8), (12, 16), (16, 22)):
            g = VelocityGrid(npa, 6.0)
            qd = SphereQuadrature.build(kerK.theta_min, kerK.theta_support, nth, 8)
            cx = build_context(g, kerK, qd)
            Mref = reference_maxwellian(g)
            q = project_conservative(collide_cell_raw(Mref, cx), g)
            damp = 1.0 / (1.0 + Mref.sum() * g.weight / kerK.n)
            rel[npa] = damp * np.abs(q).sum() / Mref.sum()
        print(f"K={K:.4f}: ||Q(M,M)||/||M|| at 8/12/16 = "
              + ", ".join(f"{rel[k]:.3e}" for k in rel))


if __name__ == "__main__":
    main()
