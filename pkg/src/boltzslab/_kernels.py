"""Numba inner loops for the discrete collision quadrature.

All sweeps iterate unordered node pairs through half-space lattice offsets
o = i - j.  The mirrored pair (j, i) is covered by the mirrored angular
quadrature set, under which the post-collision product f'f'_* is unchanged,
so one traversal accumulates both orientations exactly.  Per-(offset, angle)
geometry (kernel value, trilinear stencil bases and weights) is hoisted out
of the innermost loop; because the lattice is uniform the fractional part of
the post-collision coordinates does not depend on the node index.

Determinism: offsets are partitioned into NGROUPS fixed groups by index
modulo NGROUPS; each group owns a private accumulator and groups are summed
in fixed order afterwards, so results are bitwise identical for any thread
count.
"""

import numpy as np
from numba import njit, prange

NGROUPS = 16

U64 = np.uint64
_SPLITMIX_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX_1 = U64(0xBF58476D1CE4E5B9)
_MIX_2 = U64(0x94D049BB133111EB)

PHI_CONST = 0
PHI_GAUSSIAN = 1
PHI_BUMP = 2
PHI_AFFINE = 3


@njit(cache=True, inline="always")
def _splitmix64(z):
    z = (z + _SPLITMIX_GAMMA) & U64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> U64(30))) * _MIX_1
    z = (z ^ (z >> U64(27))) * _MIX_2
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _phi_val(kind, pars, x, y, z):
    if kind == PHI_CONST:
        return pars[0]
    if kind == PHI_GAUSSIAN:
        dx = x - pars[1]
        dy = y - pars[2]
        dz = z - pars[3]
        return pars[0] * np.exp(-(dx * dx + dy * dy + dz * dz)
                                / (2.0 * pars[4] * pars[4]))
    if kind == PHI_BUMP:
        dx = x - pars[0]
        dy = y - pars[1]
        dz = z - pars[2]
        u = 1.0 - (dx * dx + dy * dy + dz * dz) / (pars[3] * pars[3])
        if u <= 0.0:
            return 0.0
        return u * u
    # affine
    return pars[0] + pars[1] * x + pars[2] * y + pars[3] * z


@njit(cache=True, inline="always")
def _beta(f, delta):
    return np.log1p(delta * f) / delta


@njit(cache=True, inline="always")
def _dbeta(f, delta):
    return 1.0 / (1.0 + delta * f)


@njit(cache=True, parallel=True)
def sweep_product(F, N, offs, rr, tri, wbth, costh, sinth, cosaz, sinaz, azw,
                  dv, dv3, want_q, want_diss, Qpart, Dpart):
    """Raw symmetric collision sweep.

    want_q: accumulate Q_raw contributions coeff*(a - b) into Qpart[g] at both
    pair members.  want_diss: accumulate (a - b)*log(a/b) into Dpart[g]
    (terms with a vanishing factor contribute zero by the limit convention).
    """
    NN = N * N
    n_off = offs.shape[0]
    nth = wbth.shape[1]
    naz = cosaz.shape[0]
    inv_dv = 1.0 / dv
    for g in prange(NGROUPS):
        for m in range(g, n_off, NGROUPS):
            ox = offs[m, 0]
            oy = offs[m, 1]
            oz = offs[m, 2]
            r = rr[m]
            kx = ox * dv / r
            ky = oy * dv / r
            kz = oz * dv / r
            e1x = tri[m, 0]
            e1y = tri[m, 1]
            e1z = tri[m, 2]
            e2x = tri[m, 3]
            e2y = tri[m, 4]
            e2z = tri[m, 5]
            jlox = max(0, ox)
            jhix = min(N - 1, N - 1 + ox)
            jloy = max(0, oy)
            jhiy = min(N - 1, N - 1 + oy)
            jloz = max(0, oz)
            jhiz = min(N - 1, N - 1 + oz)
            joff = -(ox * NN + oy * N + oz)
            rdx = r * inv_dv
            for t in range(nth):
                wb = wbth[m, t]
                if wb <= 0.0:
                    continue
                ct = costh[t]
                st = sinth[t]
                for p in range(naz):
                    coeff = wb * azw[p] * dv3
                    wxx = ct * kx + st * (cosaz[p] * e1x + sinaz[p] * e2x)
                    wyy = ct * ky + st * (cosaz[p] * e1y + sinaz[p] * e2y)
                    wzz = ct * kz + st * (cosaz[p] * e1z + sinaz[p] * e2z)
                    upx = 0.5 * (rdx * wxx - ox)
                    upy = 0.5 * (rdx * wyy - oy)
                    upz = 0.5 * (rdx * wzz - oz)
                    usx = -0.5 * (rdx * wxx + ox)
                    usy = -0.5 * (rdx * wyy + oy)
                    usz = -0.5 * (rdx * wzz + oz)
                    bpx = int(np.floor(upx))
                    bpy = int(np.floor(upy))
                    bpz = int(np.floor(upz))
                    bsx = int(np.floor(usx))
                    bsy = int(np.floor(usy))
                    bsz = int(np.floor(usz))
                    tpx = upx - bpx
                    tpy = upy - bpy
                    tpz = upz - bpz
                    tsx = usx - bsx
                    tsy = usy - bsy
                    tsz = usz - bsz
                    # joint validity box: all 16 stencil corners in range
                    glox = max(jlox, -bpx, -bsx)
                    ghix = min(jhix, N - 2 - bpx, N - 2 - bsx)
                    gloy = max(jloy, -bpy, -bsy)
                    ghiy = min(jhiy, N - 2 - bpy, N - 2 - bsy)
                    gloz = max(jloz, -bpz, -bsz)
                    ghiz = min(jhiz, N - 2 - bpz, N - 2 - bsz)
                    # corner weights
                    wp000 = (1 - tpx) * (1 - tpy) * (1 - tpz)
                    wp001 = (1 - tpx) * (1 - tpy) * tpz
                    wp010 = (1 - tpx) * tpy * (1 - tpz)
                    wp011 = (1 - tpx) * tpy * tpz
                    wp100 = tpx * (1 - tpy) * (1 - tpz)
                    wp101 = tpx * (1 - tpy) * tpz
                    wp110 = tpx * tpy * (1 - tpz)
                    wp111 = tpx * tpy * tpz
                    ws000 = (1 - tsx) * (1 - tsy) * (1 - tsz)
                    ws001 = (1 - tsx) * (1 - tsy) * tsz
                    ws010 = (1 - tsx) * tsy * (1 - tsz)
                    ws011 = (1 - tsx) * tsy * tsz
                    ws100 = tsx * (1 - tsy) * (1 - tsz)
                    ws101 = tsx * (1 - tsy) * tsz
                    ws110 = tsx * tsy * (1 - tsz)
                    ws111 = tsx * tsy * tsz
                    cp = (bpx * N + bpy) * N + bpz
                    cs = (bsx * N + bsy) * N + bsz
                    for ix in range(jlox, jhix + 1):
                        gx = glox <= ix <= ghix
                        ibx = ix * NN
                        for iy in range(jloy, jhiy + 1):
                            gxy = gx and (gloy <= iy <= ghiy)
                            ib = ibx + iy * N
                            if gxy and gloz <= ghiz:
                                gz0 = gloz
                                gz1 = ghiz
                            else:
                                gz0 = jhiz + 1
                                gz1 = jhiz
                            for iz in range(jloz, min(gz0, jhiz + 1)):
                                if want_q:
                                    i = ib + iz
                                    d = -coeff * F[i] * F[i + joff]
                                    Qpart[g, i] += d
                                    Qpart[g, i + joff] += d
                            for iz in range(gz0, gz1 + 1):
                                i = ib + iz
                                j = i + joff
                                b = F[i] * F[j]
                                fp = (wp000 * F[i + cp] + wp001 * F[i + cp + 1]
                                      + wp010 * F[i + cp + N] + wp011 * F[i + cp + N + 1]
                                      + wp100 * F[i + cp + NN] + wp101 * F[i + cp + NN + 1]
                                      + wp110 * F[i + cp + NN + N] + wp111 * F[i + cp + NN + N + 1])
                                fs = (ws000 * F[i + cs] + ws001 * F[i + cs + 1]
                                      + ws010 * F[i + cs + N] + ws011 * F[i + cs + N + 1]
                                      + ws100 * F[i + cs + NN] + ws101 * F[i + cs + NN + 1]
                                      + ws110 * F[i + cs + NN + N] + ws111 * F[i + cs + NN + N + 1])
                                if fp < 0.0:
                                    fp = 0.0
                                if fs < 0.0:
                                    fs = 0.0
                                a = fp * fs
                                if want_q:
                                    d = coeff * (a - b)
                                    Qpart[g, i] += d
                                    Qpart[g, j] += d
                                if want_diss and a > 1e-300 and b > 1e-300:
                                    Dpart[g] += coeff * (a - b) * (np.log(a) - np.log(b))
                            for iz in range(max(gz1 + 1, jloz), jhiz + 1):
                                if want_q:
                                    i = ib + iz
                                    d = -coeff * F[i] * F[i + joff]
                                    Qpart[g, i] += d
                                    Qpart[g, i + joff] += d


@njit(cache=True, parallel=True)
def sweep_bracket(F, N, offs, rr, tri, wbth, costh, sinth, cosaz, sinaz, azw,
                  dv, dv3, delta, mode_r2, Rpart, pospart, postol):
    """Concavity-bracket sweep.

    mode_r2 == 0: accumulate B * f'_* * [beta(f') - beta(f) - beta'(f)(f'-f)]
    at both pair orientations (the two primed values swap roles), counting
    quadrature terms whose bracket exceeds postol.
    mode_r2 == 1: accumulate the direct gain/loss form of the renormalized
    mixed term, B * (f'_* beta(f') - f_* beta(f)).
    Out-of-hull primed evaluations contribute the value 0, matching the
    interpolation convention.
    """
    NN = N * N
    n_off = offs.shape[0]
    nth = wbth.shape[1]
    naz = cosaz.shape[0]
    inv_dv = 1.0 / dv
    for g in prange(NGROUPS):
        for m in range(g, n_off, NGROUPS):
            ox = offs[m, 0]
            oy = offs[m, 1]
            oz = offs[m, 2]
            r = rr[m]
            kx = ox * dv / r
            ky = oy * dv / r
            kz = oz * dv / r
            e1x = tri[m, 0]
            e1y = tri[m, 1]
            e1z = tri[m, 2]
            e2x = tri[m, 3]
            e2y = tri[m, 4]
            e2z = tri[m, 5]
            jlox = max(0, ox)
            jhix = min(N - 1, N - 1 + ox)
            jloy = max(0, oy)
            jhiy = min(N - 1, N - 1 + oy)
            jloz = max(0, oz)
            jhiz = min(N - 1, N - 1 + oz)
            joff = -(ox * NN + oy * N + oz)
            rdx = r * inv_dv
            for t in range(nth):
                wb = wbth[m, t]
                if wb <= 0.0:
                    continue
                ct = costh[t]
                st = sinth[t]
                for p in range(naz):
                    coeff = wb * azw[p] * dv3
                    wxx = ct * kx + st * (cosaz[p] * e1x + sinaz[p] * e2x)
                    wyy = ct * ky + st * (cosaz[p] * e1y + sinaz[p] * e2y)
                    wzz = ct * kz + st * (cosaz[p] * e1z + sinaz[p] * e2z)
                    upx = 0.5 * (rdx * wxx - ox)
                    upy = 0.5 * (rdx * wyy - oy)
                    upz = 0.5 * (rdx * wzz - oz)
                    usx = -0.5 * (rdx * wxx + ox)
                    usy = -0.5 * (rdx * wyy + oy)
                    usz = -0.5 * (rdx * wzz + oz)
                    bpx = int(np.floor(upx))
                    bpy = int(np.floor(upy))
                    bpz = int(np.floor(upz))
                    bsx = int(np.floor(usx))
                    bsy = int(np.floor(usy))
                    bsz = int(np.floor(usz))
                    tpx = upx - bpx
                    tpy = upy - bpy
                    tpz = upz - bpz
                    tsx = usx - bsx
                    tsy = usy - bsy
                    tsz = usz - bsz
                    plox = max(jlox, -bpx)
                    phix = min(jhix, N - 2 - bpx)
                    ploy = max(jloy, -bpy)
                    phiy = min(jhiy, N - 2 - bpy)
                    ploz = max(jloz, -bpz)
                    phiz = min(jhiz, N - 2 - bpz)
                    slox = max(jlox, -bsx)
                    shix = min(jhix, N - 2 - bsx)
                    sloy = max(jloy, -bsy)
                    shiy = min(jhiy, N - 2 - bsy)
                    sloz = max(jloz, -bsz)
                    shiz = min(jhiz, N - 2 - bsz)
                    wp000 = (1 - tpx) * (1 - tpy) * (1 - tpz)
                    wp001 = (1 - tpx) * (1 - tpy) * tpz
                    wp010 = (1 - tpx) * tpy * (1 - tpz)
                    wp011 = (1 - tpx) * tpy * tpz
                    wp100 = tpx * (1 - tpy) * (1 - tpz)
                    wp101 = tpx * (1 - tpy) * tpz
                    wp110 = tpx * tpy * (1 - tpz)
                    wp111 = tpx * tpy * tpz
                    ws000 = (1 - tsx) * (1 - tsy) * (1 - tsz)
                    ws001 = (1 - tsx) * (1 - tsy) * tsz
                    ws010 = (1 - tsx) * tsy * (1 - tsz)
                    ws011 = (1 - tsx) * tsy * tsz
                    ws100 = tsx * (1 - tsy) * (1 - tsz)
                    ws101 = tsx * (1 - tsy) * tsz
                    ws110 = tsx * tsy * (1 - tsz)
                    ws111 = tsx * tsy * tsz
                    cp = (bpx * N + bpy) * N + bpz
                    cs = (bsx * N + bsy) * N + bsz
                    for ix in range(jlox, jhix + 1):
                        pvx = plox <= ix <= phix
                        svx = slox <= ix <= shix
                        ibx = ix * NN
                        for iy in range(jloy, jhiy + 1):
                            pvxy = pvx and (ploy <= iy <= phiy)
                            svxy = svx and (sloy <= iy <= shiy)
                            ib = ibx + iy * N
                            for iz in range(jloz, jhiz + 1):
                                i = ib + iz
                                j = i + joff
                                fp = 0.0
                                if pvxy and ploz <= iz <= phiz:
                                    fp = (wp000 * F[i + cp] + wp001 * F[i + cp + 1]
                                          + wp010 * F[i + cp + N] + wp011 * F[i + cp + N + 1]
                                          + wp100 * F[i + cp + NN] + wp101 * F[i + cp + NN + 1]
                                          + wp110 * F[i + cp + NN + N] + wp111 * F[i + cp + NN + N + 1])
                                    if fp < 0.0:
                                        fp = 0.0
                                fs = 0.0
                                if svxy and sloz <= iz <= shiz:
                                    fs = (ws000 * F[i + cs] + ws001 * F[i + cs + 1]
                                          + ws010 * F[i + cs + N] + ws011 * F[i + cs + N + 1]
                                          + ws100 * F[i + cs + NN] + ws101 * F[i + cs + NN + 1]
                                          + ws110 * F[i + cs + NN + N] + ws111 * F[i + cs + NN + N + 1])
                                    if fs < 0.0:
                                        fs = 0.0
                                fi = F[i]
                                fj = F[j]
                                if mode_r2 == 0:
                                    br_i = _beta(fp, delta) - _beta(fi, delta) \
                                        - _dbeta(fi, delta) * (fp - fi)
                                    br_j = _beta(fs, delta) - _beta(fj, delta) \
                                        - _dbeta(fj, delta) * (fs - fj)
                                    Rpart[g, i] += coeff * fs * br_i
                                    Rpart[g, j] += coeff * fp * br_j
                                    if br_i > postol:
                                        pospart[g] += 1
                                    if br_j > postol:
                                        pospart[g] += 1
                                else:
                                    Rpart[g, i] += coeff * (fs * _beta(fp, delta)
                                                            - fj * _beta(fi, delta))
                                    Rpart[g, j] += coeff * (fp * _beta(fs, delta)
                                                            - fi * _beta(fj, delta))


@njit(cache=True, parallel=True)
def sweep_phi(F, N, offs, rr, tri, wbth, costh, sinth, cosaz, sinaz, azw,
              dv, dv3, ax0, delta, phi_kind, phi_pars, phi_nodal, Wpart):
    """Weak form of the mixed renormalized term against a test function:
    sum of B * f_* beta(f) * (phi(v') - phi(v)) over pairs and angles.
    phi is evaluated analytically at the off-lattice post-collision point,
    so no interpolation enters.  Result carries one dv^3 per velocity sum
    (dv^6 total, via dv3 * dv3 outside)."""
    NN = N * N
    n_off = offs.shape[0]
    nth = wbth.shape[1]
    naz = cosaz.shape[0]
    inv_dv = 1.0 / dv
    for g in prange(NGROUPS):
        for m in range(g, n_off, NGROUPS):
            ox = offs[m, 0]
            oy = offs[m, 1]
            oz = offs[m, 2]
            r = rr[m]
            kx = ox * dv / r
            ky = oy * dv / r
            kz = oz * dv / r
            e1x = tri[m, 0]
            e1y = tri[m, 1]
            e1z = tri[m, 2]
            e2x = tri[m, 3]
            e2y = tri[m, 4]
            e2z = tri[m, 5]
            jlox = max(0, ox)
            jhix = min(N - 1, N - 1 + ox)
            jloy = max(0, oy)
            jhiy = min(N - 1, N - 1 + oy)
            jloz = max(0, oz)
            jhiz = min(N - 1, N - 1 + oz)
            joff = -(ox * NN + oy * N + oz)
            rdx = r * inv_dv
            for t in range(nth):
                wb = wbth[m, t]
                if wb <= 0.0:
                    continue
                ct = costh[t]
                st = sinth[t]
                for p in range(naz):
                    coeff = wb * azw[p] * dv3
                    wxx = ct * kx + st * (cosaz[p] * e1x + sinaz[p] * e2x)
                    wyy = ct * ky + st * (cosaz[p] * e1y + sinaz[p] * e2y)
                    wzz = ct * kz + st * (cosaz[p] * e1z + sinaz[p] * e2z)
                    # physical displacements of v' and v*' from v_i
                    dpx = 0.5 * (r * wxx - ox * dv)
                    dpy = 0.5 * (r * wyy - oy * dv)
                    dpz = 0.5 * (r * wzz - oz * dv)
                    dsx = -0.5 * (r * wxx + ox * dv)
                    dsy = -0.5 * (r * wyy + oy * dv)
                    dsz = -0.5 * (r * wzz + oz * dv)
                    for ix in range(jlox, jhix + 1):
                        vx = ax0 + ix * dv
                        ibx = ix * NN
                        for iy in range(jloy, jhiy + 1):
                            vy = ax0 + iy * dv
                            ib = ibx + iy * N
                            for iz in range(jloz, jhiz + 1):
                                i = ib + iz
                                j = i + joff
                                vz = ax0 + iz * dv
                                php = _phi_val(phi_kind, phi_pars,
                                               vx + dpx, vy + dpy, vz + dpz)
                                phs = _phi_val(phi_kind, phi_pars,
                                               vx + dsx, vy + dsy, vz + dsz)
                                Wpart[g] += coeff * (
                                    F[j] * _beta(F[i], delta) * (php - phi_nodal[i])
                                    + F[i] * _beta(F[j], delta) * (phs - phi_nodal[j]))


@njit(cache=True, parallel=True)
def sweep_bilinear(F, G, N, offs, rr, tri, wbth, costh, sinth, cosaz, sinaz,
                   azw, dv, dv3, Qpart):
    """Unsymmetrized bilinear form Q(f, g) = int B (f' g'_* - f g_*) for the
    bilinearity checks; accumulates both pair orientations explicitly."""
    NN = N * N
    n_off = offs.shape[0]
    nth = wbth.shape[1]
    naz = cosaz.shape[0]
    inv_dv = 1.0 / dv
    for g in prange(NGROUPS):
        for m in range(g, n_off, NGROUPS):
            ox = offs[m, 0]
            oy = offs[m, 1]
            oz = offs[m, 2]
            r = rr[m]
            kx = ox * dv / r
            ky = oy * dv / r
            kz = oz * dv / r
            e1x = tri[m, 0]
            e1y = tri[m, 1]
            e1z = tri[m, 2]
            e2x = tri[m, 3]
            e2y = tri[m, 4]
            e2z = tri[m, 5]
            jlox = max(0, ox)
            jhix = min(N - 1, N - 1 + ox)
            jloy = max(0, oy)
            jhiy = min(N - 1, N - 1 + oy)
            jloz = max(0, oz)
            jhiz = min(N - 1, N - 1 + oz)
            joff = -(ox * NN + oy * N + oz)
            rdx = r * inv_dv
            for t in range(nth):
                wb = wbth[m, t]
                if wb <= 0.0:
                    continue
                ct = costh[t]
                st = sinth[t]
                for p in range(naz):
                    coeff = wb * azw[p] * dv3
                    wxx = ct * kx + st * (cosaz[p] * e1x + sinaz[p] * e2x)
                    wyy = ct * ky + st * (cosaz[p] * e1y + sinaz[p] * e2y)
                    wzz = ct * kz + st * (cosaz[p] * e1z + sinaz[p] * e2z)
                    upx = 0.5 * (rdx * wxx - ox)
                    upy = 0.5 * (rdx * wyy - oy)
                    upz = 0.5 * (rdx * wzz - oz)
                    usx = -0.5 * (rdx * wxx + ox)
                    usy = -0.5 * (rdx * wyy + oy)
                    usz = -0.5 * (rdx * wzz + oz)
                    bpx = int(np.floor(upx))
                    bpy = int(np.floor(upy))
                    bpz = int(np.floor(upz))
                    bsx = int(np.floor(usx))
                    bsy = int(np.floor(usy))
                    bsz = int(np.floor(usz))
                    tpx = upx - bpx
                    tpy = upy - bpy
                    tpz = upz - bpz
                    tsx = usx - bsx
                    tsy = usy - bsy
                    tsz = usz - bsz
                    glox = max(jlox, -bpx, -bsx)
                    ghix = min(jhix, N - 2 - bpx, N - 2 - bsx)
                    gloy = max(jloy, -bpy, -bsy)
                    ghiy = min(jhiy, N - 2 - bpy, N - 2 - bsy)
                    gloz = max(jloz, -bpz, -bsz)
                    ghiz = min(jhiz, N - 2 - bpz, N - 2 - bsz)
                    wp000 = (1 - tpx) * (1 - tpy) * (1 - tpz)
                    wp001 = (1 - tpx) * (1 - tpy) * tpz
                    wp010 = (1 - tpx) * tpy * (1 - tpz)
                    wp011 = (1 - tpx) * tpy * tpz
                    wp100 = tpx * (1 - tpy) * (1 - tpz)
                    wp101 = tpx * (1 - tpy) * tpz
                    wp110 = tpx * tpy * (1 - tpz)
                    wp111 = tpx * tpy * tpz
                    ws000 = (1 - tsx) * (1 - tsy) * (1 - tsz)
                    ws001 = (1 - tsx) * (1 - tsy) * tsz
                    ws010 = (1 - tsx) * tsy * (1 - tsz)
                    ws011 = (1 - tsx) * tsy * tsz
                    ws100 = tsx * (1 - tsy) * (1 - tsz)
                    ws101 = tsx * (1 - tsy) * tsz
                    ws110 = tsx * tsy * (1 - tsz)
                    ws111 = tsx * tsy * tsz
                    cp = (bpx * N + bpy) * N + bpz
                    cs = (bsx * N + bsy) * N + bsz
                    for ix in range(jlox, jhix + 1):
                        gx = glox <= ix <= ghix
                        ibx = ix * NN
                        for iy in range(jloy, jhiy + 1):
                            gxy = gx and (gloy <= iy <= ghiy)
                            ib = ibx + iy * N
                            for iz in range(jloz, jhiz + 1):
                                i = ib + iz
                                j = i + joff
                                fpF = 0.0
                                fsF = 0.0
                                fpG = 0.0
                                fsG = 0.0
                                if gxy and gloz <= iz <= ghiz:
                                    fpF = (wp000 * F[i + cp] + wp001 * F[i + cp + 1]
                                           + wp010 * F[i + cp + N] + wp011 * F[i + cp + N + 1]
                                           + wp100 * F[i + cp + NN] + wp101 * F[i + cp + NN + 1]
                                           + wp110 * F[i + cp + NN + N] + wp111 * F[i + cp + NN + N + 1])
                                    fsF = (ws000 * F[i + cs] + ws001 * F[i + cs + 1]
                                           + ws010 * F[i + cs + N] + ws011 * F[i + cs + N + 1]
                                           + ws100 * F[i + cs + NN] + ws101 * F[i + cs + NN + 1]
                                           + ws110 * F[i + cs + NN + N] + ws111 * F[i + cs + NN + N + 1])
                                    fpG = (wp000 * G[i + cp] + wp001 * G[i + cp + 1]
                                           + wp010 * G[i + cp + N] + wp011 * G[i + cp + N + 1]
                                           + wp100 * G[i + cp + NN] + wp101 * G[i + cp + NN + 1]
                                           + wp110 * G[i + cp + NN + N] + wp111 * G[i + cp + NN + N + 1])
                                    fsG = (ws000 * G[i + cs] + ws001 * G[i + cs + 1]
                                           + ws010 * G[i + cs + N] + ws011 * G[i + cs + N + 1]
                                           + ws100 * G[i + cs + NN] + ws101 * G[i + cs + NN + 1]
                                           + ws110 * G[i + cs + NN + N] + ws111 * G[i + cs + NN + N + 1])
                                Qpart[g, i] += coeff * (fpF * fsG - F[i] * G[j])
                                Qpart[g, j] += coeff * (fsF * fpG - F[j] * G[i])


@njit(cache=True, inline="always")
def _theta_window(theta, thmin, thsup):
    return thmin <= theta <= thsup


@njit(cache=True, parallel=True)
def sweep_subsampled(F, N, n_draws, seed, gamma, Kfac, sprime, hard_sphere,
                     zmin, zmax, thmin, thsup, thnodes, costh, sinth, thw,
                     cosaz, sinaz, azw, dv, dv3, Q):
    """Monte-Carlo estimate of the raw operator: for each output node,
    n_draws (v_*, omega) samples from a counter-based generator, scaled by
    the total term count.  Output is deterministic for a fixed seed at any
    thread count because every node owns its own counter stream."""
    NN = N * N
    M = NN * N
    nth = costh.shape[0]
    naz = cosaz.shape[0]
    total = M * nth * naz
    scale = total / n_draws
    inv_dv = 1.0 / dv
    for i in prange(M):
        ix = i // NN
        iy = (i // N) % N
        iz = i % N
        acc = 0.0
        ctr = U64(seed) ^ (U64(i) * U64(0x9E3779B97F4A7C15))
        for s in range(n_draws):
            ctr = _splitmix64(ctr)
            j = int(ctr % U64(M))
            ctr2 = _splitmix64(ctr ^ U64(0xD1B54A32D192ED03))
            t = int(ctr2 % U64(nth))
            p = int((ctr2 >> U64(32)) % U64(naz))
            jx = j // NN
            jy = (j // N) % N
            jz = j % N
            ox = ix - jx
            oy = iy - jy
            oz = iz - jz
            if ox == 0 and oy == 0 and oz == 0:
                continue
            r = dv * np.sqrt(float(ox * ox + oy * oy + oz * oz))
            if r < zmin or r > zmax:
                continue
            theta = thnodes[t]
            if not _theta_window(theta, thmin, thsup):
                continue
            if thw[t] <= 0.0:
                continue
            th = costh[t]
            # kernel value * sin(theta) * theta weight
            if hard_sphere:
                wb = (r / (4.0 * np.pi)) * sinth[t] * thw[t]
            else:
                wb = Kfac * (r ** gamma) * theta ** (-1.0 - sprime) * thw[t]
            kx = ox * dv / r
            ky = oy * dv / r
            kz = oz * dv / r
            # deterministic triad
            akx = abs(kx)
            aky = abs(ky)
            akz = abs(kz)
            if akx <= aky and akx <= akz:
                rx, ry, rz = 1.0, 0.0, 0.0
            elif aky <= akz:
                rx, ry, rz = 0.0, 1.0, 0.0
            else:
                rx, ry, rz = 0.0, 0.0, 1.0
            d = rx * kx + ry * ky + rz * kz
            e1x = rx - d * kx
            e1y = ry - d * ky
            e1z = rz - d * kz
            nrm = np.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
            e1x /= nrm
            e1y /= nrm
            e1z /= nrm
            e2x = ky * e1z - kz * e1y
            e2y = kz * e1x - kx * e1z
            e2z = kx * e1y - ky * e1x
            st = sinth[t]
            wxx = th * kx + st * (cosaz[p] * e1x + sinaz[p] * e2x)
            wyy = th * ky + st * (cosaz[p] * e1y + sinaz[p] * e2y)
            wzz = th * kz + st * (cosaz[p] * e1z + sinaz[p] * e2z)
            rdx = r * inv_dv
            upx = 0.5 * (rdx * wxx - ox)
            upy = 0.5 * (rdx * wyy - oy)
            upz = 0.5 * (rdx * wzz - oz)
            usx = -0.5 * (rdx * wxx + ox)
            usy = -0.5 * (rdx * wyy + oy)
            usz = -0.5 * (rdx * wzz + oz)
            a = 0.0
            bpx = int(np.floor(ix + upx))
            bpy = int(np.floor(iy + upy))
            bpz = int(np.floor(iz + upz))
            bsx = int(np.floor(ix + usx))
            bsy = int(np.floor(iy + usy))
            bsz = int(np.floor(iz + usz))
            if (0 <= bpx <= N - 2 and 0 <= bpy <= N - 2 and 0 <= bpz <= N - 2
                    and 0 <= bsx <= N - 2 and 0 <= bsy <= N - 2
                    and 0 <= bsz <= N - 2):
                tpx = ix + upx - bpx
                tpy = iy + upy - bpy
                tpz = iz + upz - bpz
                tsx = ix + usx - bsx
                tsy = iy + usy - bsy
                tsz = iz + usz - bsz
                cp = (bpx * N + bpy) * N + bpz
                cs = (bsx * N + bsy) * N + bsz
                fp = ((1 - tpx) * (1 - tpy) * (1 - tpz) * F[cp]
                      + (1 - tpx) * (1 - tpy) * tpz * F[cp + 1]
                      + (1 - tpx) * tpy * (1 - tpz) * F[cp + N]
                      + (1 - tpx) * tpy * tpz * F[cp + N + 1]
                      + tpx * (1 - tpy) * (1 - tpz) * F[cp + NN]
                      + tpx * (1 - tpy) * tpz * F[cp + NN + 1]
                      + tpx * tpy * (1 - tpz) * F[cp + NN + N]
                      + tpx * tpy * tpz * F[cp + NN + N + 1])
                fs = ((1 - tsx) * (1 - tsy) * (1 - tsz) * F[cs]
                      + (1 - tsx) * (1 - tsy) * tsz * F[cs + 1]
                      + (1 - tsx) * tsy * (1 - tsz) * F[cs + N]
                      + (1 - tsx) * tsy * tsz * F[cs + N + 1]
                      + tsx * (1 - tsy) * (1 - tsz) * F[cs + NN]
                      + tsx * (1 - tsy) * tsz * F[cs + NN + 1]
                      + tsx * tsy * (1 - tsz) * F[cs + NN + N]
                      + tsx * tsy * tsz * F[cs + NN + N + 1])
                if fp < 0.0:
                    fp = 0.0
                if fs < 0.0:
                    fs = 0.0
                a = fp * fs
            acc += wb * azw[p] * (a - F[i] * F[j])
        Q[i] = acc * scale * dv3


@njit(cache=True)
def loss_frequency(F, N, offs, asum):
    """nu_i = sum_j A_n(|v_i - v_j|) F_j dv^3 (dv^3 applied by the caller);
    offsets cover the half-space so both orientations are added."""
    NN = N * N
    M = NN * N
    nu = np.zeros(M)
    n_off = offs.shape[0]
    for m in range(n_off):
        a = asum[m]
        if a <= 0.0:
            continue
        ox = offs[m, 0]
        oy = offs[m, 1]
        oz = offs[m, 2]
        joff = -(ox * NN + oy * N + oz)
        for ix in range(max(0, ox), min(N - 1, N - 1 + ox) + 1):
            for iy in range(max(0, oy), min(N - 1, N - 1 + oy) + 1):
                ib = ix * NN + iy * N
                for iz in range(max(0, oz), min(N - 1, N - 1 + oz) + 1):
                    i = ib + iz
                    j = i + joff
                    nu[i] += a * F[j]
                    nu[j] += a * F[i]
    return nu
