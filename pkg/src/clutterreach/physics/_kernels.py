"""Hot loops of the planar contact solver.

Every function here is scalar/array code that runs either compiled by numba or
as ordinary Python (see ``clutterreach._accel``).  State is passed as packed
float/int arrays; column layouts are the ``B_*``, ``P_*``, ``S_*``, ``C_*``
constants below.
"""

import math

import numpy as np

from .._accel import jit

# body state columns
B_X, B_Y, B_A, B_VX, B_VY, B_W = range(6)
# body property columns
P_IM, P_II, P_M, P_MU_FLOOR, P_MU_BODY, P_R_FLOOR = range(6)
# body flag columns
F_KIND, F_ACTIVE = range(2)
KIND_WALL, KIND_OBJECT, KIND_EFFECTOR = 0, 1, 2
# shape int columns / geometry columns
SI_BODY, SI_TYPE = range(2)
SHAPE_BOX, SHAPE_CIRCLE = 0, 1
SG_OX, SG_OY, SG_HX, SG_HY, SG_R = range(5)
# contact int columns
CI_SA, CI_SB, CI_BA, CI_BB, CI_KEY = range(5)
# contact float columns
(C_PX, C_PY, C_NX, C_NY, C_SEP, C_PN, C_PT, C_MN, C_MT, C_BIAS,
 C_RAX, C_RAY, C_RBX, C_RBY, C_MU) = range(15)
N_CF = 15
# solver parameter slots
(PRM_DT, PRM_ITERS, PRM_BETA, PRM_SLOP, PRM_G, PRM_WARM, PRM_FRONT_Y,
 PRM_FAULT_PEN, PRM_REST) = range(9)
N_PRM = 9
# approach speed below which restitution is ignored
REST_THRESHOLD = 0.01

FAULT_NONE, FAULT_NONFINITE, FAULT_PENETRATION, FAULT_OVERFLOW = 0, 1, 2, 3


@jit
def shape_pose(sint, sgeo, bstate, s):
    b = sint[s, SI_BODY]
    c = math.cos(bstate[b, B_A])
    sn = math.sin(bstate[b, B_A])
    ox = sgeo[s, SG_OX]
    oy = sgeo[s, SG_OY]
    return bstate[b, B_X] + c * ox - sn * oy, bstate[b, B_Y] + sn * ox + c * oy, c, sn


@jit
def _clip(v, ids, nx, ny, offset, clip_id, out_v, out_ids):
    d0 = nx * v[0, 0] + ny * v[0, 1] - offset
    d1 = nx * v[1, 0] + ny * v[1, 1] - offset
    n = 0
    if d0 <= 0.0:
        out_v[n, 0] = v[0, 0]
        out_v[n, 1] = v[0, 1]
        out_ids[n] = ids[0]
        n += 1
    if d1 <= 0.0:
        out_v[n, 0] = v[1, 0]
        out_v[n, 1] = v[1, 1]
        out_ids[n] = ids[1]
        n += 1
    if d0 * d1 < 0.0 and n < 2:
        t = d0 / (d0 - d1)
        out_v[n, 0] = v[0, 0] + t * (v[1, 0] - v[0, 0])
        out_v[n, 1] = v[0, 1] + t * (v[1, 1] - v[0, 1])
        out_ids[n] = clip_id
        n += 1
    return n


@jit
def _incident_edge(hx, hy, px, py, c, s, fnx, fny, v, ids):
    nx = -(c * fnx + s * fny)
    ny = -(-s * fnx + c * fny)
    if abs(nx) > abs(ny):
        if nx > 0.0:
            ax, ay, ia, bx, by, ib = hx, -hy, 0, hx, hy, 1
        else:
            ax, ay, ia, bx, by, ib = -hx, hy, 2, -hx, -hy, 3
    else:
        if ny > 0.0:
            ax, ay, ia, bx, by, ib = hx, hy, 1, -hx, hy, 2
        else:
            ax, ay, ia, bx, by, ib = -hx, -hy, 3, hx, -hy, 0
    v[0, 0] = px + c * ax - s * ay
    v[0, 1] = py + s * ax + c * ay
    v[1, 0] = px + c * bx - s * by
    v[1, 1] = py + s * bx + c * by
    ids[0] = ia
    ids[1] = ib


@jit
def collide_boxes(pax, pay, ca, sa, hax, hay, pbx, pby, cb, sb, hbx, hby,
                  out_p, out_sep, out_feat, out_n, scratch_v, scratch_ids):
    """Oriented box pair; up to two contacts, normal from A to B."""
    dpx = pbx - pax
    dpy = pby - pay
    dax = ca * dpx + sa * dpy
    day = -sa * dpx + ca * dpy
    dbx = cb * dpx + sb * dpy
    dby = -sb * dpx + cb * dpy
    a11 = abs(ca * cb + sa * sb)
    a12 = abs(-ca * sb + sa * cb)
    a21 = abs(-sa * cb + ca * sb)
    a22 = abs(sa * sb + ca * cb)

    fax = abs(dax) - hax - (a11 * hbx + a12 * hby)
    fay = abs(day) - hay - (a21 * hbx + a22 * hby)
    if fax > 0.0 or fay > 0.0:
        return 0
    fbx = abs(dbx) - (a11 * hax + a21 * hay) - hbx
    fby = abs(dby) - (a12 * hax + a22 * hay) - hby
    if fbx > 0.0 or fby > 0.0:
        return 0

    rel_tol = 0.95
    abs_tol = 0.01
    axis = 0
    sep = fax
    if dax > 0.0:
        nx, ny = ca, sa
    else:
        nx, ny = -ca, -sa
    if fay > rel_tol * sep + abs_tol * hay:
        axis = 1
        sep = fay
        if day > 0.0:
            nx, ny = -sa, ca
        else:
            nx, ny = sa, -ca
    if fbx > rel_tol * sep + abs_tol * hbx:
        axis = 2
        sep = fbx
        if dbx > 0.0:
            nx, ny = cb, sb
        else:
            nx, ny = -cb, -sb
    if fby > rel_tol * sep + abs_tol * hby:
        axis = 3
        sep = fby
        if dby > 0.0:
            nx, ny = -sb, cb
        else:
            nx, ny = sb, -cb

    v0 = scratch_v[0]
    v1 = scratch_v[1]
    v2 = scratch_v[2]
    i0 = scratch_ids[0]
    i1 = scratch_ids[1]
    i2 = scratch_ids[2]
    if axis == 0:
        fnx, fny = nx, ny
        front = pax * fnx + pay * fny + hax
        snx, sny = -sa, ca
        side = pax * snx + pay * sny
        neg_side = -side + hay
        pos_side = side + hay
        _incident_edge(hbx, hby, pbx, pby, cb, sb, fnx, fny, v0, i0)
    elif axis == 1:
        fnx, fny = nx, ny
        front = pax * fnx + pay * fny + hay
        snx, sny = ca, sa
        side = pax * snx + pay * sny
        neg_side = -side + hax
        pos_side = side + hax
        _incident_edge(hbx, hby, pbx, pby, cb, sb, fnx, fny, v0, i0)
    elif axis == 2:
        fnx, fny = -nx, -ny
        front = pbx * fnx + pby * fny + hbx
        snx, sny = -sb, cb
        side = pbx * snx + pby * sny
        neg_side = -side + hby
        pos_side = side + hby
        _incident_edge(hax, hay, pax, pay, ca, sa, fnx, fny, v0, i0)
    else:
        fnx, fny = -nx, -ny
        front = pbx * fnx + pby * fny + hby
        snx, sny = cb, sb
        side = pbx * snx + pby * sny
        neg_side = -side + hbx
        pos_side = side + hbx
        _incident_edge(hax, hay, pax, pay, ca, sa, fnx, fny, v0, i0)

    n = _clip(v0, i0, -snx, -sny, neg_side, 4, v1, i1)
    if n < 2:
        return 0
    n = _clip(v1, i1, snx, sny, pos_side, 5, v2, i2)
    if n < 2:
        return 0

    count = 0
    for k in range(2):
        s = fnx * v2[k, 0] + fny * v2[k, 1] - front
        if s <= 0.0:
            out_sep[count] = s
            out_p[count, 0] = v2[k, 0] - s * fnx
            out_p[count, 1] = v2[k, 1] - s * fny
            out_feat[count] = axis * 8 + i2[k]
            count += 1
    out_n[0] = nx
    out_n[1] = ny
    return count


@jit
def collide_circle_box(cx, cy, r, px, py, c, s, hx, hy, out_p, out_sep, out_n):
    """Circle against box; one contact, normal from box to circle."""
    dx = cx - px
    dy = cy - py
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    qx = min(max(lx, -hx), hx)
    qy = min(max(ly, -hy), hy)
    if lx != qx or ly != qy:
        ex = lx - qx
        ey = ly - qy
        d = math.sqrt(ex * ex + ey * ey)
        if d > r:
            return 0
        nlx = ex / d
        nly = ey / d
        sep = d - r
    else:
        gx = hx - abs(lx)
        gy = hy - abs(ly)
        if gx < gy:
            nlx = 1.0 if lx >= 0.0 else -1.0
            nly = 0.0
            qx = nlx * hx
            sep = -(gx + r)
        else:
            nlx = 0.0
            nly = 1.0 if ly >= 0.0 else -1.0
            qy = nly * hy
            sep = -(gy + r)
    out_n[0] = c * nlx - s * nly
    out_n[1] = s * nlx + c * nly
    out_p[0, 0] = px + c * qx - s * qy
    out_p[0, 1] = py + s * qx + c * qy
    out_sep[0] = sep
    return 1


@jit
def shape_aabbs(sint, sgeo, bstate, out):
    for s in range(sint.shape[0]):
        x, y, c, sn = shape_pose(sint, sgeo, bstate, s)
        if sint[s, SI_TYPE] == SHAPE_BOX:
            ex = abs(c) * sgeo[s, SG_HX] + abs(sn) * sgeo[s, SG_HY]
            ey = abs(sn) * sgeo[s, SG_HX] + abs(c) * sgeo[s, SG_HY]
        else:
            ex = sgeo[s, SG_R]
            ey = sgeo[s, SG_R]
        out[s, 0] = x - ex
        out[s, 1] = y - ey
        out[s, 2] = x + ex
        out[s, 3] = y + ey


@jit
def detect_contacts(bstate, bprops, bflags, sint, sgeo, aabb, cint, cf):
    """Narrow phase over all AABB-overlapping shape pairs.  Returns count, or -1 on overflow."""
    shape_aabbs(sint, sgeo, bstate, aabb)
    out_p = np.empty((2, 2))
    out_sep = np.empty(2)
    out_feat = np.empty(2, dtype=np.int64)
    out_n = np.empty(2)
    scratch_v = np.empty((3, 2, 2))
    scratch_ids = np.empty((3, 2), dtype=np.int64)
    cap = cint.shape[0]
    ns = sint.shape[0]
    count = 0
    for i in range(ns):
        bi = sint[i, SI_BODY]
        if bflags[bi, F_ACTIVE] == 0:
            continue
        for j in range(i + 1, ns):
            bj = sint[j, SI_BODY]
            if bi == bj or bflags[bj, F_ACTIVE] == 0:
                continue
            if bprops[bi, P_IM] == 0.0 and bprops[bj, P_IM] == 0.0:
                continue
            if (aabb[i, 0] > aabb[j, 2] or aabb[j, 0] > aabb[i, 2]
                    or aabb[i, 1] > aabb[j, 3] or aabb[j, 1] > aabb[i, 3]):
                continue
            xi, yi, ci, si = shape_pose(sint, sgeo, bstate, i)
            xj, yj, cj, sj = shape_pose(sint, sgeo, bstate, j)
            ti = sint[i, SI_TYPE]
            tj = sint[j, SI_TYPE]
            if ti == SHAPE_BOX and tj == SHAPE_BOX:
                n = collide_boxes(xi, yi, ci, si, sgeo[i, SG_HX], sgeo[i, SG_HY],
                                  xj, yj, cj, sj, sgeo[j, SG_HX], sgeo[j, SG_HY],
                                  out_p, out_sep, out_feat, out_n, scratch_v, scratch_ids)
            elif ti == SHAPE_CIRCLE and tj == SHAPE_BOX:
                n = collide_circle_box(xi, yi, sgeo[i, SG_R], xj, yj, cj, sj,
                                       sgeo[j, SG_HX], sgeo[j, SG_HY], out_p, out_sep, out_n)
                # box->circle normal; flip to i->j
                out_n[0] = -out_n[0]
                out_n[1] = -out_n[1]
                out_feat[0] = 0
            elif ti == SHAPE_BOX and tj == SHAPE_CIRCLE:
                n = collide_circle_box(xj, yj, sgeo[j, SG_R], xi, yi, ci, si,
                                       sgeo[i, SG_HX], sgeo[i, SG_HY], out_p, out_sep, out_n)
                out_feat[0] = 0
            else:
                n = 0
            for k in range(n):
                if count >= cap:
                    return -1
                cint[count, CI_SA] = i
                cint[count, CI_SB] = j
                cint[count, CI_BA] = bi
                cint[count, CI_BB] = bj
                cint[count, CI_KEY] = (i * 4096 + j) * 64 + out_feat[k]
                cf[count, C_PX] = out_p[k, 0]
                cf[count, C_PY] = out_p[k, 1]
                cf[count, C_NX] = out_n[0]
                cf[count, C_NY] = out_n[1]
                cf[count, C_SEP] = out_sep[k]
                cf[count, C_MU] = math.sqrt(bprops[bi, P_MU_BODY] * bprops[bj, P_MU_BODY])
                count += 1
    return count


@jit
def _apply_impulse(bstate, bprops, b, px, py, rx, ry):
    im = bprops[b, P_IM]
    if im == 0.0:
        return
    bstate[b, B_VX] += im * px
    bstate[b, B_VY] += im * py
    bstate[b, B_W] += bprops[b, P_II] * (rx * py - ry * px)


@jit
def step(bstate, bprops, bflags, sint, sgeo, floor_acc, motor_body, motor_target,
         motor_limits, motor_acc, prm, cint, cf, prev_keys, prev_imp, n_prev,
         aabb, wrench):
    """Advance one fixed step.

    ``prev_keys``/``prev_imp`` hold the previous step's contact keys (sorted)
    and accumulated impulses for warm starting; they are overwritten with this
    step's.  ``wrench`` accumulates the contact force/moment on the motor body.
    Returns (contact count, max penetration, fault code).
    """
    dt = prm[PRM_DT]
    inv_dt = 1.0 / dt
    iters = int(prm[PRM_ITERS])
    beta = prm[PRM_BETA]
    slop = prm[PRM_SLOP]
    g = prm[PRM_G]
    warm = prm[PRM_WARM] > 0.0
    rest = prm[PRM_REST]
    nb = bstate.shape[0]

    nc = detect_contacts(bstate, bprops, bflags, sint, sgeo, aabb, cint, cf)
    if nc < 0:
        return 0, 0.0, FAULT_OVERFLOW

    max_pen = 0.0
    for k in range(nc):
        a = cint[k, CI_BA]
        b = cint[k, CI_BB]
        px = cf[k, C_PX]
        py = cf[k, C_PY]
        nx = cf[k, C_NX]
        ny = cf[k, C_NY]
        tx = ny
        ty = -nx
        rax = px - bstate[a, B_X]
        ray = py - bstate[a, B_Y]
        rbx = px - bstate[b, B_X]
        rby = py - bstate[b, B_Y]
        cf[k, C_RAX] = rax
        cf[k, C_RAY] = ray
        cf[k, C_RBX] = rbx
        cf[k, C_RBY] = rby
        rna = rax * ny - ray * nx
        rnb = rbx * ny - rby * nx
        kn = (bprops[a, P_IM] + bprops[b, P_IM] + bprops[a, P_II] * rna * rna
              + bprops[b, P_II] * rnb * rnb)
        rta = rax * ty - ray * tx
        rtb = rbx * ty - rby * tx
        kt = (bprops[a, P_IM] + bprops[b, P_IM] + bprops[a, P_II] * rta * rta
              + bprops[b, P_II] * rtb * rtb)
        cf[k, C_MN] = 1.0 / kn
        cf[k, C_MT] = 1.0 / kt
        sep = cf[k, C_SEP]
        if -sep > max_pen:
            max_pen = -sep
        bias = -beta * inv_dt * min(0.0, sep + slop)
        if rest > 0.0:
            dvx = (bstate[b, B_VX] - bstate[b, B_W] * rby) - (bstate[a, B_VX] - bstate[a, B_W] * ray)
            dvy = (bstate[b, B_VY] + bstate[b, B_W] * rbx) - (bstate[a, B_VY] + bstate[a, B_W] * rax)
            vn0 = dvx * nx + dvy * ny
            if vn0 < -REST_THRESHOLD:
                bias = max(bias, -rest * vn0)
        cf[k, C_BIAS] = bias
        pn = 0.0
        pt = 0.0
        if warm and n_prev > 0:
            key = cint[k, CI_KEY]
            idx = np.searchsorted(prev_keys[:n_prev], key)
            if idx < n_prev and prev_keys[idx] == key:
                pn = prev_imp[idx, 0]
                pt = prev_imp[idx, 1]
        cf[k, C_PN] = pn
        cf[k, C_PT] = pt
        if pn != 0.0 or pt != 0.0:
            ix = pn * nx + pt * tx
            iy = pn * ny + pt * ty
            _apply_impulse(bstate, bprops, a, -ix, -iy, rax, ray)
            _apply_impulse(bstate, bprops, b, ix, iy, rbx, rby)

    # floor friction joints (objects only) and motor, warm started
    for b in range(nb):
        if bflags[b, F_KIND] != KIND_OBJECT or bflags[b, F_ACTIVE] == 0:
            floor_acc[b, 0] = 0.0
            floor_acc[b, 1] = 0.0
            floor_acc[b, 2] = 0.0
            continue
        if not warm:
            floor_acc[b, 0] = 0.0
            floor_acc[b, 1] = 0.0
            floor_acc[b, 2] = 0.0
        bstate[b, B_VX] += bprops[b, P_IM] * floor_acc[b, 0]
        bstate[b, B_VY] += bprops[b, P_IM] * floor_acc[b, 1]
        bstate[b, B_W] += bprops[b, P_II] * floor_acc[b, 2]
    e = motor_body
    if e >= 0:
        if not warm:
            motor_acc[0] = 0.0
            motor_acc[1] = 0.0
            motor_acc[2] = 0.0
        bstate[e, B_VX] += bprops[e, P_IM] * motor_acc[0]
        bstate[e, B_VY] += bprops[e, P_IM] * motor_acc[1]
        bstate[e, B_W] += bprops[e, P_II] * motor_acc[2]

    for _ in range(iters):
        if e >= 0:
            me = bprops[e, P_M]
            ie = 1.0 / bprops[e, P_II]
            fmax = motor_limits[0] * dt
            mmax = motor_limits[1] * dt
            for ax in range(2):
                col = B_VX + ax
                lam = -me * (bstate[e, col] - motor_target[ax])
                old = motor_acc[ax]
                new = min(max(old + lam, -fmax), fmax)
                motor_acc[ax] = new
                bstate[e, col] += (new - old) / me
            lam = -ie * (bstate[e, B_W] - motor_target[2])
            old = motor_acc[2]
            new = min(max(old + lam, -mmax), mmax)
            motor_acc[2] = new
            bstate[e, B_W] += (new - old) * bprops[e, P_II]

        for b in range(nb):
            if bflags[b, F_KIND] != KIND_OBJECT or bflags[b, F_ACTIVE] == 0:
                continue
            m = bprops[b, P_M]
            fmax = bprops[b, P_MU_FLOOR] * m * g * dt
            ox = floor_acc[b, 0]
            oy = floor_acc[b, 1]
            ax_ = ox - m * bstate[b, B_VX]
            ay_ = oy - m * bstate[b, B_VY]
            mag = math.sqrt(ax_ * ax_ + ay_ * ay_)
            if mag > fmax:
                ax_ *= fmax / mag
                ay_ *= fmax / mag
            floor_acc[b, 0] = ax_
            floor_acc[b, 1] = ay_
            bstate[b, B_VX] += (ax_ - ox) / m
            bstate[b, B_VY] += (ay_ - oy) / m
            tmax = fmax * bprops[b, P_R_FLOOR]
            inertia = 1.0 / bprops[b, P_II]
            ow = floor_acc[b, 2]
            aw = min(max(ow - inertia * bstate[b, B_W], -tmax), tmax)
            floor_acc[b, 2] = aw
            bstate[b, B_W] += (aw - ow) * bprops[b, P_II]

        for k in range(nc):
            a = cint[k, CI_BA]
            b = cint[k, CI_BB]
            nx = cf[k, C_NX]
            ny = cf[k, C_NY]
            tx = ny
            ty = -nx
            rax = cf[k, C_RAX]
            ray = cf[k, C_RAY]
            rbx = cf[k, C_RBX]
            rby = cf[k, C_RBY]
            dvx = (bstate[b, B_VX] - bstate[b, B_W] * rby) - (bstate[a, B_VX] - bstate[a, B_W] * ray)
            dvy = (bstate[b, B_VY] + bstate[b, B_W] * rbx) - (bstate[a, B_VY] + bstate[a, B_W] * rax)
            vn = dvx * nx + dvy * ny
            dpn = cf[k, C_MN] * (-vn + cf[k, C_BIAS])
            pn0 = cf[k, C_PN]
            pn = max(pn0 + dpn, 0.0)
            cf[k, C_PN] = pn
            dpn = pn - pn0
            _apply_impulse(bstate, bprops, a, -dpn * nx, -dpn * ny, rax, ray)
            _apply_impulse(bstate, bprops, b, dpn * nx, dpn * ny, rbx, rby)

            dvx = (bstate[b, B_VX] - bstate[b, B_W] * rby) - (bstate[a, B_VX] - bstate[a, B_W] * ray)
            dvy = (bstate[b, B_VY] + bstate[b, B_W] * rbx) - (bstate[a, B_VY] + bstate[a, B_W] * rax)
            vt = dvx * tx + dvy * ty
            dpt = cf[k, C_MT] * (-vt)
            lim = cf[k, C_MU] * pn
            pt0 = cf[k, C_PT]
            pt = min(max(pt0 + dpt, -lim), lim)
            cf[k, C_PT] = pt
            dpt = pt - pt0
            _apply_impulse(bstate, bprops, a, -dpt * tx, -dpt * ty, rax, ray)
            _apply_impulse(bstate, bprops, b, dpt * tx, dpt * ty, rbx, rby)

    # integrate, check finiteness, retire objects pushed past the open front
    front_y = prm[PRM_FRONT_Y]
    fault = FAULT_NONE
    for b in range(nb):
        if bprops[b, P_IM] == 0.0 or bflags[b, F_ACTIVE] == 0:
            continue
        bstate[b, B_X] += dt * bstate[b, B_VX]
        bstate[b, B_Y] += dt * bstate[b, B_VY]
        bstate[b, B_A] += dt * bstate[b, B_W]
        for col in range(6):
            if not math.isfinite(bstate[b, col]):
                fault = FAULT_NONFINITE
        if bflags[b, F_KIND] == KIND_OBJECT and bstate[b, B_Y] < front_y:
            bflags[b, F_ACTIVE] = 0
            bstate[b, B_VX] = 0.0
            bstate[b, B_VY] = 0.0
            bstate[b, B_W] = 0.0
    if fault == FAULT_NONE and max_pen > prm[PRM_FAULT_PEN]:
        fault = FAULT_PENETRATION

    # contact wrench on the motor body, in world frame about its origin
    if e >= 0:
        for k in range(nc):
            a = cint[k, CI_BA]
            b = cint[k, CI_BB]
            if a != e and b != e:
                continue
            fx = (cf[k, C_PN] * cf[k, C_NX] + cf[k, C_PT] * cf[k, C_NY]) * inv_dt
            fy = (cf[k, C_PN] * cf[k, C_NY] - cf[k, C_PT] * cf[k, C_NX]) * inv_dt
            if a == e:
                fx = -fx
                fy = -fy
                rx = cf[k, C_RAX]
                ry = cf[k, C_RAY]
            else:
                rx = cf[k, C_RBX]
                ry = cf[k, C_RBY]
            wrench[0] += fx
            wrench[1] += fy
            wrench[2] += rx * fy - ry * fx

    # stash impulses for the next step's warm start, sorted by key
    if nc > 0:
        order = np.argsort(cint[:nc, CI_KEY])
        for i in range(nc):
            k = order[i]
            prev_keys[i] = cint[k, CI_KEY]
            prev_imp[i, 0] = cf[k, C_PN]
            prev_imp[i, 1] = cf[k, C_PT]
    return nc, max_pen, fault


@jit
def advance(nsteps, bstate, bprops, bflags, sint, sgeo, floor_acc, motor_body,
            motor_target, motor_limits, motor_acc, prm, cint, cf, prev_keys,
            prev_imp, n_prev, aabb, wrench, stop_point, stop_radius):
    """Run up to ``nsteps`` steps.

    Stops early once the motor body's origin is within ``stop_radius`` of
    ``stop_point`` (pass a negative radius to disable).  Returns
    (steps taken, last contact count, max penetration over the run, fault).
    """
    nc = n_prev
    worst = 0.0
    for i in range(nsteps):
        nc, pen, fault = step(bstate, bprops, bflags, sint, sgeo, floor_acc,
                              motor_body, motor_target, motor_limits, motor_acc,
                              prm, cint, cf, prev_keys, prev_imp, nc, aabb, wrench)
        if pen > worst:
            worst = pen
        if fault != FAULT_NONE:
            return i + 1, nc, worst, fault
        if stop_radius >= 0.0 and motor_body >= 0:
            dx = bstate[motor_body, B_X] - stop_point[0]
            dy = bstate[motor_body, B_Y] - stop_point[1]
            if dx * dx + dy * dy <= stop_radius * stop_radius:
                return i + 1, nc, worst, FAULT_NONE
    return nsteps, nc, worst, FAULT_NONE
