"""Compiled inner loops of the particle bed.

Contacts are visited in a fixed order: particle pairs sorted by ``(i, j)``,
then particle-obstacle contacts sorted by ``(particle, obstacle)``.  Forces
are accumulated in that order, so results are reproducible bit for bit.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def neighbour_pairs(pos, radius, skin):
    """Pairs ``i < j`` closer than ``r_i + r_j + skin``, sorted by ``(i, j)``."""
    n = pos.shape[0]
    if n < 2:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    cell = 2.0 * radius.max() + skin
    x0 = pos[:, 0].min()
    y0 = pos[:, 1].min()
    cx = np.empty(n, np.int64)
    cy = np.empty(n, np.int64)
    for k in range(n):
        cx[k] = int(math.floor((pos[k, 0] - x0) / cell))
        cy[k] = int(math.floor((pos[k, 1] - y0) / cell))
    nx = cx.max() + 1
    ny = cy.max() + 1
    # counting sort of particles by cell; cells listed column by column
    start = np.zeros(nx * ny + 1, np.int64)
    for k in range(n):
        start[cx[k] * ny + cy[k] + 1] += 1
    for c in range(nx * ny):
        start[c + 1] += start[c]
    fill = start[:-1].copy()
    members = np.empty(n, np.int64)
    for k in range(n):
        c = cx[k] * ny + cy[k]
        members[fill[c]] = k
        fill[c] += 1
    # pairs are listed per particle ``i`` over partners ``j > i`` from the
    # nine surrounding cells, which yields them already sorted by ``i``
    ii = np.empty(0, np.int64)
    jj = np.empty(0, np.int64)
    m = _scan_cells(pos, radius, skin, cx, cy, nx, ny, start, members, ii, jj, False)
    ii = np.empty(m, np.int64)
    jj = np.empty(m, np.int64)
    _scan_cells(pos, radius, skin, cx, cy, nx, ny, start, members, ii, jj, True)
    return ii, jj


@njit(cache=True)
def _scan_cells(pos, radius, skin, cx, cy, nx, ny, start, members, ii, jj, write):
    n = pos.shape[0]
    buf = np.empty(n, np.int64)
    m = 0
    for i in range(n):
        cnt = 0
        for ax in range(max(cx[i] - 1, 0), min(cx[i] + 2, nx)):
            for ay in range(max(cy[i] - 1, 0), min(cy[i] + 2, ny)):
                c = ax * ny + ay
                for q in range(start[c], start[c + 1]):
                    j = members[q]
                    if j <= i:
                        continue
                    dx = pos[j, 0] - pos[i, 0]
                    dy = pos[j, 1] - pos[i, 1]
                    reach = radius[i] + radius[j] + skin
                    if dx * dx + dy * dy < reach * reach:
                        # insertion keeps the partners of ``i`` sorted
                        q2 = cnt
                        while q2 > 0 and buf[q2 - 1] > j:
                            buf[q2] = buf[q2 - 1]
                            q2 -= 1
                        buf[q2] = j
                        cnt += 1
        if write:
            for q in range(cnt):
                ii[m + q] = i
                jj[m + q] = buf[q]
        m += cnt
    return m


@njit(cache=True)
def _advance_to(keys, q, k):
    # contact keys are generated in increasing order, so the search for the
    # previous spring of key ``k`` resumes where the last one stopped
    while q < keys.shape[0] and keys[q] < k:
        q += 1
    return q


@njit(cache=True)
def _contact(delta, vn, vt, rstar, mstar, e_star, g_star, mu, mur, eta, xi, dt, w):
    # scalar twin of contact.hertz_mindlin_contact
    if delta <= 0.0:
        return 0.0, 0.0, 0.0, 0.0
    k_h = (4.0 / 3.0) * e_star * math.sqrt(rstar)
    root = math.sqrt(delta)
    fn = k_h * delta * root + eta * math.sqrt(mstar * k_h) * math.sqrt(root) * vn
    if fn < 0.0:
        fn = 0.0
    k_t = 8.0 * g_star * math.sqrt(rstar) * root
    xi = xi + vt * dt
    ft = -k_t * xi
    capf = mu * fn
    if abs(ft) > capf:
        ft = capf if ft > 0 else -capf
        xi = -ft / k_t if k_t > 0.0 else 0.0
    sw = 0.0
    if w > 0.0:
        sw = 1.0
    elif w < 0.0:
        sw = -1.0
    torque = -mur * fn * rstar * sw
    return fn, ft, torque, xi


@njit(cache=True)
def contact_forces(pos, vel, omega, radius, mass, inertia, width, depth,
                   pair_i, pair_j, bverts, bpose, bvel, has_bucket,
                   e_star, g_star, mu, mur, eta, gravity, dt, old_keys, old_springs):
    n = pos.shape[0]
    force = np.zeros((n, 2))
    torque = np.zeros(n)
    for k in range(n):
        force[k, 1] = -mass[k] * gravity

    # --- collect pair contacts
    npair = pair_i.shape[0]
    p_i = np.empty(npair, np.int64)
    p_j = np.empty(npair, np.int64)
    p_nx = np.empty(npair)
    p_ny = np.empty(npair)
    p_ov = np.empty(npair)
    m = 0
    for c in range(npair):
        i = pair_i[c]
        j = pair_j[c]
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        dist = math.sqrt(dx * dx + dy * dy)
        ov = radius[i] + radius[j] - dist
        if ov > 0.0 and dist > 0.0:
            p_i[m] = i
            p_j[m] = j
            p_nx[m] = dx / dist
            p_ny[m] = dy / dist
            p_ov[m] = ov
            m += 1
    npc = m

    # --- collect obstacle contacts: 0 floor, 1 left wall, 2 right wall, 3+k bucket segment k
    nseg = bverts.shape[0] - 1 if has_bucket else 0
    nobst = 3 + nseg
    cap = n * nobst  # each particle meets each obstacle at most once
    o_p = np.empty(cap, np.int64)
    o_id = np.empty(cap, np.int64)
    o_nx = np.empty(cap)
    o_ny = np.empty(cap)
    o_ov = np.empty(cap)
    o_vx = np.empty(cap)
    o_vy = np.empty(cap)
    o_w = np.empty(cap)
    o_cx = np.empty(cap)
    o_cy = np.empty(cap)
    m = 0
    for p in range(n):
        r = radius[p]
        for oid in range(nobst):
            if oid == 0:
                ov = r - (pos[p, 1] + depth)
                nx, ny = 0.0, -1.0
                vx = vy = w = 0.0
            elif oid == 1:
                ov = r - pos[p, 0]
                nx, ny = -1.0, 0.0
                vx = vy = w = 0.0
            elif oid == 2:
                ov = r - (width - pos[p, 0])
                nx, ny = 1.0, 0.0
                vx = vy = w = 0.0
            else:
                k = oid - 3
                ax, ay = bverts[k, 0], bverts[k, 1]
                ex, ey = bverts[k + 1, 0] - ax, bverts[k + 1, 1] - ay
                t = ((pos[p, 0] - ax) * ex + (pos[p, 1] - ay) * ey) / (ex * ex + ey * ey)
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                # a shared vertex belongs to the following segment
                if t >= 1.0 and k < nseg - 1:
                    continue
                qx = ax + t * ex
                qy = ay + t * ey
                dx = qx - pos[p, 0]
                dy = qy - pos[p, 1]
                dist = math.sqrt(dx * dx + dy * dy)
                ov = r - dist
                if not (ov > 0.0 and dist > 0.0):
                    continue
                nx, ny = dx / dist, dy / dist
                w = bvel[2]
                vx = bvel[0] - w * (qy - bpose[1])
                vy = bvel[1] + w * (qx - bpose[0])
            if ov > 0.0:
                o_p[m] = p
                o_id[m] = oid
                o_nx[m] = nx
                o_ny[m] = ny
                o_ov[m] = ov
                o_vx[m] = vx
                o_vy[m] = vy
                o_w[m] = w
                o_cx[m] = pos[p, 0] + nx * (r - ov)
                o_cy[m] = pos[p, 1] + ny * (r - ov)
                m += 1
    noc = m

    # rolling limiter: each contact removes at most its share of the relative spin
    count = np.zeros(n)
    for c in range(npc):
        count[p_i[c]] += 1.0
        count[p_j[c]] += 1.0
    for c in range(noc):
        count[o_p[c]] += 1.0

    keys = np.empty(npc + noc, np.int64)
    springs = np.empty(npc + noc)
    internal = np.zeros(2)
    pair_f = np.zeros((n, 2))
    fmax = 0.0
    q = 0

    for c in range(npc):
        i = p_i[c]
        j = p_j[c]
        nx, ny = p_nx[c], p_ny[c]
        tx, ty = -ny, nx
        ri, rj = radius[i], radius[j]
        rvx = vel[i, 0] - omega[i] * ri * ny - vel[j, 0] - omega[j] * rj * ny
        rvy = vel[i, 1] + omega[i] * ri * nx - vel[j, 1] + omega[j] * rj * nx
        vn = rvx * nx + rvy * ny
        vt = rvx * tx + rvy * ty
        rstar = ri * rj / (ri + rj)
        mstar = mass[i] * mass[j] / (mass[i] + mass[j])
        key = i * n + j
        q = _advance_to(old_keys, q, key)
        xi0 = old_springs[q] if q < old_keys.shape[0] and old_keys[q] == key else 0.0
        wrel = omega[i] - omega[j]
        fn, ft, tr, xi = _contact(p_ov[c], vn, vt, rstar, mstar, e_star, g_star, mu, mur, eta,
                                  xi0, dt, wrel)
        if dt > 0.0:
            lim = abs(wrel) / (dt * (count[i] / inertia[i] + count[j] / inertia[j]))
            if tr > lim:
                tr = lim
            elif tr < -lim:
                tr = -lim
        fx = -fn * nx + ft * tx
        fy = -fn * ny + ft * ty
        force[i, 0] += fx
        force[i, 1] += fy
        force[j, 0] -= fx
        force[j, 1] -= fy
        pair_f[i, 0] += fx
        pair_f[i, 1] += fy
        pair_f[j, 0] -= fx
        pair_f[j, 1] -= fy
        torque[i] += ri * ft + tr
        torque[j] += rj * ft - tr
        mag = math.sqrt(fx * fx + fy * fy)
        if mag > fmax:
            fmax = mag
        keys[c] = key
        springs[c] = xi
    for k in range(n):
        internal[0] += pair_f[k, 0]
        internal[1] += pair_f[k, 1]

    reaction = np.zeros(2)
    rtorque = 0.0
    base = n * n
    for c in range(noc):
        p = o_p[c]
        nx, ny = o_nx[c], o_ny[c]
        tx, ty = -ny, nx
        r = radius[p]
        rvx = vel[p, 0] - omega[p] * r * ny - o_vx[c]
        rvy = vel[p, 1] + omega[p] * r * nx - o_vy[c]
        vn = rvx * nx + rvy * ny
        vt = rvx * tx + rvy * ty
        key = base + p * nobst + o_id[c]
        q = _advance_to(old_keys, q, key)
        xi0 = old_springs[q] if q < old_keys.shape[0] and old_keys[q] == key else 0.0
        wrel = omega[p] - o_w[c]
        fn, ft, tr, xi = _contact(o_ov[c], vn, vt, r, mass[p], e_star, g_star, mu, mur, eta,
                                  xi0, dt, wrel)
        if dt > 0.0:
            lim = abs(wrel) / (dt * count[p] / inertia[p])
            if tr > lim:
                tr = lim
            elif tr < -lim:
                tr = -lim
        fx = -fn * nx + ft * tx
        fy = -fn * ny + ft * ty
        force[p, 0] += fx
        force[p, 1] += fy
        torque[p] += r * ft + tr
        if o_id[c] >= 3:
            reaction[0] -= fx
            reaction[1] -= fy
            rtorque += -((o_cx[c] - bpose[0]) * fy - (o_cy[c] - bpose[1]) * fx) - tr
        mag = math.sqrt(fx * fx + fy * fy)
        if mag > fmax:
            fmax = mag
        keys[npc + c] = key
        springs[npc + c] = xi
    return force, torque, reaction, rtorque, keys, springs, internal, fmax


@njit(cache=True)
def _world(local, x, y, a):
    c, s = math.cos(a), math.sin(a)
    out = np.empty_like(local)
    for k in range(local.shape[0]):
        out[k, 0] = x + c * local[k, 0] - s * local[k, 1]
        out[k, 1] = y + s * local[k, 0] + c * local[k, 1]
    return out


@njit(cache=True)
def integrate(pos, vel, omega, radius, mass, width, depth, pair_i, pair_j, ref_pos, skin,
              local, pose0, pose1, bvel, has_bucket, nsub, h,
              e_star, g_star, mu, mur, eta, gravity, keys, springs,
              blowup, quench, settle_speed):
    """Run up to ``nsub`` symplectic Euler steps of length ``h`` in place.

    With a bucket, sub-step ``k`` poses it at ``pose0 + (k / nsub)(pose1 -
    pose0)`` moving at ``bvel``.  With ``quench`` the run stops once every
    particle is slower than ``settle_speed`` and velocities are zeroed each
    time the kinetic energy passes a peak.  Returns the step count, the sum
    of the bucket reaction over the steps, the last force diagnostics, the
    final contact springs and neighbour list, and a status (0 ok, 1
    non-finite state, 2 speed above ``blowup``).
    """
    n = pos.shape[0]
    inertia = 0.5 * mass * radius * radius
    acc = np.zeros(2)
    reaction = np.zeros(2)
    rtorque = 0.0
    internal = np.zeros(2)
    fmax = 0.0
    prev_ke = 0.0
    pose = np.zeros(3)
    done = 0
    status = 0
    verts = np.zeros((2, 2))
    for k in range(nsub):
        if n >= 2:
            moved = 0.0
            for p in range(n):
                dx = pos[p, 0] - ref_pos[p, 0]
                dy = pos[p, 1] - ref_pos[p, 1]
                dd = math.sqrt(dx * dx + dy * dy)
                if dd > moved:
                    moved = dd
            if moved >= 0.5 * skin:
                pair_i, pair_j = neighbour_pairs(pos, radius, skin)
                ref_pos = pos.copy()
        if has_bucket:
            s = k / nsub
            for c in range(3):
                pose[c] = pose0[c] + s * (pose1[c] - pose0[c])
            verts = _world(local, pose[0], pose[1], pose[2])
        force, torque, reaction, rtorque, keys, springs, internal, fmax = contact_forces(
            pos, vel, omega, radius, mass, inertia, width, depth, pair_i, pair_j,
            verts, pose, bvel, has_bucket, e_star, g_star, mu, mur, eta, gravity, h,
            keys, springs)
        vmax = 0.0
        ke = 0.0
        finite = True
        for p in range(n):
            vel[p, 0] += h * force[p, 0] / mass[p]
            vel[p, 1] += h * force[p, 1] / mass[p]
            pos[p, 0] += h * vel[p, 0]
            pos[p, 1] += h * vel[p, 1]
            omega[p] += h * torque[p] / inertia[p]
            v2 = vel[p, 0] * vel[p, 0] + vel[p, 1] * vel[p, 1]
            if not (math.isfinite(pos[p, 0]) and math.isfinite(pos[p, 1]) and math.isfinite(v2)
                    and math.isfinite(omega[p])):
                finite = False
            if v2 > vmax:
                vmax = v2
            ke += 0.5 * mass[p] * v2 + 0.5 * inertia[p] * omega[p] * omega[p]
        acc += reaction
        done += 1
        if not finite:
            status = 1
            break
        vmax = math.sqrt(vmax)
        if vmax > blowup:
            status = 2
            break
        if quench:
            if vmax < settle_speed:
                break
            if ke < prev_ke:
                vel[:, :] = 0.0
                omega[:] = 0.0
                ke = 0.0
            prev_ke = ke
    return (done, acc, reaction, rtorque, internal, fmax, keys, springs,
            pair_i, pair_j, ref_pos, status)
