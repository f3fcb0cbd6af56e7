"""Numba kernels for the collision-avoidance core.

Lines are stored as float64 rows [px, py, dx, dy]: a point in velocity
space and a unit direction. The permitted half-plane of a line is the
left side of the directed line, {v : det(d, v - p) >= 0}.

All kernels are deterministic and allocation-light; the python wrappers
in sim.py own validation and error reporting.
"""

import numpy as np
from numba import njit

EPS = 1e-10

GOAL_SEEKING = 0
FOLLOWER = 1


@njit(cache=True)
def _det(ax, ay, bx, by):
    return ax * by - ay * bx


@njit(cache=True)
def _lp1(lines, n_lines, line_no, radius, opt_x, opt_y, direction_opt, result):
    """Optimize along one line boundary subject to prior lines and the
    speed disc. Returns False when the segment on the line is empty."""
    px = lines[line_no, 0]
    py = lines[line_no, 1]
    dx = lines[line_no, 2]
    dy = lines[line_no, 3]

    dot = px * dx + py * dy
    disc = dot * dot + radius * radius - (px * px + py * py)
    if disc < 0.0:
        # the whole line lies outside the speed disc
        return False
    sq = np.sqrt(disc)
    t_left = -dot - sq
    t_right = -dot + sq

    for i in range(line_no):
        qx = lines[i, 0]
        qy = lines[i, 1]
        ex = lines[i, 2]
        ey = lines[i, 3]
        denom = _det(dx, dy, ex, ey)
        numer = _det(ex, ey, px - qx, py - qy)
        if abs(denom) <= EPS:
            if numer < 0.0:
                return False
            continue
        t = numer / denom
        if denom >= 0.0:
            if t < t_right:
                t_right = t
        else:
            if t > t_left:
                t_left = t
        if t_left > t_right:
            return False

    if direction_opt:
        if opt_x * dx + opt_y * dy > 0.0:
            t = t_right
        else:
            t = t_left
    else:
        t = dx * (opt_x - px) + dy * (opt_y - py)
        if t < t_left:
            t = t_left
        elif t > t_right:
            t = t_right
    result[0] = px + t * dx
    result[1] = py + t * dy
    return True


@njit(cache=True)
def _lp2(lines, n_lines, radius, opt_x, opt_y, direction_opt, result):
    """Incremental 2-D LP over half-planes and the speed disc.

    Returns n_lines on success; on failure the index of the first line
    that admits no feasible point, with `result` holding the optimum of
    the lines before it."""
    if direction_opt:
        # opt is a unit direction: start at the disc rim
        result[0] = opt_x * radius
        result[1] = opt_y * radius
    elif opt_x * opt_x + opt_y * opt_y > radius * radius:
        n = np.sqrt(opt_x * opt_x + opt_y * opt_y)
        result[0] = opt_x / n * radius
        result[1] = opt_y / n * radius
    else:
        result[0] = opt_x
        result[1] = opt_y

    for i in range(n_lines):
        if _det(lines[i, 2], lines[i, 3],
                lines[i, 0] - result[0], lines[i, 1] - result[1]) > 0.0:
            tx = result[0]
            ty = result[1]
            if not _lp1(lines, n_lines, i, radius, opt_x, opt_y,
                        direction_opt, result):
                result[0] = tx
                result[1] = ty
                return i
    return n_lines


@njit(cache=True)
def _lp3(lines, n_lines, num_fixed, begin, radius, result):
    """Minimize the maximum signed penetration over the relaxable lines
    (those at index >= num_fixed); the first num_fixed lines stay hard."""
    distance = 0.0
    proj = np.empty((n_lines + num_fixed, 4))
    for i in range(begin, n_lines):
        if _det(lines[i, 2], lines[i, 3],
                lines[i, 0] - result[0], lines[i, 1] - result[1]) > distance:
            for k in range(num_fixed):
                proj[k, 0] = lines[k, 0]
                proj[k, 1] = lines[k, 1]
                proj[k, 2] = lines[k, 2]
                proj[k, 3] = lines[k, 3]
            m = num_fixed
            for j in range(num_fixed, i):
                denom = _det(lines[i, 2], lines[i, 3], lines[j, 2], lines[j, 3])
                if abs(denom) <= EPS:
                    if lines[i, 2] * lines[j, 2] + lines[i, 3] * lines[j, 3] > 0.0:
                        # parallel with same orientation: j dominates i or vice versa
                        continue
                    ppx = 0.5 * (lines[i, 0] + lines[j, 0])
                    ppy = 0.5 * (lines[i, 1] + lines[j, 1])
                else:
                    t = _det(lines[j, 2], lines[j, 3],
                             lines[i, 0] - lines[j, 0],
                             lines[i, 1] - lines[j, 1]) / denom
                    ppx = lines[i, 0] + t * lines[i, 2]
                    ppy = lines[i, 1] + t * lines[i, 3]
                ddx = lines[j, 2] - lines[i, 2]
                ddy = lines[j, 3] - lines[i, 3]
                dn = np.sqrt(ddx * ddx + ddy * ddy)
                proj[m, 0] = ppx
                proj[m, 1] = ppy
                proj[m, 2] = ddx / dn
                proj[m, 3] = ddy / dn
                m += 1
            tx = result[0]
            ty = result[1]
            fail = _lp2(proj, m, radius, -lines[i, 3], lines[i, 2], True, result)
            if fail < m:
                # should not happen barring degeneracy; keep previous point
                result[0] = tx
                result[1] = ty
            distance = _det(lines[i, 2], lines[i, 3],
                            lines[i, 0] - result[0], lines[i, 1] - result[1])


@njit(cache=True)
def _avoidance_line(px_rel, py_rel, vx_rel, vy_rel, vx_ego, vy_ego,
                    combined_r, t_h, dt, share, out):
    """Half-plane constraint against one neighbor: truncated velocity
    obstacle, minimal escape vector u, line offset by share * u."""
    dist_sq = px_rel * px_rel + py_rel * py_rel
    cr_sq = combined_r * combined_r
    if dist_sq > cr_sq:
        inv_th = 1.0 / t_h
        wx = vx_rel - inv_th * px_rel
        wy = vy_rel - inv_th * py_rel
        w_len_sq = wx * wx + wy * wy
        dot1 = wx * px_rel + wy * py_rel
        if dot1 < 0.0 and dot1 * dot1 > cr_sq * w_len_sq:
            # project on the truncating arc
            w_len = np.sqrt(w_len_sq)
            uwx = wx / w_len
            uwy = wy / w_len
            dirx = uwy
            diry = -uwx
            u_mag = combined_r * inv_th - w_len
            ux = u_mag * uwx
            uy = u_mag * uwy
        else:
            # project on the nearer leg of the cone
            leg = np.sqrt(dist_sq - cr_sq)
            if _det(px_rel, py_rel, wx, wy) > 0.0:
                dirx = (px_rel * leg - py_rel * combined_r) / dist_sq
                diry = (px_rel * combined_r + py_rel * leg) / dist_sq
            else:
                dirx = -(px_rel * leg + py_rel * combined_r) / dist_sq
                diry = -(-px_rel * combined_r + py_rel * leg) / dist_sq
            dot2 = vx_rel * dirx + vy_rel * diry
            ux = dot2 * dirx - vx_rel
            uy = dot2 * diry - vy_rel
    else:
        # already overlapping: escape within one time step
        inv_dt = 1.0 / dt
        wx = vx_rel - inv_dt * px_rel
        wy = vy_rel - inv_dt * py_rel
        w_len = np.sqrt(wx * wx + wy * wy)
        if w_len < EPS:
            uwx = 1.0
            uwy = 0.0
            w_len = 0.0
        else:
            uwx = wx / w_len
            uwy = wy / w_len
        dirx = uwy
        diry = -uwx
        u_mag = combined_r * inv_dt - w_len
        ux = u_mag * uwx
        uy = u_mag * uwy
    out[0] = vx_ego + share * ux
    out[1] = vy_ego + share * uy
    out[2] = dirx
    out[3] = diry


@njit(cache=True)
def _segment_closest(ax, ay, bx, by, px, py):
    ex = bx - ax
    ey = by - ay
    denom = ex * ex + ey * ey
    if denom < EPS:
        return ax, ay
    t = ((px - ax) * ex + (py - ay) * ey) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return ax + t * ex, ay + t * ey


@njit(cache=True)
def _obstacle_line(nx, ny, dist, radius, t_h, dt, out):
    """Half-plane constraint against a static segment: the approach speed
    along the inward normal is capped so the gap closes no sooner than
    the time horizon; an overlapping agent is pushed out within dt.

    nx, ny is the unit normal from the segment toward the agent."""
    if dist >= radius:
        bound = -(dist - radius) / t_h
    else:
        bound = (radius - dist) / dt
    # permitted {v : n . v >= bound}
    out[0] = bound * nx
    out[1] = bound * ny
    out[2] = ny
    out[3] = -nx


@njit(cache=True)
def _visibility(i, pos, head, ndist_i, fov_i, last_seen, t, window, out):
    """Geometric field-of-view test plus short-term memory of recently
    seen agents. Updates last_seen in place for geometric hits."""
    n = pos.shape[0]
    for j in range(n):
        out[j] = False
        if j == i:
            continue
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        d = np.sqrt(dx * dx + dy * dy)
        geom = False
        if d <= ndist_i:
            if d < 1e-12:
                geom = True
            else:
                c = (head[i, 0] * dx + head[i, 1] * dy) / d
                if c > 1.0:
                    c = 1.0
                elif c < -1.0:
                    c = -1.0
                geom = np.arccos(c) <= fov_i + 1e-9
        if geom:
            last_seen[i, j] = t
        if last_seen[i, j] >= 0 and t - last_seen[i, j] <= window:
            out[j] = True


@njit(cache=True)
def _headings(pos, vel, goal, head, eps):
    """Unit heading per agent: normalized velocity above eps speed, else
    the direction toward the goal, else the previous heading."""
    n = pos.shape[0]
    for i in range(n):
        sx = vel[i, 0]
        sy = vel[i, 1]
        s = np.sqrt(sx * sx + sy * sy)
        if s > eps:
            head[i, 0] = sx / s
            head[i, 1] = sy / s
        else:
            gx = goal[i, 0] - pos[i, 0]
            gy = goal[i, 1] - pos[i, 1]
            g = np.sqrt(gx * gx + gy * gy)
            if g > eps:
                head[i, 0] = gx / g
                head[i, 1] = gy / g
            # else: keep previous heading


@njit(cache=True)
def _step_core(pos, vel, head, radius, max_speed, pref_speed, goal,
               fov, ndist, thoriz, btype, btarget, boffset,
               obstacles, dt, window, share, goal_tol, heading_eps,
               last_seen, t, new_pos, new_vel, ego_visible):
    """One synchronous simulation step. Returns -1 on success or the
    index of an agent coincident with another."""
    n = pos.shape[0]
    n_obs = obstacles.shape[0]
    _headings(pos, vel, goal, head, heading_eps)

    visible = np.zeros(n, dtype=np.bool_)
    max_lines = n_obs + n
    lines = np.empty((max_lines, 4))
    tmp = np.empty(4)

    for i in range(n):
        _visibility(i, pos, head, ndist[i], fov[i], last_seen, t, window, visible)
        if i == 0:
            for j in range(n):
                ego_visible[j] = visible[j]

        # preferred velocity
        if btype[i] == FOLLOWER:
            tx = pos[btarget[i], 0] + boffset[i, 0]
            ty = pos[btarget[i], 1] + boffset[i, 1]
        else:
            tx = goal[i, 0]
            ty = goal[i, 1]
        dxg = tx - pos[i, 0]
        dyg = ty - pos[i, 1]
        dg = np.sqrt(dxg * dxg + dyg * dyg)
        if dg <= goal_tol:
            vpx = 0.0
            vpy = 0.0
        else:
            sp = pref_speed[i]
            if dg / dt < sp:
                sp = dg / dt
            vpx = dxg / dg * sp
            vpy = dyg / dg * sp

        n_lines = 0
        # static obstacles first: they stay hard in the fallback solve
        for k in range(n_obs):
            cx, cy = _segment_closest(obstacles[k, 0], obstacles[k, 1],
                                      obstacles[k, 2], obstacles[k, 3],
                                      pos[i, 0], pos[i, 1])
            ox = pos[i, 0] - cx
            oy = pos[i, 1] - cy
            od = np.sqrt(ox * ox + oy * oy)
            if od > ndist[i] or od < EPS:
                continue
            _obstacle_line(ox / od, oy / od, od, radius[i],
                           thoriz[i], dt, tmp)
            lines[n_lines, 0] = tmp[0]
            lines[n_lines, 1] = tmp[1]
            lines[n_lines, 2] = tmp[2]
            lines[n_lines, 3] = tmp[3]
            n_lines += 1
        num_fixed = n_lines

        for j in range(n):
            if not visible[j]:
                continue
            rx = pos[j, 0] - pos[i, 0]
            ry = pos[j, 1] - pos[i, 1]
            if rx * rx + ry * ry < 1e-18:
                return i
            _avoidance_line(rx, ry,
                            vel[i, 0] - vel[j, 0], vel[i, 1] - vel[j, 1],
                            vel[i, 0], vel[i, 1],
                            radius[i] + radius[j], thoriz[i], dt, share, tmp)
            lines[n_lines, 0] = tmp[0]
            lines[n_lines, 1] = tmp[1]
            lines[n_lines, 2] = tmp[2]
            lines[n_lines, 3] = tmp[3]
            n_lines += 1

        res = np.empty(2)
        fail = _lp2(lines, n_lines, max_speed[i], vpx, vpy, False, res)
        if fail < n_lines:
            _lp3(lines, n_lines, num_fixed, fail, max_speed[i], res)
        new_vel[i, 0] = res[0]
        new_vel[i, 1] = res[1]
        new_pos[i, 0] = pos[i, 0] + res[0] * dt
        new_pos[i, 1] = pos[i, 1] + res[1] * dt

    for i in range(n):
        pos[i, 0] = new_pos[i, 0]
        pos[i, 1] = new_pos[i, 1]
        vel[i, 0] = new_vel[i, 0]
        vel[i, 1] = new_vel[i, 1]
    _headings(pos, vel, goal, head, heading_eps)
    return -1


@njit(cache=True)
def _rollout_core(pos, vel, head, radius, max_speed, pref_speed, goal,
                  fov, ndist, thoriz, btype, btarget, boffset,
                  obstacles, dt, substeps, window, share, goal_tol,
                  heading_eps, total_steps, traj, ego_vis):
    """Run total_steps synchronous steps of duration dt, each integrated
    as `substeps` micro-steps, recording end-of-step positions and the
    ego's per-step visible set (union over micro-steps). Returns -1 or a
    coincident-agent index."""
    n = pos.shape[0]
    last_seen = np.full((n, n), -1, dtype=np.int64)
    new_pos = np.empty((n, 2))
    new_vel = np.empty((n, 2))
    ego_visible = np.zeros(n, dtype=np.bool_)
    micro_dt = dt / substeps
    micro_window = window * substeps
    for t in range(total_steps):
        for s in range(substeps):
            bad = _step_core(pos, vel, head, radius, max_speed, pref_speed,
                             goal, fov, ndist, thoriz, btype, btarget,
                             boffset, obstacles, micro_dt, micro_window,
                             share, goal_tol, heading_eps, last_seen,
                             t * substeps + s, new_pos, new_vel, ego_visible)
            if bad >= 0:
                return bad
            for j in range(n):
                if ego_visible[j]:
                    ego_vis[t, j] = True
        for i in range(n):
            traj[i, t, 0] = pos[i, 0]
            traj[i, t, 1] = pos[i, 1]
    return -1
