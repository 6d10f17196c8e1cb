"""Compiled planar multibody dynamics.

Generalized coordinates are ``[com_x, com_z, root_pitch, joint_1..joint_n]``:
the translational pair is the system centre of mass, which decouples the
mass matrix into a scalar total-mass block and an angular block. Link
Jacobians are accumulated down the tree, contacts are penalty springs at the
capsule end caps, and time stepping is leapfrog (kick-drift-kick).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# params vector layout, see RobotModel.arrays()
_G, _KN, _CN, _CT, _MU, _KLIM, _CLIM, _GROUND = range(8)


@njit(cache=True)
def _kinematics(q, qd, parent, joint_of, pa, ca, mass, phi, w, r, J, Jw, bias):
    """Link angles, centred COM offsets, translational/angular Jacobians and velocity-product terms."""
    nl = mass.shape[0]
    na = J.shape[2]
    J[:] = 0.0
    Jw[:] = 0.0
    phi[0] = q[2]
    w[0] = qd[2]
    r[0, 0] = 0.0
    r[0, 1] = 0.0
    bias[0, 0] = 0.0
    bias[0, 1] = 0.0
    Jw[0, 0] = 1.0
    for i in range(1, nl):
        p = parent[i]
        j = joint_of[i]
        phi[i] = phi[p] + q[3 + j]
        w[i] = w[p] + qd[3 + j]
        for k in range(na):
            Jw[i, k] = Jw[p, k]
        Jw[i, 1 + j] += 1.0
        cp = math.cos(phi[p])
        sp = math.sin(phi[p])
        ax = pa[i, 0] * cp + pa[i, 1] * sp
        az = -pa[i, 0] * sp + pa[i, 1] * cp
        ci = math.cos(phi[i])
        si = math.sin(phi[i])
        bx = ca[i, 0] * ci + ca[i, 1] * si
        bz = -ca[i, 0] * si + ca[i, 1] * ci
        r[i, 0] = r[p, 0] + ax - bx
        r[i, 1] = r[p, 1] + az - bz
        for k in range(na):
            J[i, 0, k] = J[p, 0, k] + az * Jw[p, k] - bz * Jw[i, k]
            J[i, 1, k] = J[p, 1, k] - ax * Jw[p, k] + bx * Jw[i, k]
        bias[i, 0] = bias[p, 0] - w[p] * w[p] * ax + w[i] * w[i] * bx
        bias[i, 1] = bias[p, 1] - w[p] * w[p] * az + w[i] * w[i] * bz

    total = 0.0
    for i in range(nl):
        total += mass[i]
    for d in range(2):
        s = 0.0
        sb = 0.0
        for i in range(nl):
            s += mass[i] * r[i, d]
            sb += mass[i] * bias[i, d]
        s /= total
        sb /= total
        for i in range(nl):
            r[i, d] -= s
            bias[i, d] -= sb
        for k in range(na):
            s = 0.0
            for i in range(nl):
                s += mass[i] * J[i, d, k]
            s /= total
            for i in range(nl):
                J[i, d, k] -= s
    return total


@njit(cache=True)
def _solve_spd(A, b, x):
    """Cholesky solve of a small symmetric positive definite system (A is overwritten)."""
    n = b.shape[0]
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0:
            s = 1e-300
        A[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= A[i, k] * x[k]
        x[i] = s / A[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= A[k, i] * x[k]
        x[i] = s / A[i, i]


@njit(cache=True)
def _dynamics(q, qd, tau, mass, inertia, half_len, radius, parent, joint_of, pa, ca,
              lower, upper, damping, params,
              phi, w, r, J, Jw, bias, Mth, rhs, xsol, qdd, cforce):
    """Generalized accelerations; accumulates per-link world contact forces; returns max penetration."""
    nl = mass.shape[0]
    na = J.shape[2]
    nj = na - 1
    total = _kinematics(q, qd, parent, joint_of, pa, ca, mass, phi, w, r, J, Jw, bias)

    for a in range(na):
        rhs[a] = 0.0
        for b in range(na):
            Mth[a, b] = 0.0
    for i in range(nl):
        m = mass[i]
        for a in range(na):
            ja0 = J[i, 0, a]
            ja1 = J[i, 1, a]
            rhs[a] -= m * (ja0 * bias[i, 0] + ja1 * bias[i, 1])
            for b in range(a, na):
                Mth[a, b] += m * (ja0 * J[i, 0, b] + ja1 * J[i, 1, b]) + inertia[i] * Jw[i, a] * Jw[i, b]
    for a in range(na):
        for b in range(a):
            Mth[a, b] = Mth[b, a]

    klim = params[_KLIM]
    clim = params[_CLIM]
    for j in range(nj):
        qj = q[3 + j]
        vj = qd[3 + j]
        t = tau[j] - damping[j] * vj
        if qj < lower[j]:
            t += klim * (lower[j] - qj) - clim * vj
        elif qj > upper[j]:
            t += klim * (upper[j] - qj) - clim * vj
        rhs[1 + j] += t

    fx_tot = 0.0
    fz_tot = -total * params[_G]
    maxpen = 0.0
    if params[_GROUND] > 0.0:
        kn = params[_KN]
        cn = params[_CN]
        ct = params[_CT]
        mu = params[_MU]
        for i in range(nl):
            cx = q[0] + r[i, 0]
            cz = q[1] + r[i, 1]
            vcx = qd[0]
            vcz = qd[1]
            for k in range(na):
                vcx += J[i, 0, k] * qd[2 + k]
                vcz += J[i, 1, k] * qd[2 + k]
            sx = math.sin(phi[i]) * half_len[i]
            sz = math.cos(phi[i]) * half_len[i]
            for side in (-1.0, 1.0):
                ez = cz + side * sz
                pen = radius[i] - ez
                if pen <= 0.0:
                    continue
                if pen > maxpen:
                    maxpen = pen
                dx = side * sx
                dz = side * sz - radius[i]
                vx = vcx + w[i] * dz
                vz = vcz - w[i] * dx
                fn = kn * pen - cn * vz
                if fn < 0.0:
                    fn = 0.0
                ft = -ct * vx
                cap = mu * fn
                if ft > cap:
                    ft = cap
                elif ft < -cap:
                    ft = -cap
                fx_tot += ft
                fz_tot += fn
                moment = dz * ft - dx * fn
                for k in range(na):
                    rhs[k] += J[i, 0, k] * ft + J[i, 1, k] * fn + Jw[i, k] * moment
                cforce[i, 0] += ft
                cforce[i, 1] += fn

    qdd[0] = fx_tot / total
    qdd[1] = fz_tot / total
    _solve_spd(Mth, rhs, xsol)
    for a in range(na):
        qdd[2 + a] = xsol[a]
    return maxpen


@njit(cache=True)
def simulate(q, qd, tau, dt, substeps, mass, inertia, half_len, radius, parent, joint_of,
             pa, ca, lower, upper, damping, params, cforce_out, maxpen_out):
    """Advance every row of ``q``/``qd`` in place by ``substeps`` leapfrog steps of ``dt``.

    ``cforce_out`` receives the substep-averaged world contact force per link
    and ``maxpen_out`` the largest penetration seen.
    """
    n_env, nq = q.shape
    nl = mass.shape[0]
    na = nq - 2
    phi = np.empty(nl)
    w = np.empty(nl)
    r = np.empty((nl, 2))
    J = np.empty((nl, 2, na))
    Jw = np.empty((nl, na))
    bias = np.empty((nl, 2))
    Mth = np.empty((na, na))
    rhs = np.empty(na)
    xsol = np.empty(na)
    acc = np.empty(nq)
    vh = np.empty(nq)
    scratch = np.zeros((nl, 2))
    for n in range(n_env):
        for i in range(nl):
            cforce_out[n, i, 0] = 0.0
            cforce_out[n, i, 1] = 0.0
        pen = 0.0
        for s in range(substeps):
            # the opening kick uses forces at the full-step velocity; reusing the
            # closing kick's half-step forces lets stiff contact damping lock into
            # a limit cycle with the period of one control step
            scratch[:] = 0.0
            p = _dynamics(q[n], qd[n], tau[n], mass, inertia, half_len, radius, parent, joint_of,
                          pa, ca, lower, upper, damping, params,
                          phi, w, r, J, Jw, bias, Mth, rhs, xsol, acc, scratch)
            if p > pen:
                pen = p
            for k in range(nq):
                vh[k] = qd[n, k] + 0.5 * dt * acc[k]
                q[n, k] += dt * vh[k]
            p = _dynamics(q[n], vh, tau[n], mass, inertia, half_len, radius, parent, joint_of,
                          pa, ca, lower, upper, damping, params,
                          phi, w, r, J, Jw, bias, Mth, rhs, xsol, acc, cforce_out[n])
            if p > pen:
                pen = p
            for k in range(nq):
                qd[n, k] = vh[k] + 0.5 * dt * acc[k]
        for i in range(nl):
            cforce_out[n, i, 0] /= substeps
            cforce_out[n, i, 1] /= substeps
        maxpen_out[n] = pen


@njit(cache=True)
def body_states(q, qd, mass, parent, joint_of, pa, ca, com, vel, phi_out, w_out):
    """World COM position/velocity, pitch and pitch rate of every link, per row of ``q``."""
    n_env, nq = q.shape
    nl = mass.shape[0]
    na = nq - 2
    phi = np.empty(nl)
    w = np.empty(nl)
    r = np.empty((nl, 2))
    J = np.empty((nl, 2, na))
    Jw = np.empty((nl, na))
    bias = np.empty((nl, 2))
    for n in range(n_env):
        _kinematics(q[n], qd[n], parent, joint_of, pa, ca, mass, phi, w, r, J, Jw, bias)
        for i in range(nl):
            com[n, i, 0] = q[n, 0] + r[i, 0]
            com[n, i, 1] = q[n, 1] + r[i, 1]
            vx = qd[n, 0]
            vz = qd[n, 1]
            for k in range(na):
                vx += J[i, 0, k] * qd[n, 2 + k]
                vz += J[i, 1, k] * qd[n, 2 + k]
            vel[n, i, 0] = vx
            vel[n, i, 1] = vz
            phi_out[n, i] = phi[i]
            w_out[n, i] = w[i]


@njit(cache=True)
def place_com(q_angles, mass, parent, joint_of, pa, ca, rel):
    """COM offsets of each link relative to the system COM for the given angles."""
    n_env = q_angles.shape[0]
    nl = mass.shape[0]
    na = q_angles.shape[1]
    nq = na + 2
    qq = np.zeros(nq)
    zero = np.zeros(nq)
    phi = np.empty(nl)
    w = np.empty(nl)
    r = np.empty((nl, 2))
    J = np.empty((nl, 2, na))
    Jw = np.empty((nl, na))
    bias = np.empty((nl, 2))
    for n in range(n_env):
        for k in range(na):
            qq[2 + k] = q_angles[n, k]
        _kinematics(qq, zero, parent, joint_of, pa, ca, mass, phi, w, r, J, Jw, bias)
        for i in range(nl):
            rel[n, i, 0] = r[i, 0]
            rel[n, i, 1] = r[i, 1]
