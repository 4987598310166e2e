"""Jitted segment integrator (optional, used when numba is importable).

The pure-numpy stepper in lindblad.py spends most of its time in per-call
overhead at these matrix sizes (~80x80), so the hot loop is duplicated here
as a numba kernel operating on plain arrays: one call integrates a state
stack across one output segment.  The model is marshaled once per run into

- ``g0``            (B,d,d)  drift matrices -iH_static - 1/2 sum r o+o
- drive terms       flat CSR-style index/value updates with exp(i(w t - phi))
                    carriers (one entry per model x term)
- jump terms        uniform shift form: out[i,s,j,t] += r wm[i] wm[j]
                    q[s,a] conj(q[t,b]) y[i+delta, a, j+delta, b] with the
                    qubit factor q stored as <=2 nonzero entries

Numerics (tableau, controller, re-symmetrization) mirror the numpy path;
results agree to integration tolerance (floating summation order differs,
so bitwise equality holds within a path, not across paths).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


# Dormand-Prince 5(4) coefficients (duplicated from lindblad for jit literals)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


@njit(cache=True)
def _rhs(y, t, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
         j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, out):
    b, d, _ = y.shape
    mbuf[:, :, :] = g0
    for e in range(d_model.shape[0]):
        k = d_model[e]
        c = np.exp(1j * (d_omega[e] * t - d_phase[e]))
        mk = mbuf[k].reshape(d * d)
        for p in range(d_ptr[e], d_ptr[e + 1]):
            mk[d_idx[p]] += c * d_val[p]
    for k in range(b):
        w = np.dot(mbuf[k], y[k])
        ok = out[k]
        for i in range(d):
            for j in range(d):
                ok[i, j] = w[i, j] + np.conj(w[j, i])
    y5 = y.reshape(b, nfock, qdim, nfock, qdim)
    o5 = out.reshape(b, nfock, qdim, nfock, qdim)
    for jt in range(j_delta.shape[0]):
        delta = j_delta[jt]
        lo = 1 if delta < 0 else 0
        hi = nfock - 1 if delta > 0 else nfock
        for k in range(b):
            r = j_rate[jt, k]
            if r == 0.0:
                continue
            for z1 in range(2):
                v1 = j_qv[jt, z1]
                if v1 == 0:
                    continue
                s = j_qs[jt, z1]
                a = j_qa[jt, z1]
                for z2 in range(2):
                    v2 = j_qv[jt, z2]
                    if v2 == 0:
                        continue
                    tq = j_qs[jt, z2]
                    bb = j_qa[jt, z2]
                    cf = r * (v1 * np.conj(v2))
                    for i in range(lo, hi):
                        ci = cf * j_wm[jt, i]
                        for j2 in range(lo, hi):
                            o5[k, i, s, j2, tq] += ci * j_wm[jt, j2] * y5[k, i + delta, a, j2 + delta, bb]


@njit(cache=True)
def _axpyn(out, y, k, h, c1, k1, c2, k2, c3, k3, c4, k4, c5, k5, n_terms):
    flat_out = out.reshape(-1)
    flat_y = y.reshape(-1)
    f1 = k[k1].reshape(-1)
    f2 = k[k2].reshape(-1)
    f3 = k[k3].reshape(-1)
    f4 = k[k4].reshape(-1)
    f5 = k[k5].reshape(-1)
    n = flat_y.shape[0]
    for i in range(n):
        acc = c1 * f1[i]
        if n_terms > 1:
            acc += c2 * f2[i]
        if n_terms > 2:
            acc += c3 * f3[i]
        if n_terms > 3:
            acc += c4 * f4[i]
        if n_terms > 4:
            acc += c5 * f5[i]
        flat_out[i] = flat_y[i] + h * acc


@njit(cache=True)
def _segment(y, t0, t1, ctrl, max_step, rtol, atol, safety, min_factor, max_factor,
             h_floor, fixed_h,
             g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
             j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim,
             kbuf, mbuf, ybuf, y5buf):
    """Advance y in place from t0 to t1.  ctrl = [h, err_prev, steps,
    rejected, rhs_evals, h_min, h_max, raw_residual].  Returns 0, or 1 on
    step underflow."""
    b, d, _ = y.shape
    t = t0
    h = ctrl[0]
    err_prev = ctrl[1]
    have_fsal = False
    n_fixed = 0
    if fixed_h > 0.0:
        n_fixed = int(round((t1 - t0) / fixed_h))
    step_index = 0
    while True:
        if fixed_h > 0.0:
            if step_index >= n_fixed:
                break
            h = fixed_h
        else:
            if t >= t1 - 1e-15 * (1.0 if t1 < 1.0 else t1):
                break
            if h > max_step:
                h = max_step
            if h > t1 - t:
                h = t1 - t
            if h < h_floor:
                return 1

        if not have_fsal:
            _rhs(y, t, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
                 j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, kbuf[0])
            ctrl[4] += 1
        _axpyn(ybuf, y, kbuf, h, _A21, 0, 0.0, 0, 0.0, 0, 0.0, 0, 0.0, 0, 1)
        _rhs(ybuf, t + _C2 * h, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
             j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, kbuf[1])
        _axpyn(ybuf, y, kbuf, h, _A31, 0, _A32, 1, 0.0, 0, 0.0, 0, 0.0, 0, 2)
        _rhs(ybuf, t + _C3 * h, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
             j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, kbuf[2])
        _axpyn(ybuf, y, kbuf, h, _A41, 0, _A42, 1, _A43, 2, 0.0, 0, 0.0, 0, 3)
        _rhs(ybuf, t + _C4 * h, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
             j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, kbuf[3])
        _axpyn(ybuf, y, kbuf, h, _A51, 0, _A52, 1, _A53, 2, _A54, 3, 0.0, 0, 4)
        _rhs(ybuf, t + _C5 * h, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
             j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, kbuf[4])
        _axpyn(ybuf, y, kbuf, h, _A61, 0, _A62, 1, _A63, 2, _A64, 3, _A65, 4, 5)
        _rhs(ybuf, t + h, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
             j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, kbuf[5])
        # 5th-order solution (b2 = 0)
        flat5 = y5buf.reshape(-1)
        fy = y.reshape(-1)
        f0 = kbuf[0].reshape(-1)
        f2 = kbuf[2].reshape(-1)
        f3 = kbuf[3].reshape(-1)
        f4 = kbuf[4].reshape(-1)
        f5 = kbuf[5].reshape(-1)
        for i in range(fy.shape[0]):
            flat5[i] = fy[i] + h * (_B1 * f0[i] + _B3 * f2[i] + _B4 * f3[i]
                                    + _B5 * f4[i] + _B6 * f5[i])
        _rhs(y5buf, t + h, g0, d_model, d_omega, d_phase, d_ptr, d_idx, d_val,
             j_delta, j_wm, j_rate, j_qs, j_qa, j_qv, nfock, qdim, mbuf, kbuf[6])
        ctrl[4] += 6

        accept = True
        if fixed_h <= 0.0:
            # worst per-run scaled RMS error
            f6 = kbuf[6].reshape(-1)
            per = d * d
            err = 0.0
            for k in range(b):
                acc = 0.0
                base = k * per
                for i in range(per):
                    e = h * (_E1 * f0[base + i] + _E3 * f2[base + i] + _E4 * f3[base + i]
                             + _E5 * f4[base + i] + _E6 * f5[base + i] + _E7 * f6[base + i])
                    ya = abs(fy[base + i])
                    yb = abs(flat5[base + i])
                    sc = atol + rtol * (ya if ya > yb else yb)
                    q = abs(e) / sc
                    acc += q * q
                run_err = np.sqrt(acc / per)
                if run_err > err:
                    err = run_err
            if err <= 1.0:
                fac = safety * (max(err, 1e-16) ** -0.17) * (err_prev ** 0.04)
                if fac > max_factor:
                    fac = max_factor
                if fac < min_factor:
                    fac = min_factor
                err_prev = max(err, 1e-4)
                if h < ctrl[5]:
                    ctrl[5] = h
                if h > ctrl[6]:
                    ctrl[6] = h
                t = t + h
                h = h * fac
            else:
                accept = False
                ctrl[3] += 1
                fac = safety * (err ** -0.2)
                if fac > 1.0:
                    fac = 1.0
                if fac < min_factor:
                    fac = min_factor
                h = h * fac
                have_fsal = False
        else:
            step_index += 1
            t = t0 + step_index * fixed_h

        if accept:
            ctrl[2] += 1
            have_fsal = True
            # raw Hermiticity residual, then re-symmetrize into y
            resid = 0.0
            for k in range(b):
                w5 = y5buf[k]
                yk = y[k]
                for i in range(d):
                    for j in range(i, d):
                        vij = w5[i, j]
                        vji = w5[j, i]
                        rr = abs(vij - np.conj(vji))
                        if rr > resid:
                            resid = rr
                        avg = 0.5 * (vij + np.conj(vji))
                        yk[i, j] = avg
                        yk[j, i] = np.conj(avg)
            ctrl[7] = resid
            kbuf[0][:, :, :] = kbuf[6]

    ctrl[0] = h
    ctrl[1] = err_prev
    return 0
