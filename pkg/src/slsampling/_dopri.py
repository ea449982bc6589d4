"""Compiled Dormand-Prince 5(4) kernel for -u'' + q(x) u = lam u.

The potential on a segment is a piecewise polynomial in local power form
(``bp`` breakpoints, ``cf`` coefficients highest order first, the layout of
``scipy.interpolate.PPoly``).  Everything here works on plain floats and
arrays so it can run under numba with the GIL released.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAXSTEPS = 3

_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0

_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (-71.0 / 57600.0, 71.0 / 16695.0, -71.0 / 1920.0,
                                17253.0 / 339200.0, -22.0 / 525.0, 1.0 / 40.0)

# continuous extension (Shampine), rows are stages, columns powers theta^1..theta^4
_P = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
     69997945.0 / 29380423.0],
])

MAX_STEPS = 5_000_000


@njit(cache=True, nogil=True)
def ppoly_eval(bp, cf, x):
    n = bp.shape[0] - 1
    if x <= bp[0]:
        i = 0
    elif x >= bp[n]:
        i = n - 1
    else:
        i = np.searchsorted(bp, x, side="right") - 1
        if i > n - 1:
            i = n - 1
    t = x - bp[i]
    acc = 0.0
    for k in range(cf.shape[0]):
        acc = acc * t + cf[k, i]
    return acc


@njit(cache=True, nogil=True)
def _initial_step(span, lam, rtol):
    # oscillation length ~ 1/sqrt|lam|; order-5 local error ~ (h*sqrt|lam|)^5
    w = np.sqrt(abs(lam)) + 1.0
    h = 0.2 * rtol ** 0.2 / w
    return min(h, abs(span))


@njit(cache=True, nogil=True)
def integrate(bp, cf, lam, x0, u0, up0, x1, rtol, atol, xout, uout, upout):
    """Integrate from x0 to x1 (either direction).

    ``xout`` must be sorted in the direction of integration and lie within
    [x0, x1]; the state is written into ``uout``/``upout`` by dense output.
    Returns (u1, up1, status, x_fail, nsteps).
    """
    span = x1 - x0
    u, up, x = u0, up0, x0
    if span == 0.0:
        for j in range(xout.shape[0]):
            uout[j] = u
            upout[j] = up
        return u, up, STATUS_OK, x, 0
    direction = 1.0 if span > 0 else -1.0
    h = _initial_step(span, lam, rtol)
    hmin = 16.0 * np.finfo(np.float64).eps * (abs(x0) + abs(x1) + 1.0)
    jout = 0
    nout = xout.shape[0]
    while jout < nout and direction * (xout[jout] - x0) <= 0.0:
        uout[jout] = u
        upout[jout] = up
        jout += 1

    k1u = up
    k1p = (ppoly_eval(bp, cf, x) - lam) * u
    nsteps = 0
    while direction * (x1 - x) > 0.0:
        if nsteps > MAX_STEPS:
            return u, up, STATUS_MAXSTEPS, x, nsteps
        remaining = abs(x1 - x)
        last = False
        if h >= remaining:
            h = remaining
            last = True
        if h < hmin:
            return u, up, STATUS_UNDERFLOW, x, nsteps
        hs = direction * h

        yu = u + hs * _A21 * k1u
        yp = up + hs * _A21 * k1p
        k2u = yp
        k2p = (ppoly_eval(bp, cf, x + _C2 * hs) - lam) * yu

        yu = u + hs * (_A31 * k1u + _A32 * k2u)
        yp = up + hs * (_A31 * k1p + _A32 * k2p)
        k3u = yp
        k3p = (ppoly_eval(bp, cf, x + _C3 * hs) - lam) * yu

        yu = u + hs * (_A41 * k1u + _A42 * k2u + _A43 * k3u)
        yp = up + hs * (_A41 * k1p + _A42 * k2p + _A43 * k3p)
        k4u = yp
        k4p = (ppoly_eval(bp, cf, x + _C4 * hs) - lam) * yu

        yu = u + hs * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u)
        yp = up + hs * (_A51 * k1p + _A52 * k2p + _A53 * k3p + _A54 * k4p)
        k5u = yp
        k5p = (ppoly_eval(bp, cf, x + _C5 * hs) - lam) * yu

        yu = u + hs * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u)
        yp = up + hs * (_A61 * k1p + _A62 * k2p + _A63 * k3p + _A64 * k4p + _A65 * k5p)
        k6u = yp
        k6p = (ppoly_eval(bp, cf, x + hs) - lam) * yu

        nu = u + hs * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u + _B6 * k6u)
        npp = up + hs * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
        xn = x1 if last else x + hs
        k7u = npp
        k7p = (ppoly_eval(bp, cf, xn) - lam) * nu

        eu = hs * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
        ep = hs * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p)
        su = atol + rtol * max(abs(u), abs(nu))
        sp = atol + rtol * max(abs(up), abs(npp))
        err = np.sqrt(0.5 * ((eu / su) ** 2 + (ep / sp) ** 2))
        if not np.isfinite(err):
            if not (np.isfinite(nu) and np.isfinite(npp)):
                return u, up, STATUS_NONFINITE, x, nsteps
            err = 1e10

        if err <= 1.0:
            while jout < nout and direction * (xout[jout] - xn) <= 0.0:
                th = (xout[jout] - x) / hs
                qu = 0.0
                qp = 0.0
                thp = th
                for c in range(4):
                    qu += thp * (k1u * _P[0, c] + k3u * _P[2, c] + k4u * _P[3, c]
                                 + k5u * _P[4, c] + k6u * _P[5, c] + k7u * _P[6, c])
                    qp += thp * (k1p * _P[0, c] + k3p * _P[2, c] + k4p * _P[3, c]
                                 + k5p * _P[4, c] + k6p * _P[5, c] + k7p * _P[6, c])
                    thp *= th
                if xout[jout] == xn:
                    uout[jout] = nu
                    upout[jout] = npp
                else:
                    uout[jout] = u + hs * qu
                    upout[jout] = up + hs * qp
                jout += 1
            x = xn
            u = nu
            up = npp
            k1u = k7u
            k1p = k7p
            nsteps += 1
            if not (np.isfinite(u) and np.isfinite(up)):
                return u, up, STATUS_NONFINITE, x, nsteps
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
    while jout < nout:
        uout[jout] = u
        upout[jout] = up
        jout += 1
    return u, up, STATUS_OK, x, nsteps


@njit(cache=True, nogil=True)
def _rescale(u, up, logscale):
    m = max(abs(u), abs(up))
    if m > 0.0 and np.isfinite(m):
        return u / m, up / m, logscale + np.log(m)
    return u, up, logscale


@njit(cache=True, nogil=True)
def _carry(bp, cf, lam, x0, u, up, x1, rtol, atol, ls, nothing):
    """Integrate x0 -> x1 with no dense output, rescaling between sub-pieces.

    For strongly negative lam the solution grows like exp(sqrt(-lam) x); the
    segment is cut so that no piece grows by more than about exp(300).
    """
    pieces = int(np.sqrt(max(-lam, 0.0)) * abs(x1 - x0) / 300.0) + 1
    xa = x0
    st = STATUS_OK
    xf = x0
    for k in range(pieces):
        xb = x1 if k == pieces - 1 else x0 + (x1 - x0) * (k + 1) / pieces
        u, up, st, xf, _ = integrate(bp, cf, lam, xa, u, up, xb, rtol, atol, nothing, nothing, nothing)
        if st != STATUS_OK:
            return u, up, ls, st, xf
        if k < pieces - 1:
            u, up, ls = _rescale(u, up, ls)
        xa = xb
    return u, up, ls, st, xf


@njit(cache=True, nogil=True)
def shoot_left_end(lam, a, c1, c2, b, beta1, beta2, delta, gamma,
                   bp1, cf1, bp2, cf2, bp3, cf3, rtol, atol):
    """Left solution carried to x=b with per-segment rescaling.

    Returns (u(b), u'(b), logscale, status, x_fail); the true state is the
    returned one times exp(logscale).
    """
    nothing = np.empty(0)
    ls = 0.0
    u, up, ls = _rescale(beta2, -beta1, ls)
    u, up, ls, st, xf = _carry(bp1, cf1, lam, a, u, up, c1, rtol, atol, ls, nothing)
    if st != STATUS_OK:
        return u, up, ls, st, xf
    u, up = u / delta, (up + lam * u) / delta
    u, up, ls = _rescale(u, up, ls)
    u, up, ls, st, xf = _carry(bp2, cf2, lam, c1, u, up, c2, rtol, atol, ls, nothing)
    if st != STATUS_OK:
        return u, up, ls, st, xf
    u, up = delta / gamma * u, (delta * up + lam * u) / gamma
    u, up, ls = _rescale(u, up, ls)
    return _carry(bp3, cf3, lam, c2, u, up, b, rtol, atol, ls, nothing)


@njit(cache=True, nogil=True)
def _record_mesh(bp, cf, lam, x0, u0, up0, x1, rtol, atol):
    """Adaptive pass that also returns the accepted step abscissae."""
    nothing = np.empty(0)
    # first pass counts steps, second stores them; both are deterministic
    _, _, st, xf, n = integrate(bp, cf, lam, x0, u0, up0, x1, rtol, atol, nothing, nothing, nothing)
    mesh = np.empty(max(n, 1) + 1)
    if st != STATUS_OK:
        return mesh[:1], st, xf
    span = x1 - x0
    direction = 1.0 if span > 0 else -1.0
    h = _initial_step(span, lam, rtol)
    x, u, up = x0, u0, up0
    mesh[0] = x0
    k = 1
    k1u = up
    k1p = (ppoly_eval(bp, cf, x) - lam) * u
    while direction * (x1 - x) > 0.0:
        remaining = abs(x1 - x)
        last = False
        if h >= remaining:
            h = remaining
            last = True
        hs = direction * h
        nu, npp, k7u, k7p, err = _dp_step(bp, cf, lam, x, u, up, k1u, k1p, hs,
                                          x1 if last else x + hs, rtol, atol)
        if err <= 1.0:
            x = x1 if last else x + hs
            u, up, k1u, k1p = nu, npp, k7u, k7p
            if k >= mesh.shape[0]:
                grown = np.empty(2 * mesh.shape[0])
                grown[:k] = mesh[:k]
                mesh = grown
            mesh[k] = x
            k += 1
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
    return mesh[:k], STATUS_OK, x


@njit(cache=True, nogil=True)
def _dp_step(bp, cf, lam, x, u, up, k1u, k1p, hs, xn, rtol, atol):
    yu = u + hs * _A21 * k1u
    yp = up + hs * _A21 * k1p
    k2u = yp
    k2p = (ppoly_eval(bp, cf, x + _C2 * hs) - lam) * yu
    yu = u + hs * (_A31 * k1u + _A32 * k2u)
    yp = up + hs * (_A31 * k1p + _A32 * k2p)
    k3u = yp
    k3p = (ppoly_eval(bp, cf, x + _C3 * hs) - lam) * yu
    yu = u + hs * (_A41 * k1u + _A42 * k2u + _A43 * k3u)
    yp = up + hs * (_A41 * k1p + _A42 * k2p + _A43 * k3p)
    k4u = yp
    k4p = (ppoly_eval(bp, cf, x + _C4 * hs) - lam) * yu
    yu = u + hs * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u)
    yp = up + hs * (_A51 * k1p + _A52 * k2p + _A53 * k3p + _A54 * k4p)
    k5u = yp
    k5p = (ppoly_eval(bp, cf, x + _C5 * hs) - lam) * yu
    yu = u + hs * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u)
    yp = up + hs * (_A61 * k1p + _A62 * k2p + _A63 * k3p + _A64 * k4p + _A65 * k5p)
    k6u = yp
    k6p = (ppoly_eval(bp, cf, x + hs) - lam) * yu
    nu = u + hs * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u + _B6 * k6u)
    npp = up + hs * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
    k7u = npp
    k7p = (ppoly_eval(bp, cf, xn) - lam) * nu
    eu = hs * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
    ep = hs * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p)
    su = atol + rtol * max(abs(u), abs(nu))
    sp = atol + rtol * max(abs(up), abs(npp))
    err = np.sqrt(0.5 * ((eu / su) ** 2 + (ep / sp) ** 2))
    if not np.isfinite(err):
        err = 1e10
    return nu, npp, k7u, k7p, err


@njit(cache=True, nogil=True)
def _fixed(bp, cf, lam, u, up, mesh):
    k1u = up
    k1p = (ppoly_eval(bp, cf, mesh[0]) - lam) * u
    for i in range(mesh.shape[0] - 1):
        x = mesh[i]
        hs = mesh[i + 1] - x
        u, up, k1u, k1p, _ = _dp_step(bp, cf, lam, x, u, up, k1u, k1p, hs, mesh[i + 1], 1.0, 1.0)
    return u, up


@njit(cache=True, nogil=True)
def left_meshes(lam, a, c1, c2, b, beta1, beta2, delta, gamma,
                bp1, cf1, bp2, cf2, bp3, cf3, rtol, atol):
    """Accepted step meshes of the three segments of the left shoot at lam."""
    u, up = beta2, -beta1
    m1, st, xf = _record_mesh(bp1, cf1, lam, a, u, up, c1, rtol, atol)
    if st != STATUS_OK:
        return m1, m1, m1, st, xf
    u, up = _fixed(bp1, cf1, lam, u, up, m1)
    u, up = u / delta, (up + lam * u) / delta
    m2, st, xf = _record_mesh(bp2, cf2, lam, c1, u, up, c2, rtol, atol)
    if st != STATUS_OK:
        return m1, m2, m2, st, xf
    u, up = _fixed(bp2, cf2, lam, u, up, m2)
    u, up = delta / gamma * u, (delta * up + lam * u) / gamma
    m3, st, xf = _record_mesh(bp3, cf3, lam, c2, u, up, b, rtol, atol)
    return m1, m2, m3, st, xf


@njit(cache=True, nogil=True)
def shoot_left_fixed(lam, beta1, beta2, delta, gamma,
                     bp1, cf1, bp2, cf2, bp3, cf3, m1, m2, m3):
    """Left shoot on frozen meshes; smooth in lam, used for differencing."""
    u, up = _fixed(bp1, cf1, lam, beta2, -beta1, m1)
    u, up = u / delta, (up + lam * u) / delta
    u, up = _fixed(bp2, cf2, lam, u, up, m2)
    u, up = delta / gamma * u, (delta * up + lam * u) / gamma
    u, up = _fixed(bp3, cf3, lam, u, up, m3)
    return u, up
