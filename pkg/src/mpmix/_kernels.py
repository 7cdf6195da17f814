"""Compiled inner loops for EM runs and MICL partition/model alternations.

Variables are passed as one float64 matrix ``X`` (n, d) with ``kinds``
codes (0 gaussian, 1 poisson, 2 categorical) and level counts ``mlev``.
Component parameters are packed in ``P`` (d, Gmax, Pmax): (mean, variance),
(rate,) or level probabilities.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)
VARIANCE_FLOOR = 1e-8
DEGENERATE_WEIGHT = 1e-8


# ---------------------------------------------------------------------------
# EM


@njit(cache=True)
def _fit_stats(X, kinds, mlev, lgx, T, j, G, P_out, Q_out):
    """Weighted MLE of variable j under responsibilities T (n, Gmax).

    Writes parameters into P_out (Gmax, Pmax) and the maximized expected
    log-likelihood per component into Q_out (Gmax,).
    """
    n = X.shape[0]
    kind = kinds[j]
    for g in range(G):
        w = 0.0
        s1 = 0.0
        for i in range(n):
            t = T[i, g]
            w += t
            s1 += t * X[i, j]
        if kind == 0:
            mu = s1 / w
            ss = 0.0
            for i in range(n):
                r = X[i, j] - mu
                ss += T[i, g] * r * r
            var = ss / w
            if var < VARIANCE_FLOOR:
                var = VARIANCE_FLOOR
            P_out[g, 0] = mu
            P_out[g, 1] = var
            Q_out[g] = -0.5 * (w * (LOG_2PI + math.log(var)) + ss / var)
        elif kind == 1:
            lam = s1 / w
            sl = 0.0
            for i in range(n):
                sl += T[i, g] * lgx[i, j]
            P_out[g, 0] = lam
            q = -lam * w - sl
            if s1 > 0.0:
                q += s1 * math.log(lam)
            Q_out[g] = q
        else:
            m = mlev[j]
            for h in range(m):
                P_out[g, h] = 0.0
            for i in range(n):
                P_out[g, int(X[i, j])] += T[i, g]
            q = 0.0
            for h in range(m):
                c = P_out[g, h]
                if c > 0.0:
                    q += c * math.log(c / w)
                P_out[g, h] = c / w
            Q_out[g] = q


@njit(cache=True)
def _estep(X, kinds, mlev, lgx, G, omega, P, pi, T):
    """Fill T with responsibilities; return the observed log-likelihood.

    Returns -inf when some row has zero density under every component.
    """
    n, d = X.shape
    B = G.shape[0]
    Gmax = T.shape[2]
    # per (j, g) cached logs
    aux0 = np.zeros((d, Gmax))
    aux1 = np.zeros((d, Gmax))
    logp = np.full((d, Gmax, P.shape[2]), -np.inf)
    for j in range(d):
        for g in range(G[omega[j]]):
            if kinds[j] == 0:
                aux0[j, g] = -0.5 * (LOG_2PI + math.log(P[j, g, 1]))
                aux1[j, g] = 0.5 / P[j, g, 1]
            elif kinds[j] == 1:
                lam = P[j, g, 0]
                aux0[j, g] = -lam
                aux1[j, g] = math.log(lam) if lam > 0.0 else -np.inf
            else:
                for h in range(mlev[j]):
                    p = P[j, g, h]
                    logp[j, g, h] = math.log(p) if p > 0.0 else -np.inf
    logpi = np.full((B, Gmax), -np.inf)
    for b in range(B):
        for g in range(G[b]):
            if pi[b, g] > 0.0:
                logpi[b, g] = math.log(pi[b, g])
    total = 0.0
    s = np.empty(Gmax)
    for b in range(B):
        Gb = G[b]
        for i in range(n):
            for g in range(Gb):
                s[g] = logpi[b, g]
            for j in range(d):
                if omega[j] != b:
                    continue
                x = X[i, j]
                k = kinds[j]
                for g in range(Gb):
                    if k == 0:
                        r = x - P[j, g, 0]
                        s[g] += aux0[j, g] - aux1[j, g] * r * r
                    elif k == 1:
                        if x > 0.0:
                            s[g] += x * aux1[j, g] + aux0[j, g] - lgx[i, j]
                        else:
                            s[g] += aux0[j, g]
                    else:
                        s[g] += logp[j, g, int(x)]
            mx = -np.inf
            for g in range(Gb):
                if s[g] > mx:
                    mx = s[g]
            if mx == -np.inf:
                return -np.inf
            acc = 0.0
            for g in range(Gb):
                acc += math.exp(s[g] - mx)
            lse = mx + math.log(acc)
            total += lse
            for g in range(Gb):
                T[b, i, g] = math.exp(s[g] - lse)
    return total


@njit(cache=True)
def _mstep(X, kinds, mlev, lgx, G, omega, T, free_omega, pen, nu, P, pi, Pall, Qall):
    """M-step; with ``free_omega`` first reassign variables to blocks.

    Returns True when a component lost (almost) all weight.
    """
    n, d = X.shape
    B = G.shape[0]
    for b in range(B):
        for g in range(G[b]):
            w = 0.0
            for i in range(n):
                w += T[b, i, g]
            if w < DEGENERATE_WEIGHT:
                return True
            pi[b, g] = w / n
    for j in range(d):
        if free_omega and B > 1:
            cur = omega[j]
            best_b = cur
            best_cur = 0.0
            for b in range(B):
                _fit_stats(X, kinds, mlev, lgx, T[b], j, G[b], Pall[b], Qall[b])
                sc = -pen * nu[j] * G[b]
                for g in range(G[b]):
                    sc += Qall[b, g]
                if b == cur:
                    best_cur = sc
                Qall[b, 0] = sc  # reuse slot 0 as block score
            best = best_cur
            for b in range(B):
                if Qall[b, 0] > best:
                    best = Qall[b, 0]
                    best_b = b
            omega[j] = best_b
            for g in range(G[best_b]):
                for p in range(P.shape[2]):
                    P[j, g, p] = Pall[best_b, g, p]
        else:
            b = omega[j]
            _fit_stats(X, kinds, mlev, lgx, T[b], j, G[b], Pall[b], Qall[b])
            for g in range(G[b]):
                for p in range(P.shape[2]):
                    P[j, g, p] = Pall[b, g, p]
    return False


@njit(cache=True)
def em_run(X, kinds, mlev, lgx, G, omega0, T0, free_omega, pen, nu, max_iter, tol, warmup):
    """One EM (or penalized EM when ``free_omega``) run from responsibilities T0.

    With ``free_omega`` the block map stays fixed for the first ``warmup``
    iterations, or until the fixed-map fit settles if that happens sooner.

    Returns (omega, P, pi, T, loglik_trace, nu_trace, n_trace, converged,
    degenerate). ``nu_trace[r]`` is the parameter count of the model in
    force at trace entry r; the penalized objective is
    ``loglik - pen * nu_total``.
    """
    n, d = X.shape
    B = G.shape[0]
    Gmax = T0.shape[2]
    Pmax = 2
    for j in range(d):
        if mlev[j] > Pmax:
            Pmax = mlev[j]
    omega = omega0.copy()
    T = T0.copy()
    P = np.zeros((d, Gmax, Pmax))
    pi = np.zeros((B, Gmax))
    Pall = np.zeros((B, Gmax, Pmax))
    Qall = np.zeros((B, Gmax))
    ll_trace = np.zeros(max_iter + 1)
    nu_trace = np.zeros(max_iter + 1)
    converged = False
    free_from = warmup if free_omega and B > 1 else 0
    degenerate = _mstep(X, kinds, mlev, lgx, G, omega, T, free_omega and free_from == 0, pen, nu, P, pi, Pall, Qall)
    k = 0
    if degenerate:
        return omega, P, pi, T, ll_trace, nu_trace, k, converged, degenerate
    prev = 0.0
    for it in range(max_iter + 1):
        ll = _estep(X, kinds, mlev, lgx, G, omega, P, pi, T)
        if ll == -np.inf:
            degenerate = True
            break
        nt = 0.0
        for b in range(B):
            nt += G[b] - 1
        for j in range(d):
            nt += nu[j] * G[omega[j]]
        ll_trace[k] = ll
        nu_trace[k] = nt
        k += 1
        obj = ll - pen * nt
        if it > 0 and abs(obj - prev) <= tol * abs(ll):
            if it < free_from:
                free_from = it
            else:
                converged = True
                break
        prev = obj
        if it == max_iter:
            break
        degenerate = _mstep(X, kinds, mlev, lgx, G, omega, T, free_omega and it >= free_from, pen, nu, P, pi, Pall, Qall)
        if degenerate:
            break
    return omega, P, pi, T, ll_trace, nu_trace, k, converged, degenerate


# ---------------------------------------------------------------------------
# integrated complete-data likelihood


@njit(cache=True)
def _gauss_term(H, j, cnt, s1, s2):
    # s1, s2: sums of (x - center) and (x - center)^2
    if cnt == 0.0:
        return 0.0
    a = H[j, 0]
    b = H[j, 1]
    d = H[j, 3]
    b2 = b * b + s2 - s1 * s1 / (cnt + d)
    A = a + cnt
    return (
        a * math.log(b)
        + 0.5 * math.log(d)
        - math.lgamma(0.5 * a)
        + math.lgamma(0.5 * A)
        - 0.5 * A * math.log(b2)
        - 0.5 * math.log(cnt + d)
    )


@njit(cache=True)
def _poisson_term(H, j, cnt, s1):
    if cnt == 0.0:
        return 0.0
    a = H[j, 0]
    r = H[j, 1]
    A = a + s1
    return a * math.log(r) - math.lgamma(a) + math.lgamma(A) - A * math.log(r + cnt)


@njit(cache=True)
def _cat_term(H, j, m, cnt, lc):
    if cnt == 0.0:
        return 0.0
    a = H[j, 0]
    t = math.lgamma(m * a) - math.lgamma(cnt + m * a)
    for h in range(m):
        t += math.lgamma(lc[h] + a) - math.lgamma(a)
    return t


@njit(cache=True)
def _var_term(Xs, kinds, mlev, H, j, cnt, S1, S2, LC, g):
    k = kinds[j]
    if k == 0:
        return _gauss_term(H, j, cnt, S1[j, g], S2[j, g])
    if k == 1:
        return _poisson_term(H, j, cnt, S1[j, g])
    return _cat_term(H, j, mlev[j], cnt, LC[j, g])


@njit(cache=True)
def _var_const(Xs, kinds, lgx, j):
    n = Xs.shape[0]
    if kinds[j] == 0:
        return -0.5 * n * LOG_PI
    if kinds[j] == 1:
        s = 0.0
        for i in range(n):
            s -= lgx[i, j]
        return s
    return 0.0


@njit(cache=True)
def _label_evidence(z, G, u):
    n = z.shape[0]
    cnt = np.zeros(G)
    for i in range(n):
        cnt[z[i]] += 1.0
    t = math.lgamma(G * u) - G * math.lgamma(u) - math.lgamma(n + G * u)
    for g in range(G):
        t += math.lgamma(cnt[g] + u)
    return t


@njit(cache=True)
def _variable_evidence(Xs, kinds, mlev, lgx, H, j, z, G):
    n = Xs.shape[0]
    Mmax = 2
    if mlev[j] > Mmax:
        Mmax = mlev[j]
    cnt = np.zeros(G)
    S1 = np.zeros((1, G))
    S2 = np.zeros((1, G))
    LC = np.zeros((1, G, Mmax))
    for i in range(n):
        g = z[i]
        x = Xs[i, j]
        cnt[g] += 1.0
        if kinds[j] == 2:
            LC[0, g, int(x)] += 1.0
        else:
            S1[0, g] += x
            S2[0, g] += x * x
    t = _var_const(Xs, kinds, lgx, j)
    k = kinds[j]
    for g in range(G):
        if k == 0:
            t += _gauss_term(H, j, cnt[g], S1[0, g], S2[0, g])
        elif k == 1:
            t += _poisson_term(H, j, cnt[g], S1[0, g])
        else:
            t += _cat_term(H, j, mlev[j], cnt[g], LC[0, g])
    return t


@njit(cache=True)
def _partition_step(Xs, kinds, mlev, H, u, members, z, G, sweeps):
    """Greedy single-row reassignment for one block; z is updated in place.

    Each pass visits the rows in a fresh uniformly random order and moves
    a row to the cluster with the largest evidence when that strictly
    improves on staying. Returns the number of moves.
    """
    n, d = Xs.shape
    if G == 1:
        return 0
    Mmax = 2
    for j in range(d):
        if mlev[j] > Mmax:
            Mmax = mlev[j]
    nm = members.shape[0]
    cnt = np.zeros(G)
    S1 = np.zeros((d, G))
    S2 = np.zeros((d, G))
    LC = np.zeros((d, G, Mmax))
    for i in range(n):
        g = z[i]
        cnt[g] += 1.0
        for q in range(nm):
            j = members[q]
            x = Xs[i, j]
            if kinds[j] == 2:
                LC[j, g, int(x)] += 1.0
            else:
                S1[j, g] += x
                S2[j, g] += x * x
    TERM = np.zeros((d, G))
    for q in range(nm):
        j = members[q]
        for g in range(G):
            TERM[j, g] = _var_term(Xs, kinds, mlev, H, j, cnt[g], S1, S2, LC, g)
    rem = np.zeros(d)
    moves = 0
    for sweep in range(sweeps):
        changed = 0
        order = np.random.permutation(n)
        for oi in range(n):
            i = order[oi]
            g0 = z[i]
            # remove row i from g0
            c0 = cnt[g0] - 1.0
            for q in range(nm):
                j = members[q]
                x = Xs[i, j]
                if kinds[j] == 2:
                    LC[j, g0, int(x)] -= 1.0
                else:
                    S1[j, g0] -= x
                    S2[j, g0] -= x * x
                rem[j] = _var_term(Xs, kinds, mlev, H, j, c0, S1, S2, LC, g0) - TERM[j, g0]
            base = -math.log(c0 + u)
            best_g = g0
            best = 1e-12
            for g in range(G):
                if g == g0:
                    continue
                delta = base + math.log(cnt[g] + u)
                for q in range(nm):
                    j = members[q]
                    x = Xs[i, j]
                    if kinds[j] == 2:
                        LC[j, g, int(x)] += 1.0
                        t = _var_term(Xs, kinds, mlev, H, j, cnt[g] + 1.0, S1, S2, LC, g)
                        LC[j, g, int(x)] -= 1.0
                    else:
                        S1[j, g] += x
                        S2[j, g] += x * x
                        t = _var_term(Xs, kinds, mlev, H, j, cnt[g] + 1.0, S1, S2, LC, g)
                        S1[j, g] -= x
                        S2[j, g] -= x * x
                    delta += rem[j] + t - TERM[j, g]
                if delta > best:
                    best = delta
                    best_g = g
            g1 = best_g
            for q in range(nm):
                j = members[q]
                x = Xs[i, j]
                if kinds[j] == 2:
                    LC[j, g1, int(x)] += 1.0
                else:
                    S1[j, g1] += x
                    S2[j, g1] += x * x
            if g1 != g0:
                cnt[g0] -= 1.0
                cnt[g1] += 1.0
                z[i] = g1
                changed += 1
                for q in range(nm):
                    j = members[q]
                    TERM[j, g0] = TERM[j, g0] + rem[j]
                    TERM[j, g1] = _var_term(Xs, kinds, mlev, H, j, cnt[g1], S1, S2, LC, g1)
        moves += changed
        if changed == 0:
            break
    return moves


@njit(cache=True)
def partition_step(Xs, kinds, mlev, H, u, members, z, G, sweeps, seed):
    np.random.seed(seed)
    zz = z.copy()
    _partition_step(Xs, kinds, mlev, H, u, members, zz, G, sweeps)
    return zz


@njit(cache=True)
def evidence_table(Xs, kinds, mlev, lgx, H, Z, G):
    """(d, B) table of log p(x_j | z_b)."""
    d = Xs.shape[1]
    B = G.shape[0]
    out = np.zeros((d, B))
    for j in range(d):
        for b in range(B):
            out[j, b] = _variable_evidence(Xs, kinds, mlev, lgx, H, j, Z[b], G[b])
    return out


@njit(cache=True)
def _total_evidence(table, omega, Z, G, u):
    t = 0.0
    for b in range(G.shape[0]):
        t += _label_evidence(Z[b], G[b], u)
    for j in range(omega.shape[0]):
        t += table[j, omega[j]]
    return t


@njit(cache=True)
def micl_run(Xs, kinds, mlev, lgx, H, u, G, omega0, Z0, sweeps, max_outer, tol, seed):
    """Alternate partition steps over every block and a model step.

    Returns (omega, Z, trace, n_trace); the trace holds the evidence at
    the start and after each partition step and each model step.
    """
    np.random.seed(seed)
    d = Xs.shape[1]
    B = G.shape[0]
    omega = omega0.copy()
    Z = Z0.copy()
    trace = np.zeros(2 * max_outer + 1)
    table = evidence_table(Xs, kinds, mlev, lgx, H, Z, G)
    cur = _total_evidence(table, omega, Z, G, u)
    trace[0] = cur
    k = 1
    for it in range(max_outer):
        start = cur
        for b in range(B):
            cntm = 0
            for j in range(d):
                if omega[j] == b:
                    cntm += 1
            members = np.empty(cntm, dtype=np.int64)
            q = 0
            for j in range(d):
                if omega[j] == b:
                    members[q] = j
                    q += 1
            _partition_step(Xs, kinds, mlev, H, u, members, Z[b], G[b], sweeps)
        table = evidence_table(Xs, kinds, mlev, lgx, H, Z, G)
        cur = _total_evidence(table, omega, Z, G, u)
        trace[k] = cur
        k += 1
        for j in range(d):
            best_b = 0
            for b in range(1, B):
                if table[j, b] > table[j, best_b]:
                    best_b = b
            omega[j] = best_b
        cur = _total_evidence(table, omega, Z, G, u)
        trace[k] = cur
        k += 1
        if cur - start < tol:
            break
    return omega, Z, trace, k
