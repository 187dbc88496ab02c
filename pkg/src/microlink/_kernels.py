"""Compiled inner loops of the Gibbs sampler.

All randomness is injected from the caller as pre-drawn arrays, so every
kernel is a deterministic function of its inputs. Cluster ids are 0-based
dense slots here; the public API converts to canonical 1-based labels.

Prior packing (kind, params):
  0 UP     []
  1 EPP    [theta]
  2 NBNBP  [a, q, eta, theta]
  3 NBDP   [a, q, alpha, p0]
  4 ABP    [M, theta_2, ..., theta_M]
"""

import math

import numpy as np
from numba import njit

NEG_INF = -1.0e300  # sentinel; avoids inf arithmetic inside kernels


@njit(cache=True, inline="always")
def _softplus(x):
    # log1p is skipped where its curvature term is below double precision
    if x > 20.0:
        return x + math.exp(-x)
    if x > -20.0:
        if x > 0.0:
            return x + math.log1p(math.exp(-x))
        return math.log1p(math.exp(x))
    if x > -745.0:
        return math.exp(x)
    return 0.0


@njit(cache=True, inline="always")
def _expit(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, inline="always")
def _dist(U, a, b, K):
    s = 0.0
    for k in range(K):
        t = U[a, k] - U[b, k]
        s += t * t
    return math.sqrt(s)


@njit(cache=True, inline="always")
def _dist_vec(u, U, m, K):
    s = 0.0
    for k in range(K):
        t = u[k] - U[m, k]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def _abp_log_pmf_r(rvec, M, thetas, I):
    """ABP joint log pmf of a complete allelic vector rvec[1..M]."""
    total = 0
    for s in range(1, M + 1):
        total += s * rvec[s]
    if total != I:
        return NEG_INF
    # uniform-within-class factor
    out = -math.lgamma(I + 1.0)
    for s in range(1, M + 1):
        if rvec[s] > 0:
            out += rvec[s] * math.lgamma(s + 2.0) + math.lgamma(rvec[s] + 1.0)
    # binomial chain over r_M..r_2
    tail = 0
    for k in range(M, 1, -1):
        qk = (I - tail) // k
        rk = rvec[k]
        if rk < 0 or rk > qk:
            return NEG_INF
        th = thetas[k - 2]
        out += (
            math.lgamma(qk + 1.0) - math.lgamma(rk + 1.0) - math.lgamma(qk - rk + 1.0)
            + rk * math.log(th) + (qk - rk) * math.log1p(-th)
        )
        tail += k * rk
    if rvec[1] != I - tail:
        return NEG_INF
    return out


@njit(cache=True)
def _prior_join_weight(kind, params, s, r, n_clusters, I, rbuf, M_abp):
    """Log prior weight of adding the held record to a cluster of size s.

    For delta-based priors this is the log pmf increment over the base
    partition (the held record removed); for ABP/UP it is the absolute log
    pmf of the resulting complete partition. Each prior is consistent across
    all destinations of one record, which is all Gibbs needs.
    """
    if kind == 0:  # UP
        return 0.0 if s + 1 <= 2 else NEG_INF
    if kind == 1:  # EPP
        return math.log(float(s))
    if kind == 2:  # NBNBP
        return math.log(s + params[2])
    if kind == 3:  # NBDP
        alpha = params[2]
        p0 = params[3]
        mu_s = math.exp((s - 1) * math.log1p(-p0) + math.log(p0))
        mu_s1 = math.exp(s * math.log1p(-p0) + math.log(p0))
        num = alpha * mu_s1 + r[s + 1]
        den = alpha * mu_s + r[s] - 1.0
        return math.log(s + 1.0) + math.log(num) - math.log(den)
    # ABP: absolute pmf of candidate allelic vector
    M = M_abp
    if s + 1 > M:
        return NEG_INF
    for k in range(1, M + 1):
        rbuf[k] = r[k]
    rbuf[s] -= 1
    rbuf[s + 1] += 1
    return _abp_log_pmf_r(rbuf, M, params[1:], I)


@njit(cache=True)
def _prior_fresh_weight(kind, params, r, n_clusters, I, rbuf, M_abp):
    """Log prior weight of opening a fresh singleton for the held record."""
    if kind == 0:
        return 0.0
    if kind == 1:
        return math.log(params[0])
    if kind == 2:
        a, q, eta, theta = params[0], params[1], params[2], params[3]
        log_z = math.log(-math.expm1(eta * math.log1p(-theta)))
        return (
            math.log(n_clusters + a) + math.log(q)
            + math.log(eta) + eta * math.log1p(-theta) - log_z
        )
    if kind == 3:
        a, q, alpha, p0 = params[0], params[1], params[2], params[3]
        return (
            math.log(n_clusters + a) + math.log(q)
            + math.log(alpha * p0 + r[1]) - math.log(alpha + n_clusters)
        )
    M = M_abp
    for k in range(1, M + 1):
        rbuf[k] = r[k]
    rbuf[1] += 1
    return _abp_log_pmf_r(rbuf, M, params[1:], I)


@njit(cache=True)
def _scan_records(
    order,
    P, theta, Mls, psi, W,
    xi, sizes, r, head, nxt, n_clusters,
    U, Pi,
    has_net, indptr, indices,
    D, SP, LC,
    beta, sigma2,
    prior_kind, prior_params,
    likelihood_on,
    rand_u, rand_n,
):
    """One Gibbs pass over `order`, reassigning each record in turn.

    Mutates the cluster bookkeeping in place and returns the new cluster
    count. Scratch randomness: rand_u[t] holds L uniforms for the fresh
    profile draw plus one for the destination choice; rand_n[t] holds K
    normals for the fresh position.
    """
    I = xi.shape[0]
    L = P.shape[1]
    K = U.shape[1]
    cap = U.shape[0]

    w = np.empty(cap + 1)
    dstar = np.empty(cap)
    spstar = np.empty(cap)
    u_star = np.empty(K)
    pi_star = np.empty(L, dtype=np.int64)
    rbuf = np.empty(I + 2, dtype=np.int64)
    size_w = np.empty(I + 2)
    size_mark = np.full(I + 2, -1, dtype=np.int64)
    M_abp = np.int64(prior_params[0]) if prior_kind == 4 else np.int64(0)

    for t in range(order.shape[0]):
        i = order[t]
        a = xi[i]

        # ---- remove record i from cluster a
        if head[a] == i:
            head[a] = nxt[i]
        else:
            j = head[a]
            while nxt[j] != i:
                j = nxt[j]
            nxt[j] = nxt[i]
        s_a = sizes[a]
        r[s_a] -= 1
        sizes[a] = s_a - 1
        if s_a - 1 > 0:
            r[s_a - 1] += 1
        if has_net and likelihood_on:
            for n in range(n_clusters):
                LC[n] -= SP[a, n]

        was_singleton = sizes[a] == 0
        if was_singleton:
            # Neal algorithm 8 (m=1): the vacated parameters serve as the
            # auxiliary fresh-cluster proposal
            for k in range(K):
                u_star[k] = U[a, k]
            for l in range(L):
                pi_star[l] = Pi[a, l]
            last = n_clusters - 1
            if a != last:
                j = head[last]
                while j >= 0:
                    xi[j] = a
                    j = nxt[j]
                head[a] = head[last]
                sizes[a] = sizes[last]
                for k in range(K):
                    U[a, k] = U[last, k]
                for l in range(L):
                    Pi[a, l] = Pi[last, l]
                if has_net and likelihood_on:
                    for m in range(n_clusters):
                        D[a, m] = D[last, m]
                        D[m, a] = D[m, last]
                        SP[a, m] = SP[last, m]
                        SP[m, a] = SP[m, last]
                    D[a, a] = 0.0
                    SP[a, a] = _softplus(beta)
                    LC[a] = LC[last]
            n_clusters -= 1
        else:
            sd = math.sqrt(sigma2)
            for k in range(K):
                u_star[k] = rand_n[t, k] * sd
            for l in range(L):
                # inverse-cdf categorical draw from theta[l]
                uu = rand_u[t, l]
                acc = 0.0
                pick = Mls[l] - 1
                for m in range(Mls[l]):
                    acc += theta[l, m]
                    if uu < acc:
                        pick = m
                        break
                pi_star[l] = pick

        # ---- destination weights
        n_dest = n_clusters + 1
        size_gen = t  # cache generation marker
        for n in range(n_clusters):
            s = sizes[n]
            if size_mark[s] != size_gen:
                size_w[s] = _prior_join_weight(
                    prior_kind, prior_params, s, r, n_clusters, I, rbuf, M_abp
                )
                size_mark[s] = size_gen
            w[n] = size_w[s]
        w[n_clusters] = _prior_fresh_weight(
            prior_kind, prior_params, r, n_clusters, I, rbuf, M_abp
        )

        if likelihood_on:
            # profile: two possible log terms per field
            for l in range(L):
                p = P[i, l]
                q1 = psi[l] * theta[l, p]
                lmatch = math.log(q1 + (1.0 - psi[l]))
                lmiss = math.log(q1)
                for n in range(n_clusters):
                    w[n] += lmatch if Pi[n, l] == p else lmiss
                w[n_clusters] += lmatch if pi_star[l] == p else lmiss

            if has_net:
                deg = indptr[i + 1] - indptr[i]
                base = deg * beta
                for n in range(n_clusters):
                    w[n] += base - LC[n]
                for e in range(indptr[i], indptr[i + 1]):
                    col = xi[indices[e]]
                    for n in range(n_clusters):
                        w[n] -= D[col, n]
                # fresh candidate interacts through its own position
                acc_f = base
                for m in range(n_clusters):
                    dm = _dist_vec(u_star, U, m, K)
                    dstar[m] = dm
                    spm = _softplus(beta - dm)
                    spstar[m] = spm
                    acc_f -= sizes[m] * spm
                for e in range(indptr[i], indptr[i + 1]):
                    acc_f -= dstar[xi[indices[e]]]
                w[n_clusters] += acc_f

        # ---- categorical draw over destinations
        wmax = w[0]
        for n in range(1, n_dest):
            if w[n] > wmax:
                wmax = w[n]
        total = 0.0
        for n in range(n_dest):
            dw = w[n] - wmax
            w[n] = math.exp(dw) if dw > -45.0 else 0.0
            total += w[n]
        uu = rand_u[t, L] * total
        dest = n_dest - 1
        acc = 0.0
        for n in range(n_dest):
            acc += w[n]
            if uu < acc:
                dest = n
                break

        # ---- apply the move
        if dest == n_clusters:
            c = n_clusters
            n_clusters += 1
            sizes[c] = 0
            head[c] = -1
            for k in range(K):
                U[c, k] = u_star[k]
            for l in range(L):
                Pi[c, l] = pi_star[l]
            if has_net and likelihood_on:
                lc = 0.0
                for m in range(c):
                    D[c, m] = dstar[m]
                    D[m, c] = dstar[m]
                    SP[c, m] = spstar[m]
                    SP[m, c] = spstar[m]
                    lc += sizes[m] * spstar[m]
                D[c, c] = 0.0
                SP[c, c] = _softplus(beta)
                LC[c] = lc
            dest = c

        s_d = sizes[dest]
        if s_d > 0:
            r[s_d] -= 1
        sizes[dest] = s_d + 1
        r[s_d + 1] += 1
        nxt[i] = head[dest]
        head[dest] = i
        xi[i] = dest
        if has_net and likelihood_on:
            for n in range(n_clusters):
                LC[n] += SP[dest, n]
        for l in range(L):
            if P[i, l] != Pi[dest, l]:
                W[i, l] = 1

    return n_clusters


@njit(cache=True)
def _rebuild_caches(U, sizes, n_clusters, beta, D, SP, LC):
    """Distance / log(1-p) caches over active clusters, plus their size sums."""
    K = U.shape[1]
    sp0 = _softplus(beta)
    for a in range(n_clusters):
        D[a, a] = 0.0
        SP[a, a] = sp0
        for b in range(a + 1, n_clusters):
            d = _dist(U, a, b, K)
            D[a, b] = d
            D[b, a] = d
            sp = _softplus(beta - d)
            SP[a, b] = sp
            SP[b, a] = sp
    for a in range(n_clusters):
        acc = 0.0
        for b in range(n_clusters):
            acc += sizes[b] * SP[a, b]
        LC[a] = acc


@njit(cache=True)
def _build_cluster_edges(xi, edges_i, edges_j, n_clusters):
    """Symmetric cluster-pair edge counts; diagonal = within-cluster count."""
    E = np.zeros((n_clusters, n_clusters), dtype=np.int64)
    for e in range(edges_i.shape[0]):
        a = xi[edges_i[e]]
        b = xi[edges_j[e]]
        if a == b:
            E[a, a] += 1
        else:
            E[a, b] += 1
            E[b, a] += 1
    return E


@njit(cache=True)
def _beta_two_lls(beta1, beta2, U, sizes, E, n_clusters):
    """Network log-likelihood at two intercept values (shared distances)."""
    ll1 = 0.0
    ll2 = 0.0
    K = U.shape[1]
    for a in range(n_clusters):
        sa = sizes[a]
        # within-cluster block
        T = sa * (sa - 1) / 2.0
        if T > 0 or E[a, a] > 0:
            ll1 += E[a, a] * beta1 - T * _softplus(beta1)
            ll2 += E[a, a] * beta2 - T * _softplus(beta2)
        for b in range(a + 1, n_clusters):
            T = float(sa * sizes[b])
            d = _dist(U, a, b, K)
            e1 = beta1 - d
            e2 = beta2 - d
            ll1 += E[a, b] * e1 - T * _softplus(e1)
            ll2 += E[a, b] * e2 - T * _softplus(e2)
    return ll1, ll2


@njit(cache=True)
def _rw_update_positions(
    U, sizes, E, n_clusters, beta, sigma2, scale, prop_z, acc_u
):
    """Sequential per-entity random-walk MH on the latent positions.

    Cross-cluster pairs drive the likelihood delta; within-cluster pairs
    cancel. Returns (accept count, mean acceptance probability).
    """
    K = U.shape[1]
    n_acc = 0
    acc_prob_sum = 0.0
    u_new = np.empty(K)
    for n in range(n_clusters):
        for k in range(K):
            u_new[k] = U[n, k] + scale * prop_z[n, k]
        ll_cur = 0.0
        ll_new = 0.0
        sn = sizes[n]
        for m in range(n_clusters):
            if m == n:
                continue
            T = float(sn * sizes[m])
            e = E[n, m]
            d1 = _dist(U, n, m, K)
            d2 = _dist_vec(u_new, U, m, K)
            x1 = beta - d1
            x2 = beta - d2
            ll_cur += e * x1 - T * _softplus(x1)
            ll_new += e * x2 - T * _softplus(x2)
        pr = 0.0
        for k in range(K):
            pr += (U[n, k] * U[n, k] - u_new[k] * u_new[k])
        log_a = ll_new - ll_cur + pr / (2.0 * sigma2)
        a_prob = 1.0 if log_a >= 0 else math.exp(log_a)
        acc_prob_sum += a_prob
        if math.log(acc_u[n]) < log_a:
            for k in range(K):
                U[n, k] = u_new[k]
            n_acc += 1
    return n_acc, acc_prob_sum / max(n_clusters, 1)


@njit(cache=True)
def _sghmc_beta(
    beta0, r0, eps, L_steps, mass,
    pairs_i, pairs_j, pairs_y, start, batch,
    xi, U, omega2,
):
    """SGHMC trajectory for the intercept; returns (beta*, H0, H*).

    One minibatch (a contiguous window of the chain's fixed pair shuffle) is
    shared across the whole trajectory. The potential uses the minibatch
    estimate, as does the Hamiltonian in the accept step.
    """
    n_pairs = pairs_i.shape[0]
    K = U.shape[1]
    scale = n_pairs / batch
    # distances are invariant along a beta-only trajectory
    dwin = np.empty(batch)
    ywin = np.empty(batch, dtype=np.int64)
    for t in range(batch):
        idx = (start + t) % n_pairs
        a = xi[pairs_i[idx]]
        b = xi[pairs_j[idx]]
        dwin[t] = _dist(U, a, b, K)
        ywin[t] = pairs_y[idx]

    def_val = 0.5 * math.log(2.0 * math.pi * omega2)

    # fused value+grad of the minibatch potential
    b = beta0
    val0 = 0.0
    g = 0.0
    for t in range(batch):
        x = b - dwin[t]
        val0 += ywin[t] * x - _softplus(x)
        g += _expit(x) - ywin[t]
    u0 = -scale * val0 + b * b / (2.0 * omega2) + def_val
    grad = scale * g + b / omega2

    rr = r0
    h0 = u0 + 0.5 * rr * rr / mass

    val = val0
    rr -= 0.5 * eps * grad
    for step in range(L_steps):
        b += eps * rr / mass
        val = 0.0
        g = 0.0
        for t in range(batch):
            x = b - dwin[t]
            val += ywin[t] * x - _softplus(x)
            g += _expit(x) - ywin[t]
        grad = scale * g + b / omega2
        if step < L_steps - 1:
            rr -= eps * grad
    rr -= 0.5 * eps * grad
    u_star = -scale * val + b * b / (2.0 * omega2) + def_val
    h_star = u_star + 0.5 * rr * rr / mass
    return b, h0, h_star


@njit(cache=True)
def _sghmc_u(
    n, U, sizes, xi, indptr, indices, members,
    r0, eps, L_steps, mass,
    rec_shuffle, start, batch,
    beta, sigma2,
):
    """SGHMC trajectory for one entity position; returns (u*, H0, H*).

    The pair set is all cross pairs incident to cluster n; the minibatch is
    the subset whose off-cluster endpoint lies in a contiguous window of the
    chain's fixed record shuffle.
    """
    K = U.shape[1]
    I = xi.shape[0]
    sn = sizes[n]
    n_pairs_full = sn * (I - sn)

    # gather the window's off-cluster endpoints once
    cols = np.empty(batch, dtype=np.int64)
    evec = np.empty(batch, dtype=np.int64)
    n_win = 0
    for t in range(batch):
        j = rec_shuffle[(start + t) % I]
        if xi[j] == n:
            continue
        # edge count from cluster members to j
        e = 0
        for mi in range(members.shape[0]):
            i = members[mi]
            lo = indptr[i]
            hi = indptr[i + 1]
            while lo < hi:  # binary search in sorted neighbor list
                mid = (lo + hi) // 2
                if indices[mid] < j:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < indptr[i + 1] and indices[lo] == j:
                e += 1
        cols[n_win] = xi[j]
        evec[n_win] = e
        n_win += 1

    n_pairs_batch = sn * n_win
    scale = n_pairs_full / n_pairs_batch if n_pairs_batch > 0 else 0.0

    u = np.empty(K)
    rr = np.empty(K)
    grad = np.empty(K)
    for k in range(K):
        u[k] = U[n, k]
        rr[k] = r0[k]

    def_val = 0.5 * K * math.log(2.0 * math.pi * sigma2)

    # fused value+grad at the current point
    val = 0.0
    for k in range(K):
        grad[k] = 0.0
    for t in range(n_win):
        m = cols[t]
        d = _dist_vec(u, U, m, K)
        x = beta - d
        val += evec[t] * x - sn * _softplus(x)
        if d > 1e-12:
            coef = (sn * _expit(x) - evec[t]) / d
            for k in range(K):
                grad[k] += coef * (u[k] - U[m, k])
    unorm = 0.0
    for k in range(K):
        unorm += u[k] * u[k]
    u0_val = -scale * val + unorm / (2.0 * sigma2) + def_val
    h0 = u0_val
    for k in range(K):
        grad[k] = scale * grad[k] + u[k] / sigma2
        h0 += 0.5 * rr[k] * rr[k] / mass

    for k in range(K):
        rr[k] -= 0.5 * eps * grad[k]
    for step in range(L_steps):
        for k in range(K):
            u[k] += eps * rr[k] / mass
        val = 0.0
        for k in range(K):
            grad[k] = 0.0
        for t in range(n_win):
            m = cols[t]
            d = _dist_vec(u, U, m, K)
            x = beta - d
            val += evec[t] * x - sn * _softplus(x)
            if d > 1e-12:
                coef = (sn * _expit(x) - evec[t]) / d
                for k in range(K):
                    grad[k] += coef * (u[k] - U[m, k])
        unorm = 0.0
        for k in range(K):
            unorm += u[k] * u[k]
            grad[k] = scale * grad[k] + u[k] / sigma2
        if step < L_steps - 1:
            for k in range(K):
                rr[k] -= eps * grad[k]
    for k in range(K):
        rr[k] -= 0.5 * eps * grad[k]
    u_star_val = -scale * val + unorm / (2.0 * sigma2) + def_val
    h_star = u_star_val
    for k in range(K):
        h_star += 0.5 * rr[k] * rr[k] / mass
    return u, h0, h_star


@njit(cache=True)
def _network_loglik_clusters(U, sizes, E, n_clusters, beta):
    ll, _ = _beta_two_lls(beta, beta, U, sizes, E, n_clusters)
    return ll


@njit(cache=True)
def _sghmc_u_all(
    U, sizes, xi, indptr, indices, member_order, member_bounds,
    r0s, eps, L_steps, mass,
    rec_shuffle, starts, batch, acc_u,
    beta, sigma2, n_clusters,
):
    """SGHMC update of every entity position inside one compiled loop.

    Returns the number of accepted moves. Positions are updated in place so
    later entities see earlier accepted moves, as in the sequential scheme.
    """
    n_acc = 0
    for c in range(n_clusters):
        members = member_order[member_bounds[c]: member_bounds[c + 1]]
        u_star, h0, h_star = _sghmc_u(
            c, U, sizes, xi, indptr, indices, members,
            r0s[c], eps, L_steps, mass,
            rec_shuffle, starts[c], batch,
            beta, sigma2,
        )
        if h_star == h_star and math.log(acc_u[c] + 1e-300) < h0 - h_star:
            for k in range(U.shape[1]):
                U[c, k] = u_star[k]
            n_acc += 1
    return n_acc
