"""Numba kernels for the hot loops: path statistics, PD-SIR proposals and
the full Gibbs / Metropolis-Hastings chain.

Array conventions shared with :mod:`pdsir._np`:

* ``inf``, ``rem`` -- infection and removal times of the ever-infected
  individuals. The first ``i0`` entries are the initial infectives
  (infection time 0). Never-removed individuals carry ``inf``.
* ``interval_of`` -- observation interval (1..K) of each individual, 0 for
  initial infectives.
* ``grid_t`` -- breakpoints ``t_0 = 0 < ... < t_K = T``.
* ``cumy`` -- cumulative incidence, ``cumy[k] = I_1 + ... + I_k``.

Random numbers are consumed in fixed blocks (see ``propose``) so that the
numpy backend reproduces the same stream.
"""

import math

import numpy as np

from pdsir._backend import njit

# below this rate * width the truncated exponential is treated as uniform
UNIFORM_CUTOFF = 1e-10


@njit
def trunc_exp_draw(u, rate, lower, upper):
    # u in (0, 1]; u == 1 maps to ``upper``
    width = upper - lower
    if rate * width < UNIFORM_CUTOFF:
        x = lower + u * width
    else:
        x = lower - math.log1p(u * math.expm1(-rate * width)) / rate
    if x > upper:
        x = upper
    if x <= lower:
        x = np.nextafter(lower, np.inf)
    return x


@njit
def trunc_exp_logpdf(x, rate, lower, upper):
    if not (lower < x <= upper):
        return -np.inf
    width = upper - lower
    if rate * width < UNIFORM_CUTOFF:
        return -math.log(width)
    return math.log(rate) - rate * (x - lower) - math.log(-math.expm1(-rate * width))


@njit
def trunc_weibull_draw(u, lam, a, lower, upper):
    # inverse cdf on the cumulative hazard scale, u in (0, 1]
    h_low = lam * lower**a
    h = h_low - math.log1p(u * math.expm1(-(lam * upper**a - h_low)))
    x = (h / lam) ** (1.0 / a)
    if x > upper:
        x = upper
    if x <= lower:
        x = np.nextafter(lower, np.inf)
    return x


@njit
def weibull_logpdf(x, lam, a):
    if x < 0.0:
        return -np.inf
    if x == 0.0:
        if a < 1.0:
            return np.inf
        if a > 1.0:
            return -np.inf
        return math.log(lam)
    return math.log(lam * a) + (a - 1.0) * math.log(x) - lam * x**a


@njit
def weibull_logsf(x, lam, a):
    if x < 0.0:
        return -np.inf
    return -lam * x**a


@njit
def removal_draw(z_inf, u_p, u_w, lam, a, horizon):
    """Draw from (1 - p) delta_inf + p TrunF(. - z_inf; 0, T - z_inf)."""
    span = horizon - z_inf
    if span <= 0.0:
        return np.inf
    p = -math.expm1(-lam * span**a)
    if u_p >= p:
        return np.inf
    z_rem = z_inf + trunc_weibull_draw(u_w, lam, a, 0.0, span)
    if z_rem <= z_inf:
        z_rem = np.nextafter(z_inf, np.inf)
    if z_rem > horizon:
        z_rem = horizon
    return z_rem


@njit
def removal_logdensity(z_inf, z_rem, lam, a, horizon):
    if z_rem == np.inf:
        return weibull_logsf(horizon - z_inf, lam, a)
    return weibull_logpdf(z_rem - z_inf, lam, a)


@njit
def path_summary(inf, rem, i0, s0, horizon, a):
    """Sweep the event list once.

    Returns ``(n_inf, n_rem, sum_log_I, integral_SI, sum_log_dur, sum_pow,
    valid)`` where ``sum_log_I`` is the sum of log I(t-) over infections and
    ``valid`` is False when some infection happens while I(t-) = 0.
    Removals are processed before infections at equal times.
    """
    m = inf.shape[0]
    n_inf = m - i0
    itimes = np.sort(inf[i0:])
    n_rem = 0
    for j in range(m):
        if rem[j] != np.inf:
            n_rem += 1
    rtimes = np.empty(n_rem)
    c = 0
    for j in range(m):
        if rem[j] != np.inf:
            rtimes[c] = rem[j]
            c += 1
    rtimes.sort()

    s = float(s0)
    i = float(i0)
    t_prev = 0.0
    integral = 0.0
    sum_log_i = 0.0
    valid = True
    pi = 0
    pr = 0
    while pi < n_inf or pr < n_rem:
        if pr < n_rem and (pi >= n_inf or rtimes[pr] <= itimes[pi]):
            t = rtimes[pr]
            integral += s * i * (t - t_prev)
            t_prev = t
            i -= 1.0
            pr += 1
        else:
            t = itimes[pi]
            integral += s * i * (t - t_prev)
            t_prev = t
            if i <= 0.0:
                valid = False
            else:
                sum_log_i += math.log(i)
            s -= 1.0
            i += 1.0
            pi += 1
    integral += s * i * (horizon - t_prev)

    sum_log_dur = 0.0
    sum_pow = 0.0
    for j in range(m):
        if rem[j] != np.inf:
            d = rem[j] - inf[j]
            sum_log_dur += math.log(d)
            sum_pow += d**a
        else:
            sum_pow += (horizon - inf[j]) ** a
    return (float(n_inf), float(n_rem), sum_log_i, integral, sum_log_dur, sum_pow, valid)


@njit
def loglik_from_summary(n_inf, n_rem, sum_log_i, integral, sum_log_dur, sum_pow, valid, beta, lam, a):
    if not valid:
        return -np.inf
    ll = n_inf * math.log(beta) + sum_log_i - beta * integral
    ll += n_rem * (math.log(lam) + math.log(a)) + (a - 1.0) * sum_log_dur - lam * sum_pow
    return ll


@njit
def infectious_at_breakpoints(rem, i0, grid_t, cumy):
    """I(t_{k-1}) for k = 1..K, from the removal times of a complete path."""
    K = grid_t.shape[0] - 1
    counts = np.zeros(K + 1, dtype=np.int64)
    for j in range(rem.shape[0]):
        if rem[j] != np.inf:
            counts[np.searchsorted(grid_t, rem[j])] += 1
    out = np.empty(K, dtype=np.int64)
    removed = 0
    for k in range(1, K + 1):
        removed += counts[k - 1]
        out[k - 1] = i0 + cumy[k - 1] - removed
    return out


@njit
def proposal_logq(inf, rem, i0, interval_of, selected, grid_t, cumy, beta, lam, a):
    """Log proposal density of the refreshed coordinates of a path.

    Refreshed means: all initial infectives' removal times plus the
    infection and removal times of individuals with ``selected`` set.
    Interval rates come from the path itself.
    """
    horizon = grid_t[grid_t.shape[0] - 1]
    n_inf_at = infectious_at_breakpoints(rem, i0, grid_t, cumy)
    lq = 0.0
    for j in range(i0):
        lq += removal_logdensity(0.0, rem[j], lam, a, horizon)
    for j in range(i0, inf.shape[0]):
        if selected[j]:
            k = interval_of[j]
            mu = beta * n_inf_at[k - 1]
            lq += trunc_exp_logpdf(inf[j], mu, grid_t[k - 1], grid_t[k])
            lq += removal_logdensity(inf[j], rem[j], lam, a, horizon)
    return lq


@njit
def propose(inf, rem, i0, selected, grid_t, cumy, beta, lam, a, rng, out_inf, out_rem):
    """Refresh the selected coordinates sequentially in k; return log q.

    Random blocks, in order: initial infectives (p-uniforms, then Weibull
    uniforms); then for each interval k with g selected members: g
    infection uniforms, g p-uniforms, g Weibull uniforms.
    """
    K = grid_t.shape[0] - 1
    horizon = grid_t[K]
    m = inf.shape[0]
    out_inf[:] = inf
    out_rem[:] = rem
    lq = 0.0

    u_p = np.empty(i0)
    u_w = np.empty(i0)
    for j in range(i0):
        u_p[j] = rng.random()
    for j in range(i0):
        u_w[j] = 1.0 - rng.random()
    for j in range(i0):
        r = removal_draw(0.0, u_p[j], u_w[j], lam, a, horizon)
        out_rem[j] = r
        lq += removal_logdensity(0.0, r, lam, a, horizon)

    counts = np.zeros(K + 1, dtype=np.int64)
    for j in range(m):
        if (j < i0 or not selected[j]) and out_rem[j] != np.inf:
            counts[np.searchsorted(grid_t, out_rem[j])] += 1

    removed = 0
    members = np.empty(m, dtype=np.int64)
    for k in range(1, K + 1):
        removed += counts[k - 1]
        mu = beta * (i0 + cumy[k - 1] - removed)
        lo = grid_t[k - 1]
        hi = grid_t[k]
        g = 0
        for j in range(i0 + cumy[k - 1], i0 + cumy[k]):
            if selected[j]:
                members[g] = j
                g += 1
        if g == 0:
            continue
        u_i = np.empty(g)
        u_p = np.empty(g)
        u_w = np.empty(g)
        for c in range(g):
            u_i[c] = 1.0 - rng.random()
        for c in range(g):
            u_p[c] = rng.random()
        for c in range(g):
            u_w[c] = 1.0 - rng.random()
        for c in range(g):
            j = members[c]
            x = trunc_exp_draw(u_i[c], mu, lo, hi)
            out_inf[j] = x
            lq += trunc_exp_logpdf(x, mu, lo, hi)
        for c in range(g):
            j = members[c]
            x = out_inf[j]
            r = removal_draw(x, u_p[c], u_w[c], lam, a, horizon)
            out_rem[j] = r
            lq += removal_logdensity(x, r, lam, a, horizon)
            if r != np.inf:
                counts[np.searchsorted(grid_t, r)] += 1
    return lq


@njit
def accept_move(ll_prop, log_alpha, u):
    # alpha = 1 is always accepted; NaN ratios are rejected
    if ll_prop == -np.inf or log_alpha != log_alpha:
        return False
    if log_alpha >= 0.0:
        return True
    return u < math.exp(log_alpha)


@njit
def select_subset(n_infected, i0, n_select, rng, selected, perm):
    """Mark ``n_select`` of the infected individuals uniformly at random.

    Partial Fisher-Yates driven by one block of ``n_select`` uniforms.
    """
    selected[:] = False
    for c in range(n_infected):
        perm[c] = c
    u = np.empty(n_select)
    for c in range(n_select):
        u[c] = rng.random()
    for c in range(n_select):
        j = c + int(u[c] * (n_infected - c))
        tmp = perm[c]
        perm[c] = perm[j]
        perm[j] = tmp
        selected[i0 + perm[c]] = True


@njit
def run_chain_loop(inf, rem, i0, s0, interval_of, grid_t, cumy, a, beta, lam,
                   a_beta, b_beta, a_lam, b_lam, fixed_lam, iterations, thin,
                   n_select, rng):
    """Run the sampler; returns ``(draws, accepted, n_accept, inf, rem)``.

    ``draws`` has columns iteration, beta, lambda, r0, loglik, one row per
    ``thin`` iterations. Each iteration draws beta and lambda from their
    gamma full conditionals, then performs one M-H update of the latent
    path. ``fixed_lam > 0`` pins lambda (used for negative controls).
    """
    K = grid_t.shape[0] - 1
    horizon = grid_t[K]
    m = inf.shape[0]
    n_infected = m - i0
    cur_inf = inf.copy()
    cur_rem = rem.copy()
    prop_inf = np.empty(m)
    prop_rem = np.empty(m)
    selected = np.zeros(m, dtype=np.bool_)
    perm = np.empty(max(n_infected, 1), dtype=np.int64)
    period_factor = math.gamma(1.0 + 1.0 / a)

    cn, cr, cl, ci, cd, cp, cv = path_summary(cur_inf, cur_rem, i0, s0, horizon, a)
    n_draws = iterations // thin
    draws = np.empty((n_draws, 5))
    accepted_flags = np.zeros(n_draws, dtype=np.bool_)
    n_accept = 0
    row = 0
    for it in range(iterations):
        beta = rng.gamma(a_beta + cn, 1.0 / (b_beta + ci))
        if fixed_lam > 0.0:
            lam = fixed_lam
        else:
            lam = rng.gamma(a_lam + cr, 1.0 / (b_lam + cp))

        select_subset(n_infected, i0, n_select, rng, selected, perm)
        lq_fwd = propose(cur_inf, cur_rem, i0, selected, grid_t, cumy, beta, lam, a, rng,
                         prop_inf, prop_rem)
        pn, pr, pl, pi, pd, pp, pv = path_summary(prop_inf, prop_rem, i0, s0, horizon, a)
        ll_prop = loglik_from_summary(pn, pr, pl, pi, pd, pp, pv, beta, lam, a)
        ll_cur = loglik_from_summary(cn, cr, cl, ci, cd, cp, cv, beta, lam, a)
        lq_rev = proposal_logq(cur_inf, cur_rem, i0, interval_of, selected, grid_t, cumy,
                               beta, lam, a)
        log_alpha = (ll_prop - ll_cur) + (lq_rev - lq_fwd)
        u = rng.random()
        accept = accept_move(ll_prop, log_alpha, u)
        if accept:
            cur_inf, prop_inf = prop_inf, cur_inf
            cur_rem, prop_rem = prop_rem, cur_rem
            cn, cr, cl, ci, cd, cp, cv = pn, pr, pl, pi, pd, pp, pv
            ll_cur = ll_prop
            n_accept += 1
        if (it + 1) % thin == 0:
            draws[row, 0] = it + 1
            draws[row, 1] = beta
            draws[row, 2] = lam
            draws[row, 3] = beta * s0 * lam ** (-1.0 / a) * period_factor
            draws[row, 4] = ll_cur
            accepted_flags[row] = accept
            row += 1
    return draws, accepted_flags, n_accept, cur_inf, cur_rem
