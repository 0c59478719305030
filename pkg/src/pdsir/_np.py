"""Vectorised numpy versions of the kernels in :mod:`pdsir._nb`.

Same signatures, same array conventions and the same random-number block
order; the scalar helpers accept arrays. The chain driver here is a plain
Python loop and is meant for checking and for platforms without numba.
"""

import math

import numpy as np

UNIFORM_CUTOFF = 1e-10


def trunc_exp_draw(u, rate, lower, upper):
    u, rate, lower, upper = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (u, rate, lower, upper)))
    width = upper - lower
    flat = rate * width < UNIFORM_CUTOFF
    safe_rate = np.where(flat, 1.0, rate)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(flat, lower + u * width,
                     lower - np.log1p(u * np.expm1(-safe_rate * width)) / safe_rate)
    x = np.minimum(x, upper)
    return np.where(x <= lower, np.nextafter(lower, np.inf), x)


def trunc_exp_logpdf(x, rate, lower, upper):
    x, rate, lower, upper = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, rate, lower, upper)))
    width = upper - lower
    flat = rate * width < UNIFORM_CUTOFF
    safe_rate = np.where(flat, 1.0, rate)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(flat, -np.log(width),
                       np.log(safe_rate) - safe_rate * (x - lower) - np.log(-np.expm1(-safe_rate * width)))
    return np.where((x > lower) & (x <= upper), val, -np.inf)


def trunc_weibull_draw(u, lam, a, lower, upper):
    u = np.asarray(u, dtype=float)
    h_low = lam * np.power(lower, a)
    h = h_low - np.log1p(u * np.expm1(-(lam * np.power(upper, a) - h_low)))
    x = np.minimum(np.power(h / lam, 1.0 / a), upper)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    return np.where(x <= lower, np.nextafter(lower, np.inf), x)


def weibull_logpdf(x, lam, a):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = math.log(lam * a) + (a - 1.0) * np.log(x) - lam * np.power(x, a)
    if a == 1.0:
        val = np.where(x == 0.0, math.log(lam), val)
    return np.where(x < 0.0, -np.inf, val)


def weibull_logsf(x, lam, a):
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        val = -lam * np.power(x, a)
    return np.where(x < 0.0, -np.inf, val)


def removal_draw(z_inf, u_p, u_w, lam, a, horizon):
    z_inf = np.asarray(z_inf, dtype=float)
    span = horizon - z_inf
    pos = span > 0.0
    safe_span = np.where(pos, span, 1.0)
    p = -np.expm1(-lam * np.power(safe_span, a))
    z_rem = z_inf + trunc_weibull_draw(u_w, lam, a, 0.0, safe_span)
    z_rem = np.where(z_rem <= z_inf, np.nextafter(z_inf, np.inf), z_rem)
    z_rem = np.minimum(z_rem, horizon)
    return np.where(pos & (u_p < p), z_rem, np.inf)


def removal_logdensity(z_inf, z_rem, lam, a, horizon):
    z_inf = np.asarray(z_inf, dtype=float)
    z_rem = np.asarray(z_rem, dtype=float)
    finite = z_rem != np.inf
    dur = np.where(finite, z_rem - z_inf, 1.0)
    return np.where(finite, weibull_logpdf(dur, lam, a), weibull_logsf(horizon - z_inf, lam, a))


def path_summary(inf, rem, i0, s0, horizon, a):
    itimes = np.sort(inf[i0:])
    finite = rem != np.inf
    rtimes = np.sort(rem[finite])
    # removals first at ties: stable sort with removals placed before infections
    times = np.concatenate((rtimes, itimes))
    step = np.concatenate((-np.ones(rtimes.size), np.ones(itimes.size)))
    order = np.argsort(times, kind="stable")
    times = times[order]
    step = step[order]
    i_after = i0 + np.cumsum(step)
    s_after = s0 - np.cumsum(step > 0)
    i_before = np.concatenate(([float(i0)], i_after[:-1]))
    s_before = np.concatenate(([float(s0)], s_after[:-1]))
    t_prev = np.concatenate(([0.0], times[:-1]))
    integral = float(np.sum(s_before * i_before * (times - t_prev)))
    if times.size:
        integral += float(s_after[-1] * i_after[-1] * (horizon - times[-1]))
    else:
        integral += s0 * i0 * horizon
    i_at_inf = i_before[step > 0]
    valid = bool(np.all(i_at_inf > 0))
    sum_log_i = float(np.sum(np.log(i_at_inf[i_at_inf > 0])))
    dur = rem[finite] - inf[finite]
    sum_log_dur = float(np.sum(np.log(dur)))
    sum_pow = float(np.sum(np.power(dur, a)) + np.sum(np.power(horizon - inf[~finite], a)))
    return (float(itimes.size), float(rtimes.size), sum_log_i, integral, sum_log_dur, sum_pow, valid)


def loglik_from_summary(n_inf, n_rem, sum_log_i, integral, sum_log_dur, sum_pow, valid, beta, lam, a):
    if not valid:
        return -np.inf
    ll = n_inf * math.log(beta) + sum_log_i - beta * integral
    ll += n_rem * (math.log(lam) + math.log(a)) + (a - 1.0) * sum_log_dur - lam * sum_pow
    return ll


def _removal_bin_counts(rem, grid_t):
    finite = rem[rem != np.inf]
    return np.bincount(np.searchsorted(grid_t, finite), minlength=grid_t.size).astype(np.int64)


def infectious_at_breakpoints(rem, i0, grid_t, cumy):
    counts = _removal_bin_counts(rem, grid_t)
    removed_before = np.cumsum(counts)[:-1]
    return i0 + cumy[:-1] - removed_before


def proposal_logq(inf, rem, i0, interval_of, selected, grid_t, cumy, beta, lam, a):
    horizon = grid_t[-1]
    n_inf_at = infectious_at_breakpoints(rem, i0, grid_t, cumy)
    lq = float(np.sum(removal_logdensity(0.0, rem[:i0], lam, a, horizon)))
    idx = np.flatnonzero(selected[i0:]) + i0
    if idx.size:
        k = interval_of[idx]
        mu = beta * n_inf_at[k - 1]
        lq += float(np.sum(trunc_exp_logpdf(inf[idx], mu, grid_t[k - 1], grid_t[k])))
        lq += float(np.sum(removal_logdensity(inf[idx], rem[idx], lam, a, horizon)))
    return lq


def propose(inf, rem, i0, selected, grid_t, cumy, beta, lam, a, rng, out_inf, out_rem):
    K = grid_t.size - 1
    horizon = grid_t[K]
    out_inf[:] = inf
    out_rem[:] = rem

    u_p = rng.random(i0)
    u_w = 1.0 - rng.random(i0)
    r0 = removal_draw(np.zeros(i0), u_p, u_w, lam, a, horizon)
    out_rem[:i0] = r0
    lq = float(np.sum(removal_logdensity(0.0, r0, lam, a, horizon)))

    retained = np.ones(inf.size, dtype=bool)
    retained[i0:] = ~selected[i0:]
    counts = _removal_bin_counts(out_rem[retained], grid_t)

    removed = 0
    for k in range(1, K + 1):
        removed += counts[k - 1]
        mu = beta * (i0 + cumy[k - 1] - removed)
        lo, hi = grid_t[k - 1], grid_t[k]
        start = i0 + cumy[k - 1]
        members = np.flatnonzero(selected[start:i0 + cumy[k]]) + start
        g = members.size
        if g == 0:
            continue
        u_i = 1.0 - rng.random(g)
        u_p = rng.random(g)
        u_w = 1.0 - rng.random(g)
        x = trunc_exp_draw(u_i, mu, lo, hi)
        lq += float(np.sum(trunc_exp_logpdf(x, mu, lo, hi)))
        r = removal_draw(x, u_p, u_w, lam, a, horizon)
        lq += float(np.sum(removal_logdensity(x, r, lam, a, horizon)))
        out_inf[members] = x
        out_rem[members] = r
        counts += _removal_bin_counts(r, grid_t)
    return lq


def select_subset(n_infected, i0, n_select, rng, selected, perm):
    selected[:] = False
    perm[:n_infected] = np.arange(n_infected)
    u = rng.random(n_select)
    for c in range(n_select):
        j = c + int(u[c] * (n_infected - c))
        perm[c], perm[j] = perm[j], perm[c]
    selected[i0 + perm[:n_select]] = True


def accept_move(ll_prop, log_alpha, u):
    if ll_prop == -np.inf or log_alpha != log_alpha:
        return False
    if log_alpha >= 0.0:
        return True
    return u < math.exp(log_alpha)


def run_chain_loop(inf, rem, i0, s0, interval_of, grid_t, cumy, a, beta, lam,
                   a_beta, b_beta, a_lam, b_lam, fixed_lam, iterations, thin,
                   n_select, rng):
    horizon = grid_t[-1]
    m = inf.size
    n_infected = m - i0
    cur_inf, cur_rem = inf.copy(), rem.copy()
    prop_inf, prop_rem = np.empty(m), np.empty(m)
    selected = np.zeros(m, dtype=bool)
    perm = np.empty(max(n_infected, 1), dtype=np.int64)
    period_factor = math.gamma(1.0 + 1.0 / a)

    cur = path_summary(cur_inf, cur_rem, i0, s0, horizon, a)
    n_draws = iterations // thin
    draws = np.empty((n_draws, 5))
    accepted_flags = np.zeros(n_draws, dtype=bool)
    n_accept = 0
    row = 0
    for it in range(iterations):
        beta = rng.gamma(a_beta + cur[0], 1.0 / (b_beta + cur[3]))
        lam = fixed_lam if fixed_lam > 0.0 else rng.gamma(a_lam + cur[1], 1.0 / (b_lam + cur[5]))

        select_subset(n_infected, i0, n_select, rng, selected, perm)
        lq_fwd = propose(cur_inf, cur_rem, i0, selected, grid_t, cumy, beta, lam, a, rng,
                         prop_inf, prop_rem)
        prop = path_summary(prop_inf, prop_rem, i0, s0, horizon, a)
        ll_prop = loglik_from_summary(*prop, beta, lam, a)
        ll_cur = loglik_from_summary(*cur, beta, lam, a)
        lq_rev = proposal_logq(cur_inf, cur_rem, i0, interval_of, selected, grid_t, cumy,
                               beta, lam, a)
        log_alpha = (ll_prop - ll_cur) + (lq_rev - lq_fwd)
        u = rng.random()
        accept = accept_move(ll_prop, log_alpha, u)
        if accept:
            cur_inf, prop_inf = prop_inf, cur_inf
            cur_rem, prop_rem = prop_rem, cur_rem
            cur = prop
            ll_cur = ll_prop
            n_accept += 1
        if (it + 1) % thin == 0:
            draws[row] = (it + 1, beta, lam, beta * s0 * lam ** (-1.0 / a) * period_factor, ll_cur)
            accepted_flags[row] = accept
            row += 1
    return draws, accepted_flags, n_accept, cur_inf, cur_rem
