"""Compiled inner loop of the averaged-acceptance-ratio chain.

The kernel consumes pre-drawn noise blocks so that it stays bit-for-bit
reproducible and can be cross-checked against the numpy reference step in
``sampler.step_details``.
"""
import math

import numpy as np
from numba import njit

AREA_FLOOR = 1e-12
VARIANCE_FLOOR = 1e-8
LOG_2PI = math.log(2.0 * math.pi)

# status codes returned by run_block
OK = 0
DEAD_CHAIN = 1


@njit(cache=True, nogil=True)
def _in_region(a, b, eps, delta):
    q = math.exp(-eps)
    lower = (1.0 - delta) * q
    upper = 1.0 + delta * q
    aq = a * q
    bq = b * q
    return aq + b >= lower and bq + a >= lower and bq + a <= upper and aq + b <= upper


@njit(cache=True, nogil=True)
def _in_shell(a, b, eps, delta, s):
    return _in_region(a, b, eps, delta) and not _in_region(a, b, s * eps, s * delta)


@njit(cache=True, nogil=True)
def _expit_neg(x):
    # e^{-x} / (1 + e^{-x}) for x >= 0
    q = math.exp(-x)
    return q / (1.0 + q)


@njit(cache=True, nogil=True)
def shell_area(eps, delta, s):
    return 2.0 * ((1.0 - s * delta) ** 2 * _expit_neg(s * eps) - (1.0 - delta) ** 2 * _expit_neg(eps))


@njit(cache=True, nogil=True)
def _xlogy(x, y):
    if x == 0.0:
        return 0.0
    if y <= 0.0:
        return -math.inf
    return x * math.log(y)


@njit(cache=True, nogil=True)
def log_g_indep(a, b, n0, n1, x, y, log_comb):
    return log_comb + _xlogy(x, a) + _xlogy(n0 - x, 1.0 - a) + _xlogy(y, b) + _xlogy(n1 - y, 1.0 - b)


@njit(cache=True, nogil=True)
def log_g_biv(a, b, n, x, y, tau, rho):
    va = max(a * (1.0 - a), VARIANCE_FLOOR)
    vb = max(b * (1.0 - b), VARIANCE_FLOOR)
    inflate = n + n * (n - 1.0) * tau
    vx = va * inflate
    vy = vb * inflate
    c = n * n * rho * math.sqrt(va * vb)
    det = vx * vy - c * c
    if not (vx > 0.0 and det > 0.0):
        return -math.inf
    dx = x - n * a
    dy = y - n * b
    quad = (vy * dx * dx - 2.0 * c * dx * dy + vx * dy * dy) / det
    return -LOG_2PI - 0.5 * math.log(det) - 0.5 * quad


@njit(cache=True, nogil=True)
def log_prior_ratio_terms(eps, s, tau, rho, bivariate, n_common, hp, fixed_s):
    """Unnormalised log prior (constants dropped) plus log(eps).

    With ``fixed_s`` the strength is a constant and contributes nothing.
    """
    sigma_eps_sq, a, b, sigma_tau_sq = hp[0], hp[1], hp[2], hp[3]
    if not eps > 0.0:
        return -math.inf
    lp = -0.5 * eps * eps / sigma_eps_sq + math.log(eps)
    if not fixed_s:
        if not (s > 0.0 and s < 1.0):
            return -math.inf
        lp += (a - 1.0) * math.log(s) + (b - 1.0) * math.log(1.0 - s)
    if bivariate:
        nn = n_common
        if not (tau > -1.0 / (nn - 1.0) and tau < 1.0):
            return -math.inf
        bound = (1.0 + (nn - 1.0) * tau) / nn
        if abs(rho) > bound:
            return -math.inf
        lp += -0.5 * tau * tau / sigma_tau_sq + math.log(nn / (2.0 * (1.0 + (nn - 1.0) * tau)))
    return lp


@njit(cache=True, nogil=True)
def _log_sum_exp(v, k):
    m = -math.inf
    for i in range(k):
        if v[i] > m:
            m = v[i]
    if m == -math.inf:
        return -math.inf
    tot = 0.0
    for i in range(k):
        tot += math.exp(v[i] - m)
    return m + math.log(tot)


@njit(cache=True, nogil=True)
def weights_for_point(a, b, j, eps, s, tau, rho, delta, neg_log_area, bivariate,
                      n0, n1, xs, ys, log_comb, n_common):
    if not _in_shell(a, b, eps, delta, s):
        return -math.inf
    if bivariate:
        return neg_log_area + log_g_biv(a, b, n_common, xs[j], ys[j], tau, rho)
    return neg_log_area + log_g_indep(a, b, n0[j], n1[j], xs[j], ys[j], log_comb[j])


@njit(cache=True, nogil=True)
def run_block(params, alpha, beta, n0, n1, xs, ys, log_comb, bivariate, n_common,
              delta, hp, prop_sd, fixed_s, z, aux, u_acc, u_res,
              out_params, out_acc, out_log_a):
    """Advance the chain over one noise block, in place.

    ``params`` holds (eps, s, tau, rho); ``alpha``/``beta`` the latents.
    Returns a status code and the index of the failing iteration.
    """
    n_iter = z.shape[0]
    n = alpha.shape[0]
    k_aux = aux.shape[2] + 1
    lw = np.empty(k_aux)
    lw_new = np.empty(k_aux)
    pts_a = np.empty(k_aux)
    pts_b = np.empty(k_aux)
    lw_cur = np.empty((n, k_aux))
    lw_prop = np.empty((n, k_aux))
    for it in range(n_iter):
        eps, s, tau, rho = params[0], params[1], params[2], params[3]
        eps_p = eps * math.exp(prop_sd[0] * z[it, 0])
        s_p = s if fixed_s else s + prop_sd[1] * z[it, 1]
        tau_p = tau
        rho_p = rho
        if bivariate:
            tau_p = tau + prop_sd[2] * z[it, 2]
            rho_p = rho + prop_sd[3] * z[it, 3]

        lp_cur = log_prior_ratio_terms(eps, s, tau, rho, bivariate, n_common, hp, fixed_s)
        lp_new = log_prior_ratio_terms(eps_p, s_p, tau_p, rho_p, bivariate, n_common, hp, fixed_s)
        area_cur = shell_area(eps, delta, s)
        proposal_ok = lp_new > -math.inf
        area_new = 0.0
        if proposal_ok:
            area_new = shell_area(eps_p, delta, s_p)
            proposal_ok = area_new >= AREA_FLOOR
        nla_cur = -math.log(area_cur)
        nla_new = -math.log(area_new) if proposal_ok else 0.0

        log_ratio = lp_new - lp_cur if proposal_ok else -math.inf
        for j in range(n):
            pts_a[0] = alpha[j]
            pts_b[0] = beta[j]
            for k in range(1, k_aux):
                pts_a[k] = aux[it, j, k - 1, 0]
                pts_b[k] = aux[it, j, k - 1, 1]
            for k in range(k_aux):
                a = pts_a[k]
                b = pts_b[k]
                lw[k] = weights_for_point(a, b, j, eps, s, tau, rho, delta, nla_cur,
                                          bivariate, n0, n1, xs, ys, log_comb, n_common)
                if proposal_ok:
                    lw_new[k] = weights_for_point(a, b, j, eps_p, s_p, tau_p, rho_p, delta,
                                                  nla_new, bivariate, n0, n1, xs, ys,
                                                  log_comb, n_common)
                else:
                    lw_new[k] = -math.inf
                lw_cur[j, k] = lw[k]
                lw_prop[j, k] = lw_new[k]
            l_cur = _log_sum_exp(lw, k_aux)
            if l_cur == -math.inf:
                return DEAD_CHAIN, it
            if proposal_ok:
                log_ratio += _log_sum_exp(lw_new, k_aux) - l_cur

        log_a = min(0.0, log_ratio) if log_ratio == log_ratio else -math.inf
        accepted = proposal_ok and math.log(u_acc[it]) <= log_a
        if accepted:
            params[0] = eps_p
            params[1] = s_p
            params[2] = tau_p
            params[3] = rho_p
        for j in range(n):
            for k in range(k_aux):
                lw[k] = lw_prop[j, k] if accepted else lw_cur[j, k]
            m = -math.inf
            for k in range(k_aux):
                if lw[k] > m:
                    m = lw[k]
            tot = 0.0
            for k in range(k_aux):
                lw[k] = math.exp(lw[k] - m)
                tot += lw[k]
            target = u_res[it, j] * tot
            pick = k_aux - 1
            acc = 0.0
            for k in range(k_aux):
                acc += lw[k]
                if acc > target:
                    pick = k
                    break
            while lw[pick] == 0.0:
                pick -= 1
            if pick > 0:
                alpha[j] = aux[it, j, pick - 1, 0]
                beta[j] = aux[it, j, pick - 1, 1]
        out_params[it, 0] = params[0]
        out_params[it, 1] = params[1]
        out_params[it, 2] = params[2]
        out_params[it, 3] = params[3]
        out_acc[it] = accepted
        out_log_a[it] = log_a
    return OK, n_iter
