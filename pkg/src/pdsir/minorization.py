"""Minorization bounds for the data-augmentation chain, as checkable functions.

Two lower bounds make the whole state space a small set:

* ``k_r(theta)`` bounds the proposal-to-likelihood ratio ``q(Z | theta) / L(theta; Z)``
  from below, uniformly over latent paths ``Z`` consistent with the data;
* ``k_theta(theta)`` bounds the parameter full conditional ``pi(theta | Z)``
  from below, uniformly over ``Z``.

Both rest on infima of gamma densities over boxes of shape and rate
perturbations. Everything is computed on the log scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from pdsir.model import (IncidenceCounts, LatentPath, ObservationGrid, Params, PriorHyper,
                         sir_loglik, sufficient_stats)
from pdsir.proposal import propose_full, proposal_logdensity


@dataclass(frozen=True)
class GammaBox:
    """Family ``Ga(x; a + alpha, b + beta)`` for ``0 <= alpha <= A``, ``0 <= beta <= B``."""

    a: float
    b: float
    A: float = 0.0
    B: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("base shape and rate must be positive")
        if not (self.A >= 0 and self.B >= 0):
            raise ValueError("perturbation caps must be non-negative")


def gamma_logpdf(x, shape, rate):
    """Shape-rate gamma log density."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def rate_threshold(a: float, b: float, B: float) -> float:
    """Point where ``Ga(x; a, b)`` and ``Ga(x; a, b + B)`` cross."""
    if B == 0:
        return math.inf
    return a / B * math.log1p(B / b)


def shape_threshold(a: float, b: float, A: float) -> float:
    """Point where ``Ga(x; a + A, b)`` and ``Ga(x; a, b)`` cross."""
    if A == 0:
        return math.inf
    return math.exp((gammaln(a + A) - gammaln(a)) / A) / b


def log_gamma_inf_rate(x, a, b, B):
    """``log inf_{0 <= beta <= B} Ga(x; a, b + beta)``.

    Below the crossing point the unperturbed rate gives the smaller
    density, above it the largest rate does.
    """
    x = np.asarray(x, dtype=float)
    low = x < rate_threshold(a, b, B)
    return np.where(low, gamma_logpdf(x, a, b), gamma_logpdf(x, a, b + B))


def log_gamma_inf_shape(x, a, b, A):
    """``log inf_{0 <= alpha <= A} Ga(x; a + alpha, b)``."""
    x = np.asarray(x, dtype=float)
    low = x <= shape_threshold(a, b, A)
    return np.where(low, gamma_logpdf(x, a + A, b), gamma_logpdf(x, a, b))


def log_gamma_inf_joint(x, box: GammaBox):
    """``log inf Ga(x; a + alpha, b + beta)`` over the box.

    The log density is concave in ``alpha`` for fixed ``beta`` and concave
    in ``beta`` for fixed ``alpha``, so the infimum sits at one of the four
    corners. Two of the corners usually dominate, but not always (small
    ``A``), so all four are compared.
    """
    x = np.asarray(x, dtype=float)
    a, b, A, B = box.a, box.b, box.A, box.B
    corners = [gamma_logpdf(x, a + da, b + db) for da in (0.0, A) for db in (0.0, B)]
    return np.minimum.reduce(corners)


def gamma_inf_rate(x, a, b, B):
    return np.exp(log_gamma_inf_rate(x, a, b, B))


def gamma_inf_shape(x, a, b, A):
    return np.exp(log_gamma_inf_shape(x, a, b, A))


def gamma_inf_joint(x, box: GammaBox):
    return np.exp(log_gamma_inf_joint(x, box))


def log_k_r(params: Params, y: IncidenceCounts, grid: ObservationGrid, n: int) -> float:
    """``log k_r = -beta * n * sum_k I_k (t_k - t_{k-1}) - n_I log n``.

    ``n`` is the population size ``S(0) + I(0)``.
    """
    widths = np.diff(grid.breakpoints)
    return float(-params.beta * n * np.dot(y.counts, widths) - y.total * math.log(n))


def log_k_theta(params: Params, y: IncidenceCounts, grid: ObservationGrid, priors: PriorHyper,
                i0: int, n: int) -> float:
    """Lower bound on ``log pi(beta, lambda | Z)`` valid for every path ``Z``.

    With ``m = n_I + I(0)`` ever-infected individuals, the integral of
    ``S I`` is at most ``n m T``, at most ``m`` removals occur and the
    powered durations sum to at most ``m T**shape``.
    """
    m = y.total + i0
    T = grid.horizon
    lb = log_gamma_inf_rate(params.beta, priors.a_beta + y.total, priors.b_beta, n * m * T)
    ll = log_gamma_inf_joint(params.lam, GammaBox(priors.a_lambda, priors.b_lambda,
                                                  float(m), m * T ** params.shape))
    return float(lb + ll)


def log_full_conditional(params: Params, path: LatentPath, grid: ObservationGrid,
                         priors: PriorHyper) -> float:
    """``log pi(beta, lambda | Z)``: the two conjugate gamma full conditionals."""
    st = sufficient_stats(path, grid, params.shape)
    lb = gamma_logpdf(params.beta, priors.a_beta + st.n_infections, priors.b_beta + st.integral_si)
    ll = gamma_logpdf(params.lam, priors.a_lambda + st.n_removals,
                      priors.b_lambda + st.sum_powered_durations)
    return float(lb + ll)


def log_ratio_q_over_l(path: LatentPath, y: IncidenceCounts, grid: ObservationGrid,
                       params: Params) -> float:
    """``log q(Z | theta) - log L(theta; Z)`` for the full PD-SIR proposal."""
    everyone = np.arange(path.infection_time.size)
    lq = proposal_logdensity(path, everyone, y, grid, params)
    ll = sir_loglik(path, params, grid)
    if ll == -math.inf:
        return math.inf
    return lq - ll


def _random_instance(rng):
    s0 = int(rng.integers(1, 40))
    i0 = int(rng.integers(1, 4))
    K = int(rng.integers(1, 6))
    T = float(rng.uniform(0.5, 10.0))
    shape = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
    inner = np.sort(rng.uniform(0.0, T, K - 1))
    grid = ObservationGrid(np.concatenate(([0.0], inner, [T])))
    y = IncidenceCounts(rng.multinomial(int(rng.integers(0, s0 + 1)), np.full(K, 1.0 / K)))
    params = Params(float(np.exp(rng.uniform(-6, 1))), float(np.exp(rng.uniform(-3, 2))), shape)
    return s0, i0, grid, y, params


def certify(n_instances: int = 1000, seed: int = 0, tol: float = 1e-9) -> list[dict]:
    """Check both minorization inequalities on random instances.

    Each instance draws a population, grid, counts and parameters, then a
    path from the full PD-SIR proposal, and evaluates ``log k_r`` against
    ``log q - log L`` and ``log k_theta`` (at an independent random
    parameter and random priors) against ``log pi(theta | Z)``.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_instances):
        s0, i0, grid, y, params = _random_instance(rng)
        path = propose_full(y, grid, params, i0, rng, s0=s0).path
        kr = log_k_r(params, y, grid, s0 + i0)
        ratio = log_ratio_q_over_l(path, y, grid, params)
        priors = PriorHyper(*np.exp(rng.uniform(-3, 1, 4)))
        theta = Params(float(np.exp(rng.uniform(-6, 1))), float(np.exp(rng.uniform(-3, 2))),
                       params.shape)
        kt = log_k_theta(theta, y, grid, priors, i0, s0 + i0)
        post = log_full_conditional(theta, path, grid, priors)
        rows.append({"instance": i, "s0": s0, "i0": i0, "K": grid.K, "n_infections": y.total,
                     "shape": params.shape, "log_k_r": kr, "log_q_minus_loglik": ratio,
                     "k_r_ok": bool(kr <= ratio + tol), "log_k_theta": kt,
                     "log_full_conditional": post, "k_theta_ok": bool(kt <= post + tol)})
    return rows


def grid_check_infima(n_boxes: int = 100, seed: int = 0, n_x: int = 50, n_grid: int = 50) -> list[dict]:
    """Compare the three infima with brute-force minima over a parameter grid.

    Grids include the box corners, so the relative error should be at
    rounding level.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_boxes):
        a, b, A, B = np.exp(rng.uniform(-2, 2, 4))
        box = GammaBox(float(a), float(b), float(A), float(B))
        x = np.exp(rng.uniform(-3, 3, n_x))
        al = np.linspace(0.0, A, n_grid)[:, None, None]
        be = np.linspace(0.0, B, n_grid)[None, :, None]
        dens = np.exp(gamma_logpdf(x[None, None, :], a + al, b + be))
        errs = {
            "rate": _rel_err(gamma_inf_rate(x, a, b, B), dens[0].min(axis=0)),
            "shape": _rel_err(gamma_inf_shape(x, a, b, A), dens[:, 0].min(axis=0)),
            "joint": _rel_err(gamma_inf_joint(x, box), dens.min(axis=(0, 1))),
        }
        rows.append({"box": i, "a": box.a, "b": box.b, "A": box.A, "B": box.B,
                     **{f"max_rel_err_{k}": v for k, v in errs.items()}})
    return rows


def _rel_err(got, want):
    scale = np.maximum(np.abs(want), np.finfo(float).tiny)
    return float(np.max(np.abs(got - want) / scale))
