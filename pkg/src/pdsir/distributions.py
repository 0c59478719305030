"""Samplers and log-densities used by the simulator and the proposal.

All samplers take an explicit ``numpy.random.Generator`` and use the
inverse-cdf method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pdsir import _np


@dataclass(frozen=True)
class TruncExpParams:
    """Exponential with ``rate`` restricted to ``(lower, upper]``; rate 0 is uniform."""

    rate: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("need lower < upper")
        if self.rate < 0:
            raise ValueError("rate must be non-negative")


@dataclass(frozen=True)
class TruncWeibullParams:
    lam: float
    shape: float
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 <= self.lower < self.upper:
            raise ValueError("need 0 <= lower < upper")
        if self.lam <= 0 or self.shape <= 0:
            raise ValueError("lam and shape must be positive")


def _open_unit(rng, size):
    # (0, 1] so that the lower end of the support is never hit
    return 1.0 - rng.random(size)


def sample_trunc_exp(p: TruncExpParams, rng: np.random.Generator, size=None):
    x = _np.trunc_exp_draw(_open_unit(rng, size), p.rate, p.lower, p.upper)
    return float(x) if size is None else x


def trunc_exp_logpdf(x, p: TruncExpParams):
    out = _np.trunc_exp_logpdf(x, p.rate, p.lower, p.upper)
    return float(out) if np.ndim(out) == 0 else out


def trunc_exp_cdf(x, p: TruncExpParams):
    """Analytic cdf, used as a test oracle."""
    x = np.clip(np.asarray(x, dtype=float), p.lower, p.upper)
    width = p.upper - p.lower
    if p.rate * width < _np.UNIFORM_CUTOFF:
        return (x - p.lower) / width
    return np.expm1(-p.rate * (x - p.lower)) / np.expm1(-p.rate * width)


def sample_trunc_weibull(p: TruncWeibullParams, rng: np.random.Generator, size=None):
    x = _np.trunc_weibull_draw(_open_unit(rng, size), p.lam, p.shape, p.lower, p.upper)
    return float(x) if size is None else x


def trunc_weibull_cdf(x, p: TruncWeibullParams):
    x = np.clip(np.asarray(x, dtype=float), p.lower, p.upper)
    h_lo = p.lam * p.lower**p.shape
    num = np.expm1(-(p.lam * x**p.shape - h_lo))
    den = np.expm1(-(p.lam * p.upper**p.shape - h_lo))
    return num / den


def sample_gamma(shape: float, rate: float, rng: np.random.Generator, size=None):
    """Gamma draw in the shape-rate parameterisation (mean shape / rate)."""
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    return rng.gamma(shape, 1.0 / rate, size)


def weibull_logpdf(x, lam: float, shape: float):
    out = _np.weibull_logpdf(x, lam, shape)
    return float(out) if np.ndim(out) == 0 else out


def weibull_logsurvival(x, lam: float, shape: float):
    out = _np.weibull_logsf(x, lam, shape)
    return float(out) if np.ndim(out) == 0 else out


def sample_removal(infection_time, lam: float, shape: float, horizon: float,
                   rng: np.random.Generator, size=None):
    """Removal time from the mixed law: ``inf`` with probability
    ``1 - F(T - z)``, otherwise ``z`` plus a Weibull truncated to ``(0, T - z]``."""
    shape_out = np.shape(infection_time) if size is None else size
    u_p = rng.random(shape_out)
    u_w = _open_unit(rng, shape_out)
    out = _np.removal_draw(infection_time, u_p, u_w, lam, shape, horizon)
    return float(out) if np.ndim(out) == 0 else out
