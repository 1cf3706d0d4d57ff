"""Convergence diagnostics and posterior predictive model checking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .banova import PosteriorDraws
from .data import AggregatedMatrix
from .errors import InputError


@dataclass
class PsrfResult:
    point_estimate: Optional[float]  # None when undefined (zero within-chain variance)
    upper_ci: Optional[float] = None  # absent in the base estimator

    @property
    def defined(self) -> bool:
        return self.point_estimate is not None


def psrf(chains, corrected: bool = False, split: bool = False) -> PsrfResult:
    """Gelman-Rubin potential scale reduction factor of one scalar parameter.

    ``chains`` is an (m, n) array-like of m chains of length n.  The base
    estimator is sqrt(Var+/W) with Var+ = ((n-1)/n) W + B/n; ``corrected``
    adds the (d+3)/(d+1) sampling-variability factor, ``split`` halves each
    chain first.  Constant chains make the ratio 0/0 and the result is
    reported as undefined rather than NaN.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2:
        raise InputError("psrf expects a 2-D (chains x draws) array")
    if split:
        half = x.shape[1] // 2
        x = np.concatenate([x[:, :half], x[:, half : 2 * half]], axis=0)
    m, n = x.shape
    if m < 2:
        raise InputError("psrf requires at least 2 chains")
    if n < 2:
        raise InputError("psrf requires chains of length >= 2")

    chain_means = x.mean(axis=1)
    chain_vars = x.var(axis=1, ddof=1)
    w = float(chain_vars.mean())
    b_over_n = float(chain_means.var(ddof=1))  # = B/n
    if w == 0.0:
        return PsrfResult(None)
    var_plus = (n - 1) / n * w + b_over_n
    r_hat = float(np.sqrt(var_plus / w))
    if corrected:
        # Brooks & Gelman (1998) degrees-of-freedom adjustment
        b = n * b_over_n
        v_hat = var_plus + b / (m * n)
        var_w = float(chain_vars.var(ddof=1)) / m
        cov_wm2 = float(np.cov(chain_vars, chain_means**2, ddof=1)[0, 1])
        cov_wm = float(np.cov(chain_vars, chain_means, ddof=1)[0, 1])
        xbar = float(chain_means.mean())
        var_v = (
            ((n - 1) / n) ** 2 * var_w
            + ((m + 1) / (m * n)) ** 2 * 2.0 / (m - 1) * b * b
            + 2.0 * (m + 1) * (n - 1) / (m * n * n) * n / m * (cov_wm2 - 2.0 * xbar * cov_wm)
        )
        if var_v > 0:
            d = 2.0 * v_hat * v_hat / var_v
            r_hat = float(np.sqrt((d + 3.0) / (d + 1.0) * v_hat / w))
    return PsrfResult(r_hat)


def _chain_ess(x: np.ndarray) -> float:
    """ESS of one chain via Geyer's initial positive sequence."""
    n = len(x)
    x = x - x.mean()
    var0 = float(np.dot(x, x)) / n
    if var0 == 0.0:
        raise InputError("effective sample size undefined for a constant chain")
    # autocovariances via FFT
    size = 1
    while size < 2 * n:
        size *= 2
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real / n
    rho = acov / acov[0]
    # pair sums rho[2m] + rho[2m+1]; truncate at the first nonpositive pair
    tau = -1.0
    m = 0
    while 2 * m + 1 < n:
        gamma = rho[2 * m] + rho[2 * m + 1]
        if gamma <= 0.0:
            break
        tau += 2.0 * gamma
        m += 1
    tau = max(tau, 1.0 / n)
    return n / tau


def effective_sample_size(chains) -> float:
    """Total ESS across chains (per-chain autocorrelation, summed)."""
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2:
        raise InputError("effective_sample_size expects a 2-D (chains x draws) array")
    if x.shape[0] < 2:
        raise InputError("effective_sample_size requires at least 2 chains")
    return float(sum(_chain_ess(row) for row in x))


@dataclass
class DiagnosticRow:
    parameter: str
    r_hat: Optional[float]
    ess: Optional[float]


def diagnostic_report(draws: PosteriorDraws, corrected: bool = False, split: bool = False):
    """One (name, R-hat, ESS) row per monitored scalar parameter."""
    rows = []
    for name, chains in draws.scalar_chains().items():
        r = psrf(chains, corrected=corrected, split=split)
        try:
            ess = effective_sample_size(chains)
        except InputError:
            ess = None
        rows.append(DiagnosticRow(name, r.point_estimate, ess))
    return rows


@dataclass
class PpcResult:
    bayesian_p_value: float
    discrepancies: list  # (t_real, t_replicate) pairs
    negative_replicate_fraction: float


def posterior_predictive_check(
    p: PosteriorDraws,
    data: AggregatedMatrix,
    n_draws: int,
    seed: int = 0,
) -> PpcResult:
    """Chi-square-discrepancy posterior predictive check of the normal model.

    For each sampled state, the discrepancy sum((y - nu)^2 / sigma0^2) of the
    real data is paired with the same statistic on a replicate drawn from the
    model at that state.  Replicates are not clamped to [0,1]; the fraction of
    negative replicate cells is reported.  The robust variant is rejected
    because the discrepancy needs the data variance, which the student-t does
    not have at the low degrees of freedom the posterior favors.
    """
    if p.variant != "normal":
        raise InputError(
            "posterior predictive check is defined only for the normal model: "
            "the student-t variance is not defined for degrees of freedom below 2"
        )
    if n_draws < 1:
        raise InputError(f"n_draws must be >= 1, got {n_draws}")
    total = p.n_chains * p.draws_per_chain
    if n_draws > total:
        raise InputError(f"n_draws {n_draws} exceeds total kept draws {total}")
    if tuple(p.algorithms) != tuple(data.algorithms) or tuple(p.datasets) != tuple(
        data.datasets
    ):
        raise InputError("draws and data matrix label mismatch")

    rng = np.random.default_rng(seed)
    di, ai = np.nonzero(data.mask)
    y = data.values[di, ai]
    beta = np.concatenate([c.beta for c in p.chains])
    alpha = p.pooled_alpha()
    delta = np.concatenate([c.delta for c in p.chains], axis=0)
    sigma0 = np.concatenate([c.sigma0 for c in p.chains])

    picks = rng.choice(total, size=n_draws, replace=False)
    pairs = []
    greater = 0
    negative = 0
    for idx in picks:
        nu = beta[idx] + alpha[idx, ai] + delta[idx, di]
        s = sigma0[idx]
        t_real = float(((y - nu) ** 2).sum() / (s * s))
        y_rep = nu + rng.normal(0.0, s, size=nu.shape)
        t_rep = float(((y_rep - nu) ** 2).sum() / (s * s))
        negative += int((y_rep < 0).sum())
        if t_rep >= t_real:
            greater += 1
        pairs.append((t_real, t_rep))
    p_value = greater / n_draws
    neg_frac = negative / (n_draws * len(y))
    return PpcResult(p_value, pairs, neg_frac)
