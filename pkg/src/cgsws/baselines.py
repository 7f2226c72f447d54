"""Reference estimators: hard keep-or-kill and empirical-Bayes shrinkage.

Both operate coefficient-wise in the wavelet domain on the same noise
geometry as the Gibbs smoother (per-level shape Sigma_j, MAD variance
estimate), so method comparisons isolate the estimator itself.

* :func:`cmws_hard` keeps a complex coefficient untouched — magnitude
  and phase — whenever its noise-normalized quadratic form
  s = d'(sigma2_hat Sigma_j)^{-1} d exceeds a threshold, and zeroes it
  otherwise.  Under pure noise s is chi-square with 2 dof, so the
  default lambda = 2 log n gives a survivor probability of 1/n per
  coefficient.
* :func:`ceb_posterior_mean` fits, per level, a two-point mixture
  (1-eps) N2(0, sigma2_hat Sigma_j) + eps N2(0, sigma2_hat Sigma_j + V)
  to the observed coefficients by maximum marginal likelihood, then
  applies the posterior-mean shrinkage p_hat * V(V + sigma2_hat
  Sigma_j)^{-1} d.  The matrix factor has spectral norm below one in
  the noise metric, so shrinkage never amplifies a coefficient.

The mixture threshold and the optimizer are implementation choices;
both estimators are deterministic given their inputs.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
from scipy import optimize, special

from . import mat2
from .transform import CoeffTree

__all__ = ["ThresholdRule", "CEBLevelParams", "cmws_hard", "ceb_posterior_mean"]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclasses.dataclass(frozen=True)
class ThresholdRule:
    """Cutoff for the chi-square-scaled statistic d'(sigma2 Sigma_j)^{-1} d."""

    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("threshold must be nonnegative")

    @classmethod
    def universal(cls, n):
        return cls(lam=2.0 * math.log(n))


@dataclasses.dataclass(frozen=True)
class CEBLevelParams:
    """Fitted mixture weight and slab covariance for one level."""

    eps: float
    V: np.ndarray  # (2, 2) SPD
    converged: bool


def _stat(coef, sigma2_hat, Sg):
    """Noise-normalized quadratic form of each complex coefficient."""
    ia, ib, ic = mat2.inv(Sg[0, 0], Sg[0, 1], Sg[1, 1])
    q = mat2.quad(ia, ib, ic, coef.real, coef.imag)
    return q / sigma2_hat


def cmws_hard(tree, sigma2_hat, noise, rule=None):
    """Keep-or-kill thresholding; returns a new tree, input untouched."""
    if sigma2_hat <= 0:
        raise ValueError("sigma2_hat must be positive")
    if rule is None:
        rule = ThresholdRule.universal(tree.n)
    details = []
    for i, level in enumerate(tree.details):
        coef = np.asarray(level)
        s = _stat(coef, sigma2_hat, noise.matrix(tree.j0 + i))
        details.append(np.where(s > rule.lam, coef, 0.0))
    return CoeffTree(n=tree.n, j0=tree.j0, approx=tree.approx.copy(),
                     details=details)


# ---------------------------------------------------------------------------
# empirical-Bayes posterior mean


def _mix_negloglik(x, d1, d2, na, nb, nc):
    """Negative marginal log likelihood of one level's mixture fit.

    Parameter vector x = (logit eps, log l11, l21, log l22) with
    V = L L'; (na, nb, nc) is the noise covariance triple
    sigma2_hat * Sigma_j.
    """
    eps = special.expit(x[0])
    l11, l21, l22 = math.exp(x[1]), x[2], math.exp(x[3])
    va = l11 * l11
    vb = l11 * l21
    vc = l21 * l21 + l22 * l22

    det0 = na * nc - nb * nb
    q0 = (nc * d1 * d1 - 2.0 * nb * d1 * d2 + na * d2 * d2) / det0
    log_f0 = -_LOG_2PI - 0.5 * math.log(det0) - 0.5 * q0

    ma, mb, mc = na + va, nb + vb, nc + vc
    det1 = ma * mc - mb * mb
    q1 = (mc * d1 * d1 - 2.0 * mb * d1 * d2 + ma * d2 * d2) / det1
    log_f1 = -_LOG_2PI - 0.5 * math.log(det1) - 0.5 * q1

    with np.errstate(divide="ignore"):
        ll = np.logaddexp(np.log1p(-eps) + log_f0, np.log(eps) + log_f1)
    val = -float(ll.sum())
    return val if np.isfinite(val) else 1e300


def _moment_slab(coef, noise_tri):
    """Moment-based slab start value: sample covariance minus the noise."""
    parts = np.stack([coef.real, coef.imag])
    cov = np.cov(parts, ddof=1) if coef.size > 1 else np.zeros((2, 2))
    V = cov - np.array([[noise_tri[0], noise_tri[1]],
                        [noise_tri[1], noise_tri[2]]])
    lam_min = mat2.eig_min(V[0, 0], V[0, 1], V[1, 1])
    if lam_min <= 0:
        V = V + (abs(lam_min) + max(1e-6 * np.trace(cov), 1e-8)) * np.eye(2)
    return V


def _fit_level(coef, na, nb, nc):
    """Maximize the mixture likelihood from three starts; best fit wins."""
    d1, d2 = coef.real, coef.imag
    V0 = _moment_slab(coef, (na, nb, nc))
    l11, l21, l22 = mat2.chol(V0[0, 0], V0[0, 1], V0[1, 1])
    starts = []
    for eps0, fac in ((0.5, 1.0), (0.1, 3.0), (0.9, 1.0 / 3.0)):
        r = math.sqrt(fac)
        starts.append([special.logit(eps0), math.log(l11 * r), l21 * r,
                       math.log(l22 * r)])
    best, best_val = None, np.inf
    for x0 in starts:
        try:
            res = optimize.minimize(
                _mix_negloglik, x0, args=(d1, d2, na, nb, nc),
                method="Nelder-Mead",
                options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000},
            )
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(res.fun) and res.fun < best_val:
            best, best_val = res, res.fun
    if best is None:
        warnings.warn("mixture fit failed; falling back to moment estimates",
                      stacklevel=3)
        s = _stat(coef, 1.0, np.array([[na, nb], [nb, nc]]))
        eps = float(np.clip(np.mean(s > 2.0 * math.log(max(coef.size, 2))),
                            0.01, 0.99))
        return CEBLevelParams(eps=eps, V=V0, converged=False)
    x = best.x
    L = np.array([[math.exp(x[1]), 0.0], [x[2], math.exp(x[3])]])
    return CEBLevelParams(eps=float(special.expit(x[0])), V=L @ L.T,
                          converged=bool(best.success))


def ceb_posterior_mean(tree, sigma2_hat, noise, return_params=False):
    """Bivariate posterior-mean shrinkage under per-level fitted mixtures."""
    if sigma2_hat <= 0:
        raise ValueError("sigma2_hat must be positive")
    details = []
    fits = []
    for i, level in enumerate(tree.details):
        coef = np.asarray(level)
        Sg = noise.matrix(tree.j0 + i)
        na, nb, nc = sigma2_hat * Sg[0, 0], sigma2_hat * Sg[0, 1], sigma2_hat * Sg[1, 1]
        fit = _fit_level(coef, na, nb, nc)
        fits.append(fit)
        va, vb, vc = fit.V[0, 0], fit.V[0, 1], fit.V[1, 1]

        d1, d2 = coef.real, coef.imag
        det0 = na * nc - nb * nb
        log_f0 = -0.5 * math.log(det0) - 0.5 * (
            nc * d1 * d1 - 2.0 * nb * d1 * d2 + na * d2 * d2) / det0
        ma, mb, mc = na + va, nb + vb, nc + vc
        det1 = ma * mc - mb * mb
        log_f1 = -0.5 * math.log(det1) - 0.5 * (
            mc * d1 * d1 - 2.0 * mb * d1 * d2 + ma * d2 * d2) / det1
        with np.errstate(divide="ignore"):
            prior_odds = np.log(fit.eps) - np.log1p(-fit.eps)
        p_hat = special.expit(prior_odds + log_f1 - log_f0)

        # shrink matrix V (V + noise)^{-1}, applied as a 2x2 per coefficient
        i1a, i1b, i1c = mat2.inv(ma, mb, mc)
        s11 = va * i1a + vb * i1b
        s12 = va * i1b + vb * i1c
        s21 = vb * i1a + vc * i1b
        s22 = vb * i1b + vc * i1c
        t1 = p_hat * (s11 * d1 + s12 * d2)
        t2 = p_hat * (s21 * d1 + s22 * d2)
        details.append(t1 + 1j * t2)
    out = CoeffTree(n=tree.n, j0=tree.j0, approx=tree.approx.copy(),
                    details=details)
    if return_params:
        return out, fits
    return out
