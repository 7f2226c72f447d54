"""Random-variate generators and densities used by the Gibbs sampler.

Parameter conventions (non-standard ones are deliberate and load-bearing):

* inverse gamma ``IG(shape, scale)`` has density proportional to
  x^(-shape-1) exp(-1/(scale*x)), so its mean is 1/(scale*(shape-1)).
  Note the scale sits in the *denominator* of the exponent; using the
  usual rate convention here would corrupt the noise-variance update.
* ``Ga(shape, scale)`` is the ordinary gamma with mean shape*scale.
* ``GIG(a, b, p)`` has density proportional to x^(p-1) exp(-(a*x+b/x)/2).
* inverse Wishart ``IW(A, dof)`` (2x2 only) has mean A/(dof - 3).

Streams: :func:`make_rng` derives one independent generator per
(seed, stream) pair via ``SeedSequence(seed, spawn_key=(stream,))``; a
fixed pair reproduces an identical variate sequence across runs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import mat2

__all__ = [
    "make_rng",
    "sample_inv_gamma",
    "sample_gig",
    "sample_inv_wishart",
    "sample_bernoulli",
    "sample_beta",
    "sample_gamma",
    "sample_binormal",
    "loglik_zero",
    "logmarg_signal",
    "inv_gamma_logpdf",
    "gig_logpdf",
]

_LOG_2PI = math.log(2.0 * math.pi)


def make_rng(seed, stream=0):
    """Independent generator for the given master seed and stream id."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# scalar-family samplers


def sample_inv_gamma(shape, scale, rng, size=None):
    """Draw from IG(shape, scale); the reciprocal is Ga(shape, scale)."""
    if shape <= 0 or scale <= 0:
        raise ValueError("inverse gamma requires shape > 0 and scale > 0")
    return 1.0 / rng.gamma(shape, scale, size=size)


def sample_gamma(shape, scale, rng, size=None):
    if shape <= 0 or scale <= 0:
        raise ValueError("gamma requires shape > 0 and scale > 0")
    return rng.gamma(shape, scale, size=size)


def sample_beta(a, b, rng, size=None):
    if a <= 0 or b <= 0:
        raise ValueError("beta requires positive parameters")
    return rng.beta(a, b, size=size)


def sample_bernoulli(p, rng, size=None):
    p = np.asarray(p)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("Bernoulli probability outside [0, 1]")
    return (rng.random(size=size if size is not None else p.shape or None) < p).astype(
        np.uint8
    )


def sample_binormal(mean, cov, rng, size=None):
    """Bivariate normal draws with the given mean and SPD covariance."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if mean.shape != (2,) or cov.shape != (2, 2):
        raise ValueError("mean must be a 2-vector and cov a 2x2 matrix")
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    if not (a > 0 and a * c - b * b > 0):
        raise ValueError("covariance is not symmetric positive definite")
    l11, l21, l22 = mat2.chol(a, b, c)
    z = rng.standard_normal((2,) if size is None else (size, 2))
    x1 = mean[0] + l11 * z[..., 0]
    x2 = mean[1] + l21 * z[..., 0] + l22 * z[..., 1]
    return np.stack([x1, x2], axis=-1)


# ---------------------------------------------------------------------------
# generalized inverse Gaussian


def sample_gig(a, b, p, rng, size=None):
    """Draw from GIG(a, b, p).

    ``|p| = 1/2`` (the sampler's operating index) is handled exactly
    through the inverse-Gaussian transformation and accepts array-valued
    ``a``/``b``.  Other indices use a mode-shifted ratio-of-uniforms
    rejection sampler on the standardized two-parameter form and accept
    scalar parameters only.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(a_arr <= 0) or np.any(b_arr <= 0):
        raise ValueError("GIG requires a > 0 and b > 0")
    if p == -0.5:
        # matches the inverse Gaussian with mean sqrt(b/a) and shape b
        return rng.wald(np.sqrt(b_arr / a_arr), b_arr, size=size)
    if p == 0.5:
        # reciprocal of GIG(b, a, -1/2)
        return 1.0 / rng.wald(np.sqrt(a_arr / b_arr), a_arr, size=size)
    if a_arr.ndim or b_arr.ndim:
        raise ValueError("array parameters are only supported for p = +/-1/2")
    if p < 0:
        return 1.0 / _gig_rou(float(b), float(a), -float(p), rng, size)
    return _gig_rou(float(a), float(b), float(p), rng, size)


def _gig_rou(a, b, p, rng, size):
    """Mode-shifted ratio-of-uniforms for GIG(a, b, p), p > 0.

    Standardizes to h(t) = t^(p-1) exp(-omega*(t + 1/t)/2) with
    omega = sqrt(a*b) and rescales draws by sqrt(b/a).  The enclosing
    rectangle comes from the mode of h and the two extrema of
    (t - mode)^2 h(t), which are roots of a cubic.
    """
    omega = math.sqrt(a * b)
    scale = math.sqrt(b / a)
    mode = ((p - 1.0) + math.sqrt((p - 1.0) ** 2 + omega * omega)) / omega

    def log_h(t):
        return (p - 1.0) * np.log(t) - 0.5 * omega * (t + 1.0 / t)

    roots = np.roots(
        [
            1.0,
            -(2.0 * (p + 1.0) / omega + mode),
            2.0 * mode * (p - 1.0) / omega - 1.0,
            mode,
        ]
    )
    real = np.sort(roots[np.abs(roots.imag) < 1e-9 * np.abs(roots).max()].real)
    pos = real[real > 0]
    if len(pos) < 2:
        raise RuntimeError("ratio-of-uniforms setup failed to bracket the density")
    t_lo, t_hi = pos[0], pos[-1]
    log_u_max = 0.5 * log_h(mode)
    v_lo = (t_lo - mode) * math.exp(0.5 * log_h(t_lo))
    v_hi = (t_hi - mode) * math.exp(0.5 * log_h(t_hi))

    total = 1 if size is None else int(np.prod(size))
    out = np.empty(total)
    filled = 0
    for _ in range(1000):
        batch = max(256, 2 * (total - filled))
        u = rng.random(batch)
        v = v_lo + (v_hi - v_lo) * rng.random(batch)
        # u is uniform on (0, 1); the actual ROU coordinate is u * u_max
        t = mode + (v / u) * math.exp(-log_u_max)
        good = (u > 0.0) & (t > 0.0) & np.isfinite(t)
        tg = t[good]
        acc = tg[2.0 * np.log(u[good]) + 2.0 * log_u_max <= log_h(tg)]
        take = min(len(acc), total - filled)
        out[filled: filled + take] = acc[:take]
        filled += take
        if filled == total:
            break
    else:
        raise RuntimeError("GIG rejection sampler failed to accept enough draws")
    out *= scale
    if size is None:
        return float(out[0])
    return out.reshape(size)


# ---------------------------------------------------------------------------
# inverse Wishart (2x2)


def _inv_wishart_chol(l11, l21, l22, dof, rng):
    """IW draws as component triples, given Cholesky triples of the scale.

    All arguments broadcast; one draw per element of ``dof``.  Uses the
    Bartlett construction for Wishart(dof, scale^-1) and inverts in
    closed form.
    """
    dof = np.asarray(dof, dtype=float)
    c1sq = rng.chisquare(dof)
    c2sq = rng.chisquare(dof - 1.0)
    z = rng.standard_normal(dof.shape if dof.shape else None)
    w11 = c1sq
    w12 = np.sqrt(c1sq) * z
    w22 = z * z + c2sq
    i11, i12, i22 = mat2.inv(w11, w12, w22)
    c11 = l11 * l11 * i11
    c12 = l11 * (l21 * i11 + l22 * i12)
    c22 = l21 * l21 * i11 + 2.0 * l21 * l22 * i12 + l22 * l22 * i22
    return c11, c12, c22


def sample_inv_wishart(scale, dof, rng, size=None):
    """Draw 2x2 SPD matrices from IW(scale, dof); mean is scale/(dof-3)."""
    scale = np.asarray(scale, dtype=float)
    if scale.shape != (2, 2):
        raise ValueError("inverse Wishart scale must be 2x2")
    a, b, c = scale[0, 0], scale[0, 1], scale[1, 1]
    if not (abs(scale[0, 1] - scale[1, 0]) < 1e-12 and a > 0 and a * c - b * b > 0):
        raise ValueError("inverse Wishart scale must be symmetric positive definite")
    if dof <= 3:
        raise ValueError("inverse Wishart needs dof > 3 for the 2x2 mean to exist")
    l11, l21, l22 = mat2.chol(a, b, c)
    dof_arr = np.full(size, float(dof)) if size is not None else np.asarray(float(dof))
    triples = _inv_wishart_chol(l11, l21, l22, dof_arr, rng)
    return mat2.to_matrix(mat2.pack(*triples))


# ---------------------------------------------------------------------------
# densities


def _binormal_logpdf(d1, d2, a, b, c):
    """Zero-mean bivariate normal log density with covariance triple (a,b,c)."""
    det = a * c - b * b
    q = (c * d1 * d1 - 2.0 * b * d1 * d2 + a * d2 * d2) / det
    return -_LOG_2PI - 0.5 * np.log(det) - 0.5 * q


def _cov_triple(m, name):
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"{name} must be a 2x2 matrix")
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    if not (a > 0 and a * c - b * b > 0):
        raise ValueError(f"{name} is not symmetric positive definite")
    return a, b, c


def loglik_zero(d, sigma2, noise_cov):
    """log f(d | 0, sigma2 * noise_cov) for bivariate d (leading axes free)."""
    d = np.asarray(d, dtype=float)
    a, b, c = _cov_triple(noise_cov, "noise_cov")
    s2 = np.asarray(sigma2, dtype=float)
    if np.any(s2 <= 0):
        raise ValueError("sigma2 must be positive")
    return _binormal_logpdf(d[..., 0], d[..., 1], s2 * a, s2 * b, s2 * c)


def logmarg_signal(d, sigma2, noise_cov, v, signal_cov):
    """log of the signal-branch marginal: N2(d; 0, sigma2*noise_cov + v*signal_cov).

    ``v`` may be an array matching the leading axes of ``d``; ``v = 0``
    collapses to :func:`loglik_zero`.
    """
    d = np.asarray(d, dtype=float)
    na, nb, nc = _cov_triple(noise_cov, "noise_cov")
    ca, cb, cc = _cov_triple(signal_cov, "signal_cov")
    s2 = np.asarray(sigma2, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(s2 <= 0):
        raise ValueError("sigma2 must be positive")
    if np.any(v < 0):
        raise ValueError("latent scale v must be nonnegative")
    return _binormal_logpdf(
        d[..., 0],
        d[..., 1],
        s2 * na + v * ca,
        s2 * nb + v * cb,
        s2 * nc + v * cc,
    )


def inv_gamma_logpdf(x, shape, scale):
    """Log density of IG(shape, scale) in the scale-in-denominator convention."""
    x = np.asarray(x, dtype=float)
    if shape <= 0 or scale <= 0:
        raise ValueError("inverse gamma requires shape > 0 and scale > 0")
    return (
        -special.gammaln(shape)
        - shape * math.log(scale)
        - (shape + 1.0) * np.log(x)
        - 1.0 / (scale * x)
    )


def gig_logpdf(x, a, b, p):
    """Log density of GIG(a, b, p); normalization uses the Bessel K function."""
    x = np.asarray(x, dtype=float)
    if a <= 0 or b <= 0:
        raise ValueError("GIG requires a > 0 and b > 0")
    omega = math.sqrt(a * b)
    log_norm = 0.5 * p * math.log(a / b) - math.log(2.0) - (
        math.log(special.kve(p, omega)) - omega
    )
    return log_norm + (p - 1.0) * np.log(x) - 0.5 * (a * x + b / x)
