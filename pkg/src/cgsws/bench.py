"""Benchmark harness: test functions, SNR protocol, AMSE, and a Geweke check.

The simulation protocol matches the usual wavelet-denoising setup: a
test function sampled at t_i = i/n is rescaled so its sample standard
deviation equals the target SNR, unit-variance Gaussian noise is added,
and the estimator's error is averaged over grid points and replications,

    AMSE = 1/(M n) sum_k sum_i (fhat_k(t_i) - f(t_i))^2.

Each replication r owns two generator streams derived from the master
seed — 2r for the noise, 2r + 1 for the chain — so results are
independent of execution order and of how replications are distributed
across workers.

:func:`geweke_harness` is a joint-distribution correctness test for the
Gibbs kernel on a deliberately tiny model: it compares moments of
(parameters, data) under direct prior-forward simulation against the
Markov chain that alternates Gibbs sweeps with data re-draws.  Any
bugged full conditional shifts the latter's stationary distribution and
shows up as a large z-score.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import time

import numpy as np

from . import mat2
from .baselines import ceb_posterior_mean, cmws_hard
from .distributions import _inv_wishart_chol, make_rng, sample_inv_gamma
from .sampler import (
    GibbsModel,
    Hyperparams,
    SamplerConfig,
    denoise,
    estimate_sigma2_mad,
    init_state,
    sweep,
)
from .transform import (
    default_coarsest_level,
    forward,
    inverse,
    load_filters,
    noise_scale,
)

__all__ = [
    "SIGNALS",
    "METHODS",
    "make_test_signal",
    "rescale_snr",
    "amse",
    "BenchmarkSpec",
    "BenchmarkResult",
    "run_benchmark",
    "write_benchmark_csv",
    "write_benchmark_json",
    "GewekeReport",
    "geweke_harness",
]

METHODS = ("cgsws", "cmws-hard", "ceb")

# Donoho-Johnstone piecewise test functions: jump locations and weights
_DJ_T = np.array([0.1, 0.13, 0.15, 0.23, 0.25, 0.4, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCKS_H = np.array([4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMPS_H = np.array([4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMPS_W = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01,
                     0.005, 0.008, 0.005])


def _blocks(t):
    # right-continuous steps: a grid point landing exactly on a jump takes
    # the right-hand value, keeping the range to at most 12 distinct levels
    jumps = (t[:, None] >= _DJ_T[None, :]).astype(float)
    return jumps @ _BLOCKS_H


def _bumps(t):
    shapes = (1.0 + np.abs((t[:, None] - _DJ_T[None, :]) / _BUMPS_W[None, :])) ** -4
    return shapes @ _BUMPS_H


def _heavisine(t):
    return 4.0 * np.sin(4.0 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)


def _doppler(t):
    return np.sqrt(t * (1.0 - t)) * np.sin(2.0 * np.pi * 1.05 / (t + 0.05))


SIGNALS = {
    "blocks": _blocks,
    "bumps": _bumps,
    "doppler": _doppler,
    "heavisine": _heavisine,
}


def make_test_signal(name, n):
    """Evaluate a named test function on the grid t_i = i/n, i = 0..n-1."""
    if name not in SIGNALS:
        raise ValueError(
            f"unknown signal '{name}'; choose from {sorted(SIGNALS)}"
        )
    if n < 8:
        raise ValueError("need n >= 8 samples")
    return SIGNALS[name](np.arange(n) / n)


def rescale_snr(f, snr):
    """Scale f so sd(f) = snr, the target ratio against unit noise variance."""
    f = np.asarray(f, dtype=float)
    sd = f.std(ddof=1)
    if sd == 0:
        raise ValueError("cannot set an SNR for a constant signal")
    if snr <= 0:
        raise ValueError("snr must be positive")
    return f * (snr / sd)


def amse(estimates, truth):
    """Mean squared error averaged over replications and grid points."""
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=float)
    if estimates.shape[1] != truth.shape[0]:
        raise ValueError("estimate length does not match the truth")
    return float(np.mean((estimates - truth[None, :]) ** 2))


@dataclasses.dataclass(frozen=True)
class BenchmarkSpec:
    signal: str = "doppler"
    n: int = 256
    snr: float = 5.0
    reps: int = 20
    method: str = "cgsws"
    seed: int = 0
    sampler: SamplerConfig = dataclasses.field(
        default_factory=lambda: SamplerConfig(iters=4000, burnin=2000)
    )

    def __post_init__(self):
        if self.signal not in SIGNALS:
            raise ValueError(f"unknown signal '{self.signal}'")
        if self.method not in METHODS:
            raise ValueError(f"unknown method '{self.method}'")
        if self.n < 32 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two, at least 32")
        if self.reps < 1:
            raise ValueError("need at least one replication")


@dataclasses.dataclass(frozen=True)
class BenchmarkResult:
    amse: float
    mses: np.ndarray
    elapsed: float
    spec: BenchmarkSpec


def _replicate(spec, truth, rep):
    """One replication: fresh noise, denoise, squared error."""
    y = truth + make_rng(spec.seed, 2 * rep).standard_normal(spec.n)
    cfg = spec.sampler
    if spec.method == "cgsws":
        est = denoise(y, cfg, rng=make_rng(spec.seed, 2 * rep + 1)).estimate
    else:
        filters = load_filters(cfg.wavelet)
        j0 = cfg.j0 if cfg.j0 is not None else default_coarsest_level(spec.n)
        tree = forward(y, j0, filters)
        noise = noise_scale(spec.n, j0, filters)
        s2h = max(estimate_sigma2_mad(tree), 1e-20)
        if spec.method == "cmws-hard":
            shrunk = cmws_hard(tree, s2h, noise)
        else:
            shrunk = ceb_posterior_mean(tree, s2h, noise)
        est, _ = inverse(shrunk, filters)
    return float(np.mean((est - truth) ** 2))


def run_benchmark(spec, workers=1):
    """Replicate the denoising experiment and average the MSEs.

    Deterministic given spec.seed; with workers > 1 replications are
    farmed out to processes, and the per-replication streams make the
    result identical to a sequential run.
    """
    truth = rescale_snr(make_test_signal(spec.signal, spec.n), spec.snr)
    t0 = time.perf_counter()
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            mses = list(pool.map(_replicate, *zip(*[(spec, truth, r)
                                                    for r in range(spec.reps)])))
    else:
        mses = [_replicate(spec, truth, r) for r in range(spec.reps)]
    mses = np.array(mses)
    return BenchmarkResult(amse=float(mses.mean()), mses=mses,
                           elapsed=time.perf_counter() - t0, spec=spec)


def _spec_fields(spec):
    return {
        "signal": spec.signal,
        "n": spec.n,
        "snr": spec.snr,
        "reps": spec.reps,
        "method": spec.method,
        "seed": spec.seed,
        "iters": spec.sampler.iters,
        "burnin": spec.sampler.burnin,
        "wavelet": spec.sampler.wavelet,
        "j0": spec.sampler.j0,
    }


def write_benchmark_csv(result, path):
    """One row per replication; spec fields and the AMSE are echoed on each."""
    fields = _spec_fields(result.spec)
    with open(path, "w") as fh:
        fh.write(",".join(list(fields) + ["rep", "mse", "amse"]) + "\n")
        prefix = ",".join("" if v is None else str(v) for v in fields.values())
        for rep, mse in enumerate(result.mses):
            fh.write(f"{prefix},{rep},{mse:.10g},{result.amse:.10g}\n")


def write_benchmark_json(result, path):
    """Summary sidecar; excludes wall time so reruns are byte-identical."""
    payload = {
        "spec": _spec_fields(result.spec),
        "amse": result.amse,
        "mses": [float(m) for m in result.mses],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# joint-distribution correctness (two-simulator comparison)


@dataclasses.dataclass(frozen=True)
class GewekeReport:
    names: tuple
    z_scores: np.ndarray
    prior_means: np.ndarray
    chain_means: np.ndarray
    draws: int
    mutation: str | None

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z_scores)))


def _geweke_stats(sigma2, eps, c_tri, z, v, d):
    """Monitored functions of (parameters, data); finite prior variance each."""
    sigma2 = np.atleast_1d(sigma2)
    cols = [
        sigma2,
        np.log(sigma2),
        eps[..., 0], eps[..., 1], eps[..., 2],
        c_tri[..., 0, 0] + c_tri[..., 0, 2],
        c_tri[..., 1, 0] + c_tri[..., 1, 2],
        c_tri[..., 2, 0] + c_tri[..., 2, 2],
        z.mean(axis=-1),
        v.mean(axis=-1),
        (d * d).sum(axis=(-1, -2)) / d.shape[-2],
    ]
    return np.stack([np.broadcast_to(c, sigma2.shape) for c in cols], axis=-1)


_GEWEKE_NAMES = ("sigma2", "log_sigma2", "eps_lev0", "eps_lev1", "eps_lev2",
                 "tr_C_lev0", "tr_C_lev1", "tr_C_lev2", "mean_z", "mean_v",
                 "mean_d_sq")


def _prior_draw(model, hp, noise_chol, rng, size):
    """Vectorized draws of (parameters, data) from the joint prior."""
    L, n_det = model.n_levels, model.n_det
    lev = model.lev_of
    sigma2 = sample_inv_gamma(hp.a, hp.b, rng, size=size)
    eps = rng.random((size, L))
    a_chol = mat2.chol(hp.A[:, 0, 0], hp.A[:, 0, 1], hp.A[:, 1, 1])
    c_tri = np.empty((size, L, 3))
    for j in range(L):
        c11, c12, c22 = _inv_wishart_chol(
            a_chol[0][j], a_chol[1][j], a_chol[2][j],
            np.full(size, hp.w), rng)
        c_tri[:, j] = np.stack([c11, c12, c22], axis=-1)
    z = (rng.random((size, n_det)) < eps[:, lev]).astype(float)
    v = rng.gamma(1.5, 8.0, size=(size, n_det))
    ca, cb, cc = (v * c_tri[:, lev, i] for i in range(3))
    l11, l21, l22 = mat2.chol(ca, cb, cc)
    g = rng.standard_normal((size, n_det, 2))
    theta = np.empty((size, n_det, 2))
    theta[..., 0] = z * l11 * g[..., 0]
    theta[..., 1] = z * (l21 * g[..., 0] + l22 * g[..., 1])
    h = rng.standard_normal((size, n_det, 2))
    s = np.sqrt(sigma2)[:, None]
    d = np.empty_like(theta)
    d[..., 0] = theta[..., 0] + s * noise_chol[0][lev] * h[..., 0]
    d[..., 1] = theta[..., 1] + s * (noise_chol[1][lev] * h[..., 0]
                                     + noise_chol[2][lev] * h[..., 1])
    return sigma2, eps, c_tri, z, v, theta, d


def geweke_harness(draws=100_000, seed=0, mutation=None, n=16, j0=1):
    """Two-simulator comparison of prior-forward vs Gibbs-with-redraw moments.

    ``mutation='sigma2-shape'`` runs the chain with the noise-variance
    update's shape parameter off by one — a deliberately planted bug
    that a sound harness must flag with large z-scores.
    """
    if mutation not in (None, "sigma2-shape"):
        raise ValueError("unknown mutation")
    filters = load_filters("scd3")
    tree = forward(np.zeros(n), j0, filters)
    noise = noise_scale(n, j0, filters)
    L = len(tree.details)
    hp = Hyperparams(a=4.0, b=1.0, w=10.0,
                     A=np.broadcast_to(np.eye(2), (L, 2, 2)).copy(), j0=j0)
    model = GibbsModel(tree, noise, hp)
    sa, sb, sc = mat2.unpack(noise.sigma)
    noise_chol = mat2.chol(sa, sb, sc)
    rng = make_rng(seed, 0)

    # simulator 1: independent draws from the joint prior
    sigma2, eps, c_tri, z, v, _, d = _prior_draw(model, hp, noise_chol, rng, draws)
    mc = _geweke_stats(sigma2, eps, c_tri, z, v, d)
    mc_mean = mc.mean(axis=0)
    mc_se = mc.std(axis=0, ddof=1) / np.sqrt(draws)

    # simulator 2: Gibbs sweeps interleaved with data re-draws
    rng2 = make_rng(seed, 1)
    s2_0, eps_0, c_0, z_0, v_0, th_0, d_0 = _prior_draw(model, hp, noise_chol,
                                                        rng2, 1)
    state = init_state(model)
    state.sigma2 = float(s2_0[0])
    state.eps = eps_0[0].copy()
    state.C = c_0[0].copy()
    state.z = z_0[0].astype(np.uint8)
    state.v = v_0[0].copy()
    state.theta = th_0[0].copy()
    model.set_data(d_0[0, :, 0] + 1j * d_0[0, :, 1])

    lev = model.lev_of
    sc_stats = np.empty((draws, len(_GEWEKE_NAMES)))
    for it in range(draws):
        sweep(state, model, rng2)
        if mutation == "sigma2-shape":
            rate = 1.0 / hp.b + 0.5 * model.residual_quadform(state)
            state.sigma2 = sample_inv_gamma(hp.a + model.n_det + 1.0,
                                            1.0 / rate, rng2)
        h = rng2.standard_normal((model.n_det, 2))
        s = np.sqrt(state.sigma2)
        d1 = state.theta[:, 0] + s * noise_chol[0][lev] * h[:, 0]
        d2 = state.theta[:, 1] + s * (noise_chol[1][lev] * h[:, 0]
                                      + noise_chol[2][lev] * h[:, 1])
        model.set_data(d1 + 1j * d2)
        sc_stats[it] = _geweke_stats(state.sigma2, state.eps, state.C[None],
                                     state.z.astype(float), state.v,
                                     np.stack([d1, d2], axis=-1))[0]

    sc_mean = sc_stats.mean(axis=0)
    n_batch = max(10, min(100, draws // 100))
    usable = draws - draws % n_batch
    batches = sc_stats[:usable].reshape(n_batch, -1, len(_GEWEKE_NAMES))
    sc_se = batches.mean(axis=1).std(axis=0, ddof=1) / np.sqrt(n_batch)

    zsc = (mc_mean - sc_mean) / np.sqrt(mc_se ** 2 + sc_se ** 2)
    return GewekeReport(names=_GEWEKE_NAMES, z_scores=zsc,
                        prior_means=mc_mean, chain_means=sc_mean,
                        draws=draws, mutation=mutation)
