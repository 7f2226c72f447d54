"""Complex-valued Daubechies wavelet transform with periodic boundaries.

The analysis bank is the symmetric complex Daubechies filter with three
vanishing moments ("scd3", length 6).  Signals of dyadic length n = 2^J
are decomposed down to a coarsest level ``j0``; detail level j holds 2^j
complex coefficients and the remaining 2^j0 scaling coefficients are kept
untouched.

Conventions (these fix the meaning of every downstream covariance):

* analysis step:  out[k] = sum_m  f[m] * x[(2k + m) mod N]   (no conjugate)
* synthesis step: adjoint with conjugated taps, so synthesis(analysis(x)) == x
* flattened coefficient order: scaling block first, then detail levels
  coarse to fine, each in natural position order.  ``build_matrix`` uses
  this order, i.e. W @ x equals the flattened output of :func:`forward`.

Because the analysis taps are complex, transforming real white noise
yields correlated real and imaginary parts; :func:`noise_covariance`
extracts the per-level 2x2 unit-noise covariance from diag(W W^T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ComplexFilterPair",
    "CoeffTree",
    "NoiseScale",
    "FilterValidationError",
    "TransformError",
    "load_filters",
    "supported_filters",
    "quadrature_mirror",
    "validate_filter_pair",
    "forward",
    "inverse",
    "synthesize",
    "build_matrix",
    "noise_covariance",
    "noise_scale",
    "default_coarsest_level",
]

DENSE_MATRIX_CAP = 4096


class FilterValidationError(ValueError):
    """A filter bank failed its orthonormality/moment invariants."""


class TransformError(ValueError):
    """Malformed signal or coefficient tree."""


@dataclass(frozen=True)
class ComplexFilterPair:
    """Low-pass/high-pass analysis pair of a complex orthonormal bank."""

    name: str
    low_pass: np.ndarray
    high_pass: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "low_pass", np.asarray(self.low_pass, dtype=complex))
        object.__setattr__(self, "high_pass", np.asarray(self.high_pass, dtype=complex))

    def __len__(self):
        return len(self.low_pass)


def quadrature_mirror(low_pass):
    """High-pass taps g[k] = (-1)^k conj(h[L-1-k]) of a low-pass filter."""
    h = np.asarray(low_pass, dtype=complex)
    signs = (-1.0) ** np.arange(len(h))
    return signs * np.conj(h[::-1])


def _scd3_low_pass():
    # Closed form of the length-6 symmetric complex Daubechies filter:
    # sqrt(2)/64 * [-3-i*s, 5-i*s, 30+2i*s, 30+2i*s, 5-i*s, -3-i*s], s = sqrt(15).
    s = math.sqrt(15.0)
    half = np.array([-3.0 - 1j * s, 5.0 - 1j * s, 30.0 + 2j * s])
    return math.sqrt(2.0) / 64.0 * np.concatenate([half, half[::-1]])


_FILTER_TABLE = {
    "scd3": _scd3_low_pass,
}


def supported_filters():
    return sorted(_FILTER_TABLE)


def load_filters(name):
    """Return the validated analysis pair for a named filter bank."""
    key = str(name).lower()
    if key not in _FILTER_TABLE:
        raise FilterValidationError(
            f"unknown filter {name!r}; supported filters: {', '.join(supported_filters())}"
        )
    h = _FILTER_TABLE[key]()
    pair = ComplexFilterPair(name=key, low_pass=h, high_pass=quadrature_mirror(h))
    validate_filter_pair(pair)
    return pair


def validate_filter_pair(pair, tol=1e-10):
    """Check DC gain, vanishing moment, shift orthonormality and symmetry.

    Raises :class:`FilterValidationError` naming the violated invariant.
    """
    h = pair.low_pass
    g = pair.high_pass
    L = len(h)
    if len(g) != L:
        raise FilterValidationError(f"{pair.name}: low/high pass length mismatch")
    if abs(h.sum() - math.sqrt(2.0)) > tol:
        raise FilterValidationError(f"{pair.name}: low-pass DC gain is not sqrt(2)")
    if abs(g.sum()) > tol:
        raise FilterValidationError(f"{pair.name}: high-pass does not annihilate constants")
    for m in range(L // 2):
        target = 1.0 if m == 0 else 0.0
        if abs(np.vdot(h[2 * m:], h[: L - 2 * m]) - target) > tol:
            raise FilterValidationError(
                f"{pair.name}: low-pass violates orthonormality at even shift {m}"
            )
        if abs(np.vdot(g[2 * m:], g[: L - 2 * m]) - target) > tol:
            raise FilterValidationError(
                f"{pair.name}: high-pass violates orthonormality at even shift {m}"
            )
    for m in range(-(L // 2) + 1, L // 2):
        lo = max(0, 2 * m)
        hi = min(L, L + 2 * m)
        if abs(np.sum(h[lo - 2 * m: hi - 2 * m] * np.conj(g[lo:hi]))) > tol:
            raise FilterValidationError(
                f"{pair.name}: low/high pass are not mutually orthogonal at shift {m}"
            )
    if not np.allclose(h, h[::-1], atol=tol):
        raise FilterValidationError(f"{pair.name}: low-pass is not symmetric")


@dataclass
class CoeffTree:
    """Pyramid of complex wavelet coefficients of a length-2^J signal.

    ``details[i]`` holds the 2^(j0+i) coefficients of detail level j0+i for
    i = 0 .. J-1-j0; ``approx`` holds the 2^j0 untouched scaling
    coefficients.
    """

    n: int
    j0: int
    approx: np.ndarray
    details: list = field(default_factory=list)

    @property
    def j_max(self):
        """Finest detail level, log2(n) - 1."""
        return self.n.bit_length() - 2

    @property
    def levels(self):
        """Detail level indices, coarse to fine."""
        return range(self.j0, self.j_max + 1)

    @property
    def detail_count(self):
        return self.n - (1 << self.j0)

    def validate(self):
        if len(self.approx) != 1 << self.j0:
            raise TransformError("scaling block has wrong length")
        expected = [1 << j for j in self.levels]
        got = [len(d) for d in self.details]
        if got != expected:
            raise TransformError(f"detail level sizes {got} != expected {expected}")

    def flatten(self):
        """Coefficients in matrix order: scaling block, then levels coarse to fine."""
        return np.concatenate([self.approx] + [np.asarray(d) for d in self.details])

    @classmethod
    def from_flat(cls, coeffs, n, j0):
        coeffs = np.asarray(coeffs, dtype=complex)
        if len(coeffs) != n:
            raise TransformError("flattened coefficient count does not match n")
        J = n.bit_length() - 1
        parts = []
        pos = 1 << j0
        approx = coeffs[:pos].copy()
        for j in range(j0, J):
            parts.append(coeffs[pos: pos + (1 << j)].copy())
            pos += 1 << j
        return cls(n=n, j0=j0, approx=approx, details=parts)

    def copy(self):
        return CoeffTree(
            n=self.n,
            j0=self.j0,
            approx=self.approx.copy(),
            details=[d.copy() for d in self.details],
        )


def _check_signal_length(n):
    if n < 4 or n & (n - 1):
        raise TransformError(f"signal length {n} is not a power of two >= 4")
    return n.bit_length() - 1


def _check_levels(j0, J):
    if not 1 <= j0 < J:
        raise TransformError(f"coarsest level {j0} outside valid range [1, {J - 1}]")


def default_coarsest_level(n):
    """Default coarsest level floor(log2(log n) + 1), at least 1."""
    J = _check_signal_length(n)
    j0 = int(math.floor(math.log2(math.log(n)) + 1.0))
    return min(max(j0, 1), J - 1)


def _analysis_step(a, h, g):
    # One decimated filtering pass; works on (N,) or (N, B) arrays.
    low = h[0] * a
    high = g[0] * a
    for m in range(1, len(h)):
        rolled = np.roll(a, -m, axis=0)
        low = low + h[m] * rolled
        high = high + g[m] * rolled
    return low[::2], high[::2]


def _synthesis_step(approx, detail, h, g):
    n = 2 * approx.shape[0]
    up_a = np.zeros((n,) + approx.shape[1:], dtype=complex)
    up_d = np.zeros_like(up_a)
    up_a[::2] = approx
    up_d[::2] = detail
    out = np.conj(h[0]) * up_a + np.conj(g[0]) * up_d
    for m in range(1, len(h)):
        out = out + np.conj(h[m]) * np.roll(up_a, m, axis=0)
        out = out + np.conj(g[m]) * np.roll(up_d, m, axis=0)
    return out


def _forward_columns(x, j0, filters):
    """Cascade on the columns of ``x``; returns (approx, [details coarse->fine])."""
    J = x.shape[0].bit_length() - 1
    h = filters.low_pass
    g = filters.high_pass
    a = x.astype(complex)
    details = []
    for _ in range(J - j0):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    details.reverse()
    return a, details


def forward(signal, j0, filters):
    """Periodic pyramid decomposition of a real signal of length 2^J."""
    x = np.asarray(signal)
    if np.iscomplexobj(x):
        raise TransformError("forward expects a real-valued signal")
    x = x.astype(float)
    if x.ndim != 1:
        raise TransformError("forward expects a 1-D signal")
    J = _check_signal_length(len(x))
    _check_levels(j0, J)
    approx, details = _forward_columns(x, j0, filters)
    return CoeffTree(n=len(x), j0=j0, approx=approx, details=details)


def synthesize(tree, filters):
    """Full complex synthesis of a coefficient tree (adjoint of forward)."""
    tree.validate()
    h = filters.low_pass
    g = filters.high_pass
    a = np.asarray(tree.approx, dtype=complex)
    for d in tree.details:
        a = _synthesis_step(a, np.asarray(d, dtype=complex), h, g)
    return a


def inverse(tree, filters):
    """Reconstruct; returns (real signal, max absolute imaginary residual).

    For a tree produced by :func:`forward` the residual is at float
    round-off; after coefficient shrinkage it measures how far the
    modified coefficients are from the image of a real signal.
    """
    full = synthesize(tree, filters)
    return full.real.copy(), float(np.max(np.abs(full.imag)))


def build_matrix(n, j0, filters, cap=DENSE_MATRIX_CAP):
    """Dense n x n transform matrix W with W @ x == forward(x).flatten().

    Column i is the flattened decomposition of the i-th canonical basis
    vector.  Intended for analysis and testing; n is capped because the
    construction is O(n^2) in memory.
    """
    J = _check_signal_length(n)
    _check_levels(j0, J)
    if n > cap:
        raise TransformError(f"dense transform matrix capped at n = {cap}, got {n}")
    approx, details = _forward_columns(np.eye(n), j0, filters)
    return np.concatenate([approx] + details, axis=0)


@dataclass(frozen=True)
class NoiseScale:
    """Per-level 2x2 covariance of unit white noise after the transform.

    ``sigma[i]`` is the (s11, s12, s22) triple for detail level j0 + i,
    describing Cov[(Re d, Im d)] under input noise of unit variance.  The
    trace of every level is exactly 1.
    """

    n: int
    j0: int
    sigma: np.ndarray

    @property
    def levels(self):
        return range(self.j0, self.n.bit_length() - 1)

    def matrix(self, j):
        """Full 2x2 covariance matrix of detail level j."""
        if not self.j0 <= j < self.n.bit_length() - 1:
            raise ValueError(f"level {j} outside detail range "
                             f"[{self.j0}, {self.n.bit_length() - 2}]")
        s11, s12, s22 = self.sigma[j - self.j0]
        return np.array([[s11, s12], [s12, s22]])


def _sigma_from_selfprod(m):
    """2x2 triple [(1+Re m)/2, Im m / 2, (1-Re m)/2] from diag(W W^T) entries."""
    return np.stack(
        [0.5 * (1.0 + m.real), 0.5 * m.imag, 0.5 * (1.0 - m.real)], axis=-1
    )


def noise_covariance(W, j0, level_tol=1e-8):
    """Per-level noise covariance extracted from a dense transform matrix.

    Uses the diagonal of W W^T (plain transpose): for coefficient row w,
    Var(Re) = (1 + Re sum w^2)/2, Var(Im) = (1 - Re sum w^2)/2 and
    Cov(Re, Im) = Im(sum w^2)/2 under unit input noise.  The entries must
    be constant within each detail level (shift structure of the periodic
    transform); a larger spread indicates a broken transform.
    """
    W = np.asarray(W)
    n = W.shape[0]
    if W.shape != (n, n):
        raise TransformError("transform matrix must be square")
    J = _check_signal_length(n)
    _check_levels(j0, J)
    diag = np.einsum("ij,ij->i", W, W)
    sigmas = []
    pos = 1 << j0
    for j in range(j0, J):
        block = diag[pos: pos + (1 << j)]
        pos += 1 << j
        spread = np.max(np.abs(block - block[0]))
        if spread > level_tol:
            raise TransformError(
                f"noise covariance not constant within level {j} (spread {spread:.3e})"
            )
        sigmas.append(_sigma_from_selfprod(np.mean(block)))
    return NoiseScale(n=n, j0=j0, sigma=np.array(sigmas))


def noise_scale(n, j0, filters):
    """Per-level noise covariance without building the dense matrix.

    Synthesizes one unit coefficient per detail level; the conjugated
    squared sum of the resulting waveform equals the corresponding
    diagonal entry of W W^T.  Agrees with :func:`noise_covariance` to
    round-off and costs O(n log n) instead of O(n^2).
    """
    J = _check_signal_length(n)
    _check_levels(j0, J)
    sigmas = []
    for j in range(j0, J):
        tree = CoeffTree(
            n=n,
            j0=j0,
            approx=np.zeros(1 << j0, dtype=complex),
            details=[np.zeros(1 << lev, dtype=complex) for lev in range(j0, J)],
        )
        tree.details[j - j0][0] = 1.0
        wave = synthesize(tree, filters)
        selfprod = np.conj(np.sum(wave * wave))
        sigmas.append(_sigma_from_selfprod(selfprod))
    return NoiseScale(n=n, j0=j0, sigma=np.array(sigmas))
