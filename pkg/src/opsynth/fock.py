"""Truncated single-mode Fock space: state vectors, density matrices, test states."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.linalg import expm
from scipy.special import gammainc

from .errors import ValidationError, TruncationWarning

DEFAULT_EPSILON = 1e-12
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
# below this, factorials are exact integers; above, log-gamma
_EXACT_FACTORIAL_MAX = 20


def log_factorial(n: int) -> float:
    if n < 0:
        raise ValidationError(f"factorial of negative number {n}")
    if n <= _EXACT_FACTORIAL_MAX:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1)


def sqrt_factorial_ratio(m: int, n: int) -> float:
    """sqrt(m! / n!)."""
    if m <= _EXACT_FACTORIAL_MAX and n <= _EXACT_FACTORIAL_MAX:
        return math.sqrt(math.factorial(m) / math.factorial(n))
    return math.exp(0.5 * (log_factorial(m) - log_factorial(n)))


def binomial(n: int, k: int) -> float:
    if k < 0 or k > n:
        return 0.0
    if n <= _EXACT_FACTORIAL_MAX:
        return float(math.comb(n, k))
    return math.exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FockVector:
    """Amplitudes over |0>..|cutoff> of one mode.

    ``tail`` is the probability weight lost to truncation (zero for states
    that live entirely inside the cutoff). Unnormalised vectors such as the
    POM vectors built in :mod:`opsynth.scheme` set ``normalized=False``.
    """

    amplitudes: np.ndarray
    normalized: bool = True
    tail: float = 0.0

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size == 0:
            raise ValidationError("amplitudes must be a non-empty 1-d array")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized:
            norm = float(np.sum(np.abs(amps) ** 2))
            if abs(norm - (1.0 - self.tail)) > 1e-12:
                raise ValidationError(
                    f"vector flagged normalized has squared norm {norm!r} "
                    f"with declared tail {self.tail!r}"
                )

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size - 1

    def __len__(self):
        return self.amplitudes.size

    def __getitem__(self, n):
        return self.amplitudes[n]

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class DensityMatrix:
    """Density matrix on the truncated space |0>..|cutoff>.

    Construction validates Hermiticity, positivity and the trace against the
    declared truncation tail. Estimates assembled from measured (noisy or
    smeared) probabilities need not be positive, so ``validate=False``
    keeps only the Hermiticity check and allows NaN for unmeasured elements.
    """

    entries: np.ndarray
    tail: float = 0.0
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        rho = _frozen(self.entries)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
            raise ValidationError(f"density matrix must be square, got {rho.shape}")
        if not np.all(np.isfinite(rho) | (np.isnan(rho) & (not self.validate))):
            raise ValidationError("density matrix entries must be finite")
        herm = np.nanmax(np.abs(rho - rho.conj().T))
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"matrix not Hermitian (max deviation {herm:.3g})")
        object.__setattr__(self, "entries", rho)
        if not self.validate:
            return
        lowest = float(np.linalg.eigvalsh(rho).min())
        if lowest < -PSD_TOL:
            raise ValidationError(f"matrix not positive semidefinite (eigenvalue {lowest:.3g})")
        trace = float(np.trace(rho).real)
        if abs(trace - 1.0) > self.tail + DEFAULT_EPSILON:
            raise ValidationError(
                f"trace {trace!r} differs from 1 by more than the declared tail {self.tail!r}"
            )

    @classmethod
    def estimate(cls, entries, tail: float = 0.0) -> "DensityMatrix":
        return cls(entries, tail=tail, validate=False)

    @property
    def cutoff(self) -> int:
        return self.entries.shape[0] - 1

    def element(self, m: int, n: int) -> complex:
        return complex(self.entries[m, n])

    def block(self, size: int) -> np.ndarray:
        """Leading ``size x size`` block."""
        return np.array(self.entries[:size, :size])

    def embed(self, cutoff: int) -> "DensityMatrix":
        """Same state on a larger (or equal) cutoff, zero padded."""
        if cutoff < self.cutoff:
            raise ValidationError("embed() cannot shrink the space; use block()")
        out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        out[: self.cutoff + 1, : self.cutoff + 1] = self.entries
        return DensityMatrix(out, tail=self.tail, validate=self.validate)

    def eigh(self):
        return np.linalg.eigh(self.entries)


def coherent_tail(alpha: complex, cutoff: int) -> float:
    """Poisson weight above ``cutoff`` for mean photon number |alpha|^2."""
    mean = abs(alpha) ** 2
    if mean == 0.0:
        return 0.0
    # P(X > D) for X ~ Poisson(mean) is the regularised lower gamma P(D+1, mean)
    return float(gammainc(cutoff + 1, mean))


def coherent_amplitudes(
    alpha: complex, cutoff: int, epsilon: float = DEFAULT_EPSILON
) -> FockVector:
    """Amplitudes <n|alpha> for n = 0..cutoff.

    Built by the recurrence c_{n+1} = c_n alpha / sqrt(n+1), which never forms
    a factorial. Warns with :class:`TruncationWarning` when the discarded
    Poisson tail exceeds ``epsilon``; the tail is always recorded on the
    returned vector.
    """
    if cutoff < 0:
        raise ValidationError("cutoff must be non-negative")
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    amps = np.empty(cutoff + 1, dtype=complex)
    amps[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(cutoff):
        amps[n + 1] = amps[n] * alpha / math.sqrt(n + 1)
    tail = coherent_tail(alpha, cutoff)
    if tail > epsilon:
        warnings.warn(
            f"coherent state |alpha|^2={abs(alpha) ** 2:g} truncated at {cutoff} "
            f"drops weight {tail:.3g}",
            TruncationWarning,
            stacklevel=2,
        )
    return FockVector(amps, normalized=True, tail=tail)


def coherent_amplitude(alpha: complex, n: int) -> complex:
    """Closed form <n|alpha> in log space; independent of the recurrence."""
    alpha = complex(alpha)
    if alpha == 0:
        return 1.0 + 0j if n == 0 else 0j
    mag = abs(alpha)
    log_mag = -0.5 * mag * mag + n * math.log(mag) - 0.5 * log_factorial(n)
    return math.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def cutoff_for_coherent(alpha: complex, epsilon: float = DEFAULT_EPSILON, maximum: int = 400) -> int:
    """Smallest cutoff whose coherent-state tail is below ``epsilon``."""
    for d in range(maximum + 1):
        if coherent_tail(alpha, d) < epsilon:
            return d
    raise ValidationError(f"no cutoff up to {maximum} reaches tail {epsilon:g}")


def fock_state(n: int, cutoff: int) -> FockVector:
    if not 0 <= n <= cutoff:
        raise ValidationError(f"number state {n} outside cutoff {cutoff}")
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[n] = 1.0
    return FockVector(amps)


def density_from_pure(psi: FockVector) -> DensityMatrix:
    """|psi><psi|; accepts a declared truncation tail but not an unnormalised vector."""
    if abs(psi.norm_squared() - (1.0 - psi.tail)) > 1e-9:
        raise ValidationError(
            f"density_from_pure needs a normalised vector (squared norm {psi.norm_squared()!r})"
        )
    c = psi.amplitudes
    return DensityMatrix(np.outer(c, c.conj()), tail=max(psi.tail, 0.0))


def _thermal(mean: float, cutoff: int) -> DensityMatrix:
    if not mean >= 0:
        raise ValidationError(f"thermal mean must be >= 0, got {mean!r}")
    ratio = mean / (1.0 + mean)
    p = (1.0 / (1.0 + mean)) * ratio ** np.arange(cutoff + 1)
    return DensityMatrix(np.diag(p).astype(complex), tail=ratio ** (cutoff + 1))


def _superposition(components: Mapping[int, complex] | Any, cutoff: int) -> DensityMatrix:
    items = components.items() if isinstance(components, Mapping) else components
    amps = np.zeros(cutoff + 1, dtype=complex)
    for n, c in items:
        n = int(n)
        if not 0 <= n <= cutoff:
            raise ValidationError(f"component |{n}> outside cutoff {cutoff}")
        amps[n] += complex(c) if not isinstance(c, (list, tuple)) else complex(*c)
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ValidationError("superposition has zero norm")
    return density_from_pure(FockVector(amps / norm))


def _random(cutoff: int, seed: int, support: int | None = None, rank: int | None = None) -> DensityMatrix:
    support = cutoff + 1 if support is None else int(support)
    if not 1 <= support <= cutoff + 1:
        raise ValidationError(f"support {support} incompatible with cutoff {cutoff}")
    rank = support if rank is None else int(rank)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((support, rank)) + 1j * rng.standard_normal((support, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    out[:support, :support] = rho
    return DensityMatrix(out)


TEST_STATE_KINDS = ("fock", "coherent", "displaced", "superposition", "thermal", "random")


def _alpha_param(params: Mapping[str, Any]) -> complex:
    if "alpha" in params:
        a = params["alpha"]
        return complex(*a) if isinstance(a, (list, tuple)) else complex(a)
    return complex(math.sqrt(float(params.get("mean", 0.0))))


def _displaced(alpha: complex, dim: int, cutoff: int) -> DensityMatrix:
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
    psi_d = expm(alpha * a.T - np.conj(alpha) * a)[:, 0]
    psi = np.zeros(cutoff + 1, dtype=complex)
    n = min(dim, cutoff + 1)
    psi[:n] = psi_d[:n]
    tail = float(np.sum(np.abs(psi_d[n:]) ** 2))
    return density_from_pure(FockVector(psi, tail=tail))


def make_test_states(kind: str, params: Mapping[str, Any] | None, cutoff: int,
                     seed: int | None = None) -> DensityMatrix:
    """Build a density matrix from the test-state corpus.

    ========== ==============================================================
    kind       params
    ========== ==============================================================
    fock       ``n``
    coherent   ``alpha`` (complex) or ``mean`` (|alpha|^2, real alpha)
    superpos.  ``components``: mapping n -> amplitude (renormalised)
    thermal    ``mean``
    random     ``support`` (levels used, default all), ``rank``; needs seed.
               rho = G G^dag / Tr(G G^dag), G complex Gaussian.
    displaced  ``alpha`` or ``mean``, ``dim``: exp(alpha a^dag - conj(alpha) a)|0>
               computed with a and a^dag truncated to ``dim`` levels
    ========== ==============================================================
    """
    params = dict(params or {})
    if kind == "fock":
        return density_from_pure(fock_state(int(params.get("n", 0)), cutoff))
    if kind == "coherent":
        alpha = _alpha_param(params)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            psi = coherent_amplitudes(alpha, cutoff)
        return density_from_pure(psi)
    if kind == "displaced":
        return _displaced(_alpha_param(params), int(params.get("dim", cutoff + 1)), cutoff)
    if kind == "superposition":
        return _superposition(params.get("components", {0: 1.0}), cutoff)
    if kind == "thermal":
        return _thermal(float(params.get("mean", 0.0)), cutoff)
    if kind == "random":
        seed = params.get("seed", seed)
        if seed is None:
            raise ValidationError("random test states need a seed")
        return _random(cutoff, int(seed), params.get("support"), params.get("rank"))
    raise ValidationError(f"unknown test-state kind {kind!r}; expected one of {TEST_STATE_KINDS}")
