"""Detector inefficiency, finite-shot sampling and noisy reference fields."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditioningError, CutoffError, ValidationError, TruncationWarning
from .fock import DensityMatrix, coherent_amplitude, coherent_amplitudes, coherent_tail

DEFAULT_INVERSION_BOUND = 1e8


# -- photocount distributions -------------------------------------------------


@dataclass(frozen=True)
class CountDistribution:
    """Photocount probabilities, single-detector (1-d) or joint (one axis per detector).

    Entries are non-negative; the deficit from 1 is weight beyond the count cutoff.
    """

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.size == 0:
            raise ValidationError("empty count distribution")
        if np.any(p < -1e-12) or not np.all(np.isfinite(p)):
            raise ValidationError("count distribution has negative or non-finite entries")
        total = p.sum()
        if total > 1 + 1e-9:
            raise ValidationError(f"count distribution sums to {total!r} > 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def tail(self) -> float:
        return max(0.0, 1.0 - float(self.probabilities.sum()))

    @property
    def shape(self):
        return self.probabilities.shape

    def __getitem__(self, idx):
        return self.probabilities[idx]


def _as_array(dist) -> np.ndarray:
    if isinstance(dist, CountDistribution):
        return np.array(dist.probabilities)
    return np.asarray(dist, dtype=float)


def _per_axis(efficiency, ndim: int) -> tuple[float, ...]:
    if np.ndim(efficiency) == 0:
        eff = (float(efficiency),) * ndim
    else:
        eff = tuple(float(e) for e in efficiency)
        if len(eff) != ndim:
            raise ValidationError(f"got {len(eff)} efficiencies for a {ndim}-detector distribution")
    for e in eff:
        if not 0.0 <= e <= 1.0:
            raise ValidationError(f"detector efficiency must lie in [0, 1], got {e!r}")
    return eff


def binomial_kernel(efficiency: float, size: int) -> np.ndarray:
    """B[n, k] = C(k, n) eta^n (1 - eta)^(k - n): k true photons give n counts."""
    k = np.arange(size)
    B = np.zeros((size, size))
    for n in range(size):
        kk = k[n:]
        log_c = np.array([math.lgamma(x + 1) - math.lgamma(n + 1) - math.lgamma(x - n + 1) for x in kk])
        B[n, n:] = np.exp(log_c) * efficiency ** n * (1.0 - efficiency) ** (kk - n)
    return B


def _apply_axes(p: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    out = p
    for axis, m in enumerate(mats):
        if m is None:
            continue
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [axis])), 0, axis)
    return out


def smear(dist, efficiency) -> np.ndarray:
    """Counts seen by detectors of the given efficiency.

    p_n(eta) = sum_m C(n+m, n) eta^n (1-eta)^m p_{n+m}(1), truncated at the
    distribution's own cutoff. Joint distributions are smeared independently
    along each detector axis; ``efficiency`` is a scalar or one value per axis.
    """
    p = _as_array(dist)
    eff = _per_axis(efficiency, p.ndim)
    mats = [None if e == 1.0 else binomial_kernel(e, p.shape[i]) for i, e in enumerate(eff)]
    return _apply_axes(p, mats)


def inversion_kernel(efficiency: float, size: int) -> np.ndarray:
    """Inverse of :func:`binomial_kernel`: the same kernel with eta -> 1/eta."""
    if efficiency <= 0:
        raise ValidationError("cannot invert with zero efficiency")
    k = np.arange(size)
    inv = np.zeros((size, size))
    for n in range(size):
        kk = k[n:]
        c = np.array([math.comb(int(x), n) for x in kk], dtype=float)
        inv[n, n:] = c * efficiency ** (-n) * (1.0 - 1.0 / efficiency) ** (kk - n)
    return inv


def bernoulli_invert(dist, efficiency, cutoff: int | None = None,
                     bound: float = DEFAULT_INVERSION_BOUND, return_diagnostics: bool = False):
    """Undo :func:`smear`: the same kernel with eta replaced by 1/eta.

    p_n(1) = sum_m C(n+m, n) eta^{-n} (1 - 1/eta)^m p_{n+m}(eta). The series
    alternates in sign and grows like ((1-eta)/eta)^m, so it is well behaved
    for eta > 1/2. ``cutoff`` limits the counts used (default: all). Raises
    :class:`ConditioningError` if any term exceeds ``bound`` in magnitude.
    """
    p = _as_array(dist)
    eff = _per_axis(efficiency, p.ndim)
    if any(e <= 0 for e in eff):
        raise ValidationError("cannot invert with zero efficiency")
    if cutoff is not None:
        p = p[(slice(0, cutoff + 1),) * p.ndim]
    max_term = 0.0
    mats = []
    for i, e in enumerate(eff):
        if e == 1.0:
            mats.append(None)
            continue
        inv = inversion_kernel(e, p.shape[i])
        max_term = max(max_term, float(np.abs(inv).max(initial=0.0)) * float(np.abs(p).max(initial=0.0)))
        mats.append(inv)
    if max_term > bound:
        raise ConditioningError(
            f"Bernoulli inversion unstable: term magnitude {max_term:.3g} exceeds {bound:g}"
        )
    out = _apply_axes(p, mats)
    if return_diagnostics:
        return out, {"max_term": max_term, "efficiency": eff}
    return out


# -- sampling ---------------------------------------------------------------


@dataclass(frozen=True)
class SampledCounts:
    """Multinomial draw over a joint distribution; ``overflow`` counts events beyond the cutoff."""

    counts: np.ndarray
    overflow: int
    shots: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots

    def rows(self):
        """(n_a, n_b, n_c, count) for every non-zero cell."""
        for idx in zip(*np.nonzero(self.counts)):
            yield (*(int(i) for i in idx), int(self.counts[idx]))


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_events(joint, shots: int, seed) -> SampledCounts:
    """Draw ``shots`` detection events from ``joint``; deterministic for a given seed."""
    p = _as_array(joint)
    if p.size == 0 or not np.any(p > 0):
        raise ValidationError("cannot sample from an empty distribution")
    if int(shots) != shots or shots < 1:
        raise ValidationError(f"shots must be a positive integer, got {shots!r}")
    flat = np.clip(p.ravel(), 0.0, None)
    total = flat.sum()
    if total > 1 + 1e-9:
        raise ValidationError(f"joint distribution sums to {total!r} > 1")
    pvals = np.append(flat, max(0.0, 1.0 - total))
    pvals /= pvals.sum()
    draw = _generator(seed).multinomial(int(shots), pvals)
    return SampledCounts(draw[:-1].reshape(p.shape), int(draw[-1]), int(shots))


# -- reference field ---------------------------------------------------------


REFERENCE_KINDS = ("coherent", "phase-diffused", "explicit")


@dataclass(frozen=True, eq=False)
class ReferenceModel:
    """State of the reference field at phase-shifter setting 0.

    coherent        pure |alpha>
    phase-diffused  a_m conj(a_n) exp(-sigma^2 (m-n)^2 / 2): |alpha> with a
                    Gaussian-distributed phase of width ``sigma`` (radians)
    explicit        a user-supplied density matrix
    """

    kind: str
    alpha: complex = 0j
    sigma: float = 0.0
    matrix: DensityMatrix | None = None
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ValidationError(f"unknown reference kind {self.kind!r}")
        object.__setattr__(self, "alpha", complex(self.alpha))
        if not (math.isfinite(self.alpha.real) and math.isfinite(self.alpha.imag)):
            raise ValidationError("reference amplitude must be finite")
        if self.kind == "phase-diffused" and not self.sigma >= 0:
            raise ValidationError(f"phase diffusion width must be >= 0, got {self.sigma!r}")
        if self.kind == "explicit" and not isinstance(self.matrix, DensityMatrix):
            raise ValidationError("explicit reference needs a DensityMatrix")

    @classmethod
    def coherent(cls, alpha: complex) -> "ReferenceModel":
        return cls("coherent", alpha=alpha)

    @classmethod
    def phase_diffused(cls, alpha: complex, sigma: float) -> "ReferenceModel":
        return cls("phase-diffused", alpha=alpha, sigma=sigma)

    @classmethod
    def explicit(cls, matrix: DensityMatrix) -> "ReferenceModel":
        return cls("explicit", matrix=matrix)

    @property
    def mean_photons(self) -> float:
        if self.kind == "explicit":
            rho = self.matrix.entries
            return float(np.real(np.sum(np.arange(rho.shape[0]) * np.diag(rho))))
        return abs(self.alpha) ** 2

    def tail(self, cutoff: int) -> float:
        if self.kind == "explicit":
            return 0.0 if cutoff >= self.matrix.cutoff else float(
                np.real(np.trace(self.matrix.entries)[()] - np.trace(self.matrix.block(cutoff + 1))))
        return coherent_tail(self.alpha, cutoff)

    def _diffusion(self, size: int) -> np.ndarray:
        d = np.arange(size)[:, None] - np.arange(size)[None, :]
        if math.isinf(self.sigma):
            return (d == 0).astype(float)
        return np.exp(-0.5 * self.sigma ** 2 * d.astype(float) ** 2)

    def _amplitudes(self, cutoff: int) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            return coherent_amplitudes(self.alpha, cutoff).amplitudes

    def density(self, cutoff: int) -> np.ndarray:
        """Reference density matrix on levels 0..cutoff (zero padded if needed)."""
        if self.kind == "explicit":
            rho = self.matrix.entries
            out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
            n = min(cutoff, self.matrix.cutoff) + 1
            out[:n, :n] = rho[:n, :n]
            return out
        a = self._amplitudes(cutoff)
        rho = np.outer(a, a.conj())
        if self.kind == "phase-diffused":
            rho = rho * self._diffusion(cutoff + 1)
        return rho

    def vacuum_weight(self) -> float:
        """<0|rho_a|0>."""
        if self.kind == "explicit":
            return float(self.matrix.entries[0, 0].real)
        return math.exp(-abs(self.alpha) ** 2)

    def components(self, cutoff: int) -> list[tuple[float, np.ndarray]]:
        """Pure-state decomposition [(weight, amplitudes)] on levels 0..cutoff."""
        if self.kind == "coherent":
            return [(1.0, self._amplitudes(cutoff))]
        w, v = np.linalg.eigh(self.density(cutoff))
        return [(float(w[i]), v[:, i]) for i in range(len(w)) if w[i] > 1e-16]

    def descriptor(self) -> dict:
        out = {"kind": self.kind}
        if self.kind != "explicit":
            out["alpha"] = [self.alpha.real, self.alpha.imag]
            out["mean_photons"] = abs(self.alpha) ** 2
        if self.kind == "phase-diffused":
            out["sigma"] = self.sigma if math.isfinite(self.sigma) else "inf"
        if self.kind == "explicit":
            out["cutoff"] = self.matrix.cutoff
        return out


def reference_offdiag(model: ReferenceModel, lam: int) -> complex:
    """<0|rho_a|lam> of the reference at phase-shifter setting 0."""
    if lam < 0:
        raise ValidationError("lam must be non-negative")
    if model.kind == "explicit":
        if lam > model.matrix.cutoff:
            raise CutoffError(f"reference matrix has cutoff {model.matrix.cutoff} < lam={lam}")
        return complex(model.matrix.entries[0, lam])
    value = coherent_amplitude(model.alpha, 0) * np.conj(coherent_amplitude(model.alpha, lam))
    if model.kind == "phase-diffused" and lam:
        if math.isinf(model.sigma):
            return 0j
        value *= math.exp(-0.5 * model.sigma ** 2 * lam ** 2)
    return complex(value)
