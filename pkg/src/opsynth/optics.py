"""Beam splitters and phase shifters in the photon-number basis.

Convention: a beam splitter with mixing angle ``theta`` acting on modes x, y is

    R = exp[i theta (x^dag y + y^dag x)],   t = cos(theta), r = sin(theta),

so that R^dag x^dag R = t x^dag - i r y^dag. The generator conserves the total
photon number s of the pair, so R is a direct sum of (s+1) x (s+1) blocks
acting on |k, s-k>, indexed by k = photons in the first mode of the pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .errors import ValidationError
from .fock import FockVector


@dataclass(frozen=True)
class BeamSplitterSpec:
    mixing_angle: float

    def __post_init__(self):
        theta = float(self.mixing_angle)
        if not (0.0 <= theta <= math.pi / 2 + 1e-15) or not math.isfinite(theta):
            raise ValidationError(f"mixing angle must lie in [0, pi/2], got {theta!r}")
        object.__setattr__(self, "mixing_angle", theta)

    @property
    def t(self) -> float:
        return math.cos(self.mixing_angle)

    @property
    def r(self) -> float:
        return math.sin(self.mixing_angle)

    @property
    def t_over_r_sq(self) -> float:
        r = self.r
        return math.inf if r == 0.0 else (self.t / r) ** 2

    @classmethod
    def from_ratio(cls, t_over_r_sq: float) -> "BeamSplitterSpec":
        """Beam splitter with (t/r)^2 = ``t_over_r_sq`` (``inf`` gives t = 1)."""
        if not t_over_r_sq >= 0:
            raise ValidationError(f"(t/r)^2 must be >= 0, got {t_over_r_sq!r}")
        if math.isinf(t_over_r_sq):
            return cls(0.0)
        return cls(math.atan2(1.0, math.sqrt(t_over_r_sq)))

    @classmethod
    def from_transmission(cls, t: float) -> "BeamSplitterSpec":
        if not 0.0 <= t <= 1.0:
            raise ValidationError(f"transmission coefficient must be in [0, 1], got {t!r}")
        return cls(math.acos(t))

    @classmethod
    def balanced(cls) -> "BeamSplitterSpec":
        return cls(math.pi / 4)


BS2 = BeamSplitterSpec.balanced()


@dataclass(frozen=True)
class TwoModeBlock:
    total_n: int
    matrix: np.ndarray


@lru_cache(maxsize=4096)
def _block_matrix(theta: float, total_n: int) -> np.ndarray:
    n = total_n
    if n == 0 or theta == 0.0:
        u = np.eye(n + 1, dtype=complex)
    else:
        k = np.arange(n)
        off = np.sqrt((k + 1.0) * (n - k))
        # x^dag y + y^dag x is real symmetric tridiagonal with zero diagonal
        w, v = eigh_tridiagonal(np.zeros(n + 1), off)
        u = (v * np.exp(1j * theta * w)) @ v.T
    u.setflags(write=False)
    return u


def bs_block(spec: BeamSplitterSpec, total_n: int) -> TwoModeBlock:
    """Block of R on the states |k, total_n - k>, k = 0..total_n."""
    if total_n < 0:
        raise ValidationError("total_n must be non-negative")
    return TwoModeBlock(total_n, _block_matrix(spec.mixing_angle, int(total_n)))


def block_stack(spec: BeamSplitterSpec, total_cutoff: int, adjoint: bool = False) -> np.ndarray:
    """All blocks up to ``total_cutoff`` packed into a zero-padded (T+1)^3 array."""
    T = total_cutoff
    out = np.zeros((T + 1, T + 1, T + 1), dtype=complex)
    for s in range(T + 1):
        u = _block_matrix(spec.mixing_angle, s)
        out[s, : s + 1, : s + 1] = u.conj().T if adjoint else u
    return out


def two_mode_unitary(spec: BeamSplitterSpec, total_cutoff: int):
    """Dense R over all two-mode states with total photon number <= cutoff.

    Returns ``(matrix, basis)`` where ``basis`` lists (n_x, n_y) pairs.
    """
    basis = [(k, s - k) for s in range(total_cutoff + 1) for k in range(s + 1)]
    index = {b: i for i, b in enumerate(basis)}
    u = np.zeros((len(basis), len(basis)), dtype=complex)
    for s in range(total_cutoff + 1):
        rows = [index[(k, s - k)] for k in range(s + 1)]
        u[np.ix_(rows, rows)] = _block_matrix(spec.mixing_angle, s)
    return u, basis


class MultiModeState:
    """Pure state of several modes with total photon number <= ``total_cutoff``.

    Amplitudes live in a dense (T+1)^modes tensor whose entries above the
    total cutoff are zero. ``tail`` records the weight dropped when the state
    was truncated at construction.
    """

    def __init__(self, amplitudes: np.ndarray, total_cutoff: int, tail: float = 0.0):
        amps = np.asarray(amplitudes, dtype=complex)
        if amps.ndim < 2 or any(d != total_cutoff + 1 for d in amps.shape):
            raise ValidationError(
                f"amplitude tensor shape {amps.shape} does not match total cutoff {total_cutoff}"
            )
        self.amplitudes = amps
        self.total_cutoff = total_cutoff
        self.tail = tail

    @property
    def modes(self) -> int:
        return self.amplitudes.ndim

    @classmethod
    def product(cls, vectors: Sequence[FockVector], total_cutoff: int) -> "MultiModeState":
        """Tensor product of single-mode vectors, truncated at the total cutoff."""
        T = total_cutoff
        factors = []
        for v in vectors:
            a = np.zeros(T + 1, dtype=complex)
            n = min(v.cutoff, T)
            a[: n + 1] = v.amplitudes[: n + 1]
            factors.append(a)
        amps = factors[0]
        for a in factors[1:]:
            amps = np.multiply.outer(amps, a)
        amps = np.where(_total_mask(len(factors), T), amps, 0.0)
        tail = 1.0 - float(np.sum(np.abs(amps) ** 2))
        return cls(amps, T, tail=max(tail, 0.0))

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "MultiModeState":
        return MultiModeState(self.amplitudes.copy(), self.total_cutoff, self.tail)


@lru_cache(maxsize=64)
def _total_mask(modes: int, total_cutoff: int) -> np.ndarray:
    grids = np.indices((total_cutoff + 1,) * modes).sum(axis=0)
    mask = grids <= total_cutoff
    mask.setflags(write=False)
    return mask


def apply_bs(state: MultiModeState, mode_pair: tuple[int, int], spec: BeamSplitterSpec,
             adjoint: bool = False) -> MultiModeState:
    """Apply R (or R^dag with ``adjoint=True``) to the given pair of modes."""
    i, j = mode_pair
    m = state.modes
    if not (0 <= i < m and 0 <= j < m) or i == j:
        raise ValidationError(f"mode pair {mode_pair} invalid for a {m}-mode state")
    T = state.total_cutoff
    moved = np.moveaxis(state.amplitudes, (i, j), (m - 2, m - 1))
    shape = moved.shape
    flat = np.ascontiguousarray(moved.reshape(-1, T + 1, T + 1))
    out = kernels.apply_pair(flat, block_stack(spec, T, adjoint=adjoint))
    out = np.moveaxis(out.reshape(shape), (m - 2, m - 1), (i, j))
    return MultiModeState(np.ascontiguousarray(out), T, state.tail)


def apply_phase(state: FockVector, phi: float) -> FockVector:
    """Phase shifter: c_n -> exp(i n phi) c_n."""
    n = np.arange(state.cutoff + 1)
    return FockVector(state.amplitudes * np.exp(1j * n * phi), normalized=state.normalized,
                      tail=state.tail)
