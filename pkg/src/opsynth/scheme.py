"""Operator synthesis of |N><N+lam| from phase-cycled photocount probabilities.

Layout: the signal (mode c) and a vacuum (mode b) meet at BS1; mode b and the
reference field (mode a) then meet at the balanced BS2. Photocounters on a, b
and c register the event (n_a, n_b, n_c). Projecting the reference and
vacuum modes out of the detector projector leaves a vector |q> on the signal
mode, and the event probability is <q|rho_c|q>.

For a coherent reference of real amplitude |alpha| at phase phi,

    q_m = (-i)^{n_b} t^N e^{-|alpha|^2/2} / (2^{lam/2} sqrt(n_a! n_b!))
          x [x^{m-N}] (|alpha| - r x)^{n_a} (|alpha| + r x)^{n_b}
          x sqrt(m!/N!) exp[-i (N+lam-m) phi],      N = n_c, lam = n_a + n_b,

supported on m in [N, N+lam].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import CutoffError, NumericalFault, UnmeasurableElementError, ValidationError
from .fock import (DensityMatrix, FockVector, binomial, coherent_amplitude, log_factorial,
                   sqrt_factorial_ratio)
from .imperfection import ReferenceModel, reference_offdiag
from .optics import BeamSplitterSpec, apply_phase

DEFAULT_NORM_FLOOR = 1e-12
BETAS = (Fraction(0), Fraction(1), Fraction(1, 2), Fraction(3, 2))

Reference = Union[float, ReferenceModel]


def as_reference(reference: Reference) -> ReferenceModel:
    """Floats are read as the magnitude of a pure coherent reference."""
    if isinstance(reference, ReferenceModel):
        return reference
    mag = float(reference)
    if not (mag >= 0 and math.isfinite(mag)):
        raise ValidationError(f"reference amplitude must be finite and >= 0, got {reference!r}")
    return ReferenceModel.coherent(mag)


@dataclass(frozen=True, order=True)
class DetectionEvent:
    n_a: int
    n_b: int
    n_c: int

    def __post_init__(self):
        for name in ("n_a", "n_b", "n_c"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def lam(self) -> int:
        return self.n_a + self.n_b

    @property
    def N(self) -> int:
        return self.n_c

    @property
    def event_class(self) -> str | None:
        """'e0' (lam = 0), 'e1', 'e2', 'e3', or None for non-scheduled events."""
        d = self.n_a - self.n_b
        if self.lam == 0:
            return "e0"
        if d == 0:
            return "e1"
        if d == 1:
            return "e2"
        if d == -1:
            return "e3"
        return None

    @classmethod
    def optimal(cls, N: int, lam: int) -> "DetectionEvent":
        """e1 = (lam/2, lam/2, N) for even lam, e2 = ((lam+1)/2, (lam-1)/2, N) for odd."""
        if lam < 0:
            raise ValidationError("lam must be non-negative")
        if lam % 2 == 0:
            return cls(lam // 2, lam // 2, N)
        return cls((lam + 1) // 2, (lam - 1) // 2, N)

    @classmethod
    def e3(cls, N: int, lam: int) -> "DetectionEvent":
        if lam % 2 != 1:
            raise ValidationError("e3 events exist only for odd lam")
        return cls((lam - 1) // 2, (lam + 1) // 2, N)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_a, self.n_b, self.n_c)


def phase_setting(beta: Fraction | float, j: int, lam: int) -> float:
    """phi(beta, j) = beta pi / lam + 2 pi j / lam."""
    return math.pi * float(phase_fraction(beta, j, lam))


def phase_fraction(beta: Fraction | float, j: int, lam: int) -> Fraction:
    """phi / pi as an exact rational."""
    return (Fraction(beta) + 2 * j) / lam


@dataclass(frozen=True)
class PhaseSchedule:
    beta: Fraction
    lam: int
    j_values: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.lam < 1:
            raise ValidationError("phase cycling needs lam >= 1")
        object.__setattr__(self, "beta", Fraction(self.beta))
        if not self.j_values:
            count = self.lam // 2 if self.lam % 2 == 0 else self.lam
            object.__setattr__(self, "j_values", tuple(range(count)))

    @property
    def fractions(self) -> list[Fraction]:
        return [phase_fraction(self.beta, j, self.lam) for j in self.j_values]

    @property
    def phases(self) -> list[float]:
        return [math.pi * float(f) for f in self.fractions]


# -- POM vectors ------------------------------------------------------------


def _check_cutoff(N: int, lam: int, cutoff: int):
    if N + lam > cutoff:
        raise CutoffError(f"element needs level N+lam={N + lam} but cutoff is {cutoff}")


def q_vector(n_a: int, n_b: int, N: int, bs1: BeamSplitterSpec, alpha_mag: float,
             cutoff: int, phi: float = 0.0) -> FockVector:
    """Unnormalised POM vector |q> for the event (n_a, n_b, N), coherent reference."""
    lam = n_a + n_b
    _check_cutoff(N, lam, cutoff)
    if not (math.isfinite(alpha_mag) and alpha_mag >= 0) or not math.isfinite(phi):
        raise ValidationError("alpha_mag must be finite and >= 0 and phi finite")
    t, r = bs1.t, bs1.r
    pa = [math.comb(n_a, k) * alpha_mag ** (n_a - k) * (-r) ** k for k in range(n_a + 1)]
    pb = [math.comb(n_b, k) * alpha_mag ** (n_b - k) * r ** k for k in range(n_b + 1)]
    poly = np.convolve(pa, pb)
    pref = ((-1j) ** n_b * t ** N * 2.0 ** (-0.5 * lam)
            * math.exp(-0.5 * alpha_mag ** 2 - 0.5 * (log_factorial(n_a) + log_factorial(n_b))))
    amps = np.zeros(cutoff + 1, dtype=complex)
    for k in range(lam + 1):
        m = N + k
        amps[m] = pref * poly[k] * sqrt_factorial_ratio(m, N) * np.exp(-1j * (lam - k) * phi)
    return FockVector(amps, normalized=False)


def _mixing_coefficients(n_a: int, n_b: int) -> np.ndarray:
    """Coefficients c_l of x^{lam-l} y^l in (x - i y)^{n_a} (y - i x)^{n_b}."""
    u = np.array([math.comb(n_a, i) * (-1j) ** i for i in range(n_a + 1)])
    w = np.array([math.comb(n_b, p) * (-1j) ** (n_b - p) for p in range(n_b + 1)])
    return np.convolve(u, w)


def pom_kernel(event: DetectionEvent, bs1: BeamSplitterSpec) -> np.ndarray:
    """K_l with q_{N+l} = K_l conj(chi_{lam-l}) for a pure reference chi.

    Valid for any reference state: the reference enters only through its
    amplitude on |lam - l>.
    """
    n_a, n_b, N = event.as_tuple()
    lam = event.lam
    c = _mixing_coefficients(n_a, n_b)
    t, r = bs1.t, bs1.r
    scale = 2.0 ** (-0.5 * lam) * math.exp(-0.5 * (log_factorial(n_a) + log_factorial(n_b))) * t ** N
    return np.array([
        scale * c[l] * sqrt_factorial_ratio(lam - l, 0) * (-1j * r) ** l * sqrt_factorial_ratio(N + l, N)
        for l in range(lam + 1)
    ])


def pom_matrix(event: DetectionEvent, bs1: BeamSplitterSpec, reference: Reference,
               cutoff: int, phi: float = 0.0) -> np.ndarray:
    """POM element of ``event`` on the signal mode for a possibly mixed reference.

    Pi[N+l, N+l'] = K_l conj(K_l') <lam-l'| rho_a(phi) |lam-l>, where rho_a(phi)
    is the reference after the phase shifter.
    """
    N, lam = event.N, event.lam
    _check_cutoff(N, lam, cutoff)
    ref = as_reference(reference)
    rho_a = ref.density(lam)
    k = np.arange(lam + 1)
    rho_a = rho_a * np.exp(1j * (k[:, None] - k[None, :]) * phi)
    K = pom_kernel(event, bs1)
    l = np.arange(lam + 1)
    block = np.outer(K, K.conj()) * rho_a[lam - l[None, :], lam - l[:, None]]
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    out[N:N + lam + 1, N:N + lam + 1] = block
    return out


def _rho_array(rho_c) -> np.ndarray:
    return rho_c.entries if isinstance(rho_c, DensityMatrix) else np.asarray(rho_c, dtype=complex)


def _clamp(p: complex) -> float:
    if abs(p.imag) > 1e-12 * max(1.0, abs(p.real)):
        raise NumericalFault(f"probability has imaginary part {p.imag:.3g}")
    if p.real < -1e-12:
        raise NumericalFault(f"negative probability {p.real:.3g}")
    return max(p.real, 0.0)


def pom_probability(rho_c: DensityMatrix, q: FockVector, phi: float = 0.0) -> float:
    """<q_phi| rho_c |q_phi>, with q_phi the POM vector at phase-shifter setting phi.

    ``q`` is taken at phi = 0. Shifting the reference phase multiplies q_m by
    exp(i m phi) up to a global phase, which cancels here.
    """
    rho = _rho_array(rho_c)
    if rho.shape[0] != q.cutoff + 1:
        raise ValidationError(f"q has cutoff {q.cutoff}, rho_c has {rho.shape[0] - 1}")
    v = apply_phase(q, phi).amplitudes if phi else q.amplitudes
    return _clamp(complex(np.vdot(v, rho @ v)))


def event_probability(rho_c: DensityMatrix, event: DetectionEvent, bs1: BeamSplitterSpec,
                      reference: Reference, phi: float = 0.0) -> float:
    """Probability of ``event`` at phase setting ``phi``; any reference model."""
    rho = _rho_array(rho_c)
    cutoff = rho.shape[0] - 1
    ref = as_reference(reference)
    if ref.kind == "coherent" and ref.alpha.imag == 0 and ref.alpha.real >= 0:
        q = q_vector(event.n_a, event.n_b, event.N, bs1, ref.alpha.real, cutoff)
        return pom_probability(rho, q, phi)
    pi = pom_matrix(event, bs1, ref, cutoff, phi)
    return _clamp(complex(np.sum(rho.T * pi)))


def _schedule_for(event: DetectionEvent, beta) -> PhaseSchedule:
    cls = event.event_class
    if cls == "e0":
        raise ValidationError("lam = 0 needs no phase cycling; use reconstruct_diag")
    if cls is None:
        raise ValidationError(f"event {event.as_tuple()} is not an e1/e2/e3 event")
    return PhaseSchedule(Fraction(beta), event.lam)


def cycled_probability(rho_c: DensityMatrix, event: DetectionEvent, beta,
                       bs1: BeamSplitterSpec, reference: Reference) -> float:
    """P_beta(event): uniform average over the j values of the cycling schedule."""
    schedule = _schedule_for(event, beta)
    probs = [event_probability(rho_c, event, bs1, reference, phi) for phi in schedule.phases]
    return float(np.mean(probs))


def cycled_pom(event: DetectionEvent, beta, bs1: BeamSplitterSpec, reference: Reference,
               cutoff: int) -> np.ndarray:
    """POM element Pi_beta(event) of the cycling procedure."""
    schedule = _schedule_for(event, beta)
    mats = [pom_matrix(event, bs1, reference, cutoff, phi) for phi in schedule.phases]
    return np.mean(mats, axis=0)


# -- normalisation and reconstruction ---------------------------------------


@dataclass(frozen=True)
class NormConstant:
    value: complex
    parity: str
    N: int
    lam: int
    t: float
    r: float
    reference: dict

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    @property
    def conditioning(self) -> float:
        """|4 c|; the measured probability combination is divided by this."""
        return 4.0 * abs(self.value)


def norm_constant(N: int, lam: int, bs1: BeamSplitterSpec, reference: Reference,
                  floor: float = DEFAULT_NORM_FLOOR) -> NormConstant:
    """Product q_N conj(q_{N+lam}) at the optimal event, reference phase 0.

    even lam:  t^{2N} (i r/2)^lam X C(lam, lam/2) C(N+lam, N)^{1/2}
    odd lam: i t^{2N} (i r/2)^lam X C(lam, (lam-1)/2) C(N+lam, N)^{1/2}

    with X = <0|rho_a|lam> (= a_0 conj(a_lam) for a pure coherent reference).
    Raises :class:`UnmeasurableElementError` when |value| < ``floor``.
    """
    if lam < 1:
        raise ValidationError("norm_constant needs lam >= 1")
    ref = as_reference(reference)
    x = reference_offdiag(ref, lam)
    t, r = bs1.t, bs1.r
    root = math.sqrt(binomial(N + lam, N))
    if lam % 2 == 0:
        value = t ** (2 * N) * (0.5j * r) ** lam * x * binomial(lam, lam // 2) * root
        parity = "even"
    else:
        value = 1j * t ** (2 * N) * (0.5j * r) ** lam * x * binomial(lam, (lam - 1) // 2) * root
        parity = "odd"
    value = complex(value)
    if not abs(value) >= floor:
        raise UnmeasurableElementError(
            f"normalisation constant for N={N}, lam={lam} has magnitude {abs(value):.3g} "
            f"below floor {floor:g}"
        )
    return NormConstant(value, parity, N, lam, t, r, ref.descriptor())


def _check_probability(p: float, name: str):
    if not (-1e-12 <= p <= 1 + 1e-12):
        raise ValidationError(f"{name}={p!r} is not a probability")


def reconstruct_offdiag(P0: float, P1: float, Phalf: float, P3half: float,
                        nc: NormConstant, check: bool = True) -> complex:
    """<N+lam| rho_c |N> from the four cycled probabilities.

    ``check=False`` accepts estimates outside [0, 1], as produced by
    inverting noisy detector statistics.
    """
    if check:
        for name, p in (("P0", P0), ("P1", P1), ("Phalf", Phalf), ("P3half", P3half)):
            _check_probability(p, name)
    if nc.magnitude == 0:
        raise UnmeasurableElementError("normalisation constant is zero")
    return complex((P0 - P1) + 1j * (Phalf - P3half)) / (4.0 * nc.value)


def diagonal_divisor(N: int, bs1: BeamSplitterSpec, reference: Reference) -> float:
    """|q_N|^2 of the event (0, 0, N): t^{2N} <0|rho_a|0>."""
    ref = as_reference(reference)
    return bs1.t ** (2 * N) * ref.vacuum_weight()


def reconstruct_diag(P: float, N: int, bs1: BeamSplitterSpec, reference: Reference,
                     check: bool = True) -> float:
    """rho_NN from the probability of the event (0, 0, N)."""
    if check:
        _check_probability(P, "P")
    div = diagonal_divisor(N, bs1, reference)
    if div <= 0:
        if P == 0:
            return 0.0
        raise UnmeasurableElementError(f"diagonal element N={N} has zero POM weight")
    return P / div


def optimal_params(N: int, lam: int) -> tuple[float, float]:
    """(|alpha|^2, (t/r)^2) maximising |norm_constant|: (lam/2, 2N/lam).

    For lam = 0 the diagonal weight t^{2N} e^{-|alpha|^2} grows as |alpha| -> 0
    and t -> 1, so ``(0.0, inf)`` is returned; callers pick a compromise.
    """
    if N < 0 or lam < 0:
        raise ValidationError("N and lam must be non-negative")
    if lam == 0:
        return 0.0, math.inf
    return lam / 2.0, 2.0 * N / lam


def event_product(n_a: int, n_b: int, N: int, bs1: BeamSplitterSpec, alpha_mag: float) -> complex:
    """Closed form q_N conj(q_{N+lam}) for any split (n_a, n_b), real reference."""
    lam = n_a + n_b
    a0al = coherent_amplitude(alpha_mag, 0) * np.conj(coherent_amplitude(alpha_mag, lam))
    return complex((-1) ** n_a * a0al * bs1.t ** (2 * N) * (bs1.r / 2) ** lam
                   * binomial(lam, n_a) * math.sqrt(binomial(N + lam, N)))
