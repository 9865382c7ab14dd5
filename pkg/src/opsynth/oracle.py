"""Brute-force three-mode simulation of the measuring device.

Modes are ordered (a, b, c): reference, vacuum port, signal. The input
|chi>_a |0>_b |psi>_c is evolved by BS1 on (b, c) and then BS2 on (a, b),
and photocount probabilities are read off the output amplitudes. Mixed
signal or reference states are split into eigenvectors and the resulting
probabilities summed with their weights. Nothing here uses the closed-form
POM vectors of :mod:`opsynth.scheme`; it exists to check them.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import CutoffError, TruncationWarning, ValidationError
from .fock import DensityMatrix, FockVector, coherent_amplitudes, fock_state
from .optics import BS2, BeamSplitterSpec, MultiModeState, apply_bs, apply_phase
from .scheme import DetectionEvent, Reference, as_reference

MODE_A, MODE_B, MODE_C = 0, 1, 2


def default_total_cutoff(n_max: int, lam_max: int, alpha_sq: float) -> int:
    """n_max + lam_max + ceil(|alpha|^2 + 6|alpha|)."""
    return int(n_max + lam_max + math.ceil(alpha_sq + 6.0 * math.sqrt(alpha_sq)))


def evolve(reference_amplitudes: np.ndarray, signal: FockVector, bs1: BeamSplitterSpec,
           total_cutoff: int) -> MultiModeState:
    """R2 R1 |chi, 0, psi> truncated at ``total_cutoff`` photons."""
    chi = FockVector(reference_amplitudes, normalized=False)
    vac = fock_state(0, 0)
    state = MultiModeState.product([chi, vac, FockVector(signal.amplitudes, normalized=False)],
                                   total_cutoff)
    state = apply_bs(state, (MODE_B, MODE_C), bs1)
    return apply_bs(state, (MODE_A, MODE_B), BS2)


def _rho_array(rho_c) -> np.ndarray:
    return rho_c.entries if isinstance(rho_c, DensityMatrix) else np.asarray(rho_c, dtype=complex)


def _components(rho: np.ndarray):
    w, v = np.linalg.eigh(rho)
    return [(float(w[i]), v[:, i]) for i in range(len(w)) if abs(w[i]) > 0]


def forward_distribution(rho_c, bs1: BeamSplitterSpec, reference: Reference, phi: float,
                         total_cutoff: int) -> np.ndarray:
    """Joint photocount probabilities P[n_a, n_b, n_c], shape (T+1,)*3."""
    rho = _rho_array(rho_c)
    ref = as_reference(reference)
    T = total_cutoff
    out = np.zeros((T + 1,) * 3)
    ref_parts = ref.components(T)
    for w_c, v in _components(rho):
        psi = FockVector(v, normalized=False)
        for w_a, chi in ref_parts:
            chi_phi = apply_phase(FockVector(chi, normalized=False), phi).amplitudes
            out += w_c * w_a * evolve(chi_phi, psi, bs1, T).probabilities()
    return out


def forward_probability(rho_c, event: DetectionEvent, bs1: BeamSplitterSpec,
                        reference: Reference, phi: float = 0.0,
                        total_cutoff: int | None = None) -> float:
    """Probability of ``event`` from full three-mode evolution.

    Photon number is conserved, so any total cutoff >= the event's total
    photon count gives the exact event probability for the truncated inputs.
    """
    if total_cutoff is None:
        total_cutoff = event.n_a + event.n_b + event.n_c
    if event.n_a + event.n_b + event.n_c > total_cutoff:
        raise CutoffError(f"event {event.as_tuple()} exceeds total cutoff {total_cutoff}")
    P = forward_distribution(rho_c, bs1, reference, phi, total_cutoff)
    return float(P[event.as_tuple()])


def q_contraction(event: DetectionEvent, bs1: BeamSplitterSpec, alpha: complex, cutoff: int,
                  total_cutoff: int | None = None) -> FockVector:
    """q_m = conj(<n_a n_b n_c| R2 R1 |alpha, 0, m>) for m = 0..cutoff."""
    T = total_cutoff if total_cutoff is not None else event.n_a + event.n_b + event.n_c
    if event.n_a + event.n_b + event.n_c > T:
        raise CutoffError("total cutoff below the event's photon count")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        chi = coherent_amplitudes(alpha, T).amplitudes
    q = np.zeros(cutoff + 1, dtype=complex)
    for m in range(min(cutoff, T) + 1):
        out = evolve(chi, fock_state(m, m), bs1, T)
        q[m] = np.conj(out.amplitudes[event.as_tuple()])
    return FockVector(q, normalized=False)


def pom_completeness(bs1: BeamSplitterSpec, reference: Reference, n_max: int,
                     total_cutoff: int, phi: float = 0.0) -> np.ndarray:
    """I - sum_e Pi(e) over all events with at most ``total_cutoff`` photons.

    Restricted to signal levels <= n_max. sum_e Pi(e)[m, n] is the overlap of
    the evolved inputs |chi, 0, m> and |chi, 0, n> over the retained events.
    """
    if n_max > total_cutoff:
        raise ValidationError("n_max cannot exceed the total cutoff")
    ref = as_reference(reference)
    gram = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for w_a, chi in ref.components(total_cutoff):
        chi_phi = apply_phase(FockVector(chi, normalized=False), phi).amplitudes
        vecs = [evolve(chi_phi, fock_state(m, m), bs1, total_cutoff).amplitudes.ravel()
                for m in range(n_max + 1)]
        V = np.array(vecs)
        gram += w_a * (V.conj() @ V.T)
    return np.eye(n_max + 1) - gram.T
