import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opsynth import oracle
from opsynth.errors import (CutoffError, NumericalFault, TruncationWarning,
                            UnmeasurableElementError, ValidationError)
from opsynth.fock import FockVector, make_test_states
from opsynth.imperfection import ReferenceModel
from opsynth.optics import BS2, BeamSplitterSpec
from opsynth.scheme import (BETAS, DetectionEvent, PhaseSchedule, cycled_pom, cycled_probability,
                            event_probability, event_product, norm_constant, optimal_params,
                            phase_setting, pom_matrix, pom_probability, q_vector,
                            reconstruct_diag, reconstruct_offdiag)


def _coherent_rho(mean, cutoff):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return make_test_states("coherent", {"mean": mean}, cutoff)


def _cycled(rho, N, lam, bs, ref):
    ev = DetectionEvent.optimal(N, lam)
    return [cycled_probability(rho, ev, b, bs, ref) for b in BETAS]


# -- events and schedules ---------------------------------------------------


def test_event_classes():
    assert DetectionEvent.optimal(3, 4).as_tuple() == (2, 2, 3)
    assert DetectionEvent.optimal(3, 5).as_tuple() == (3, 2, 3)
    assert DetectionEvent.e3(3, 5).as_tuple() == (2, 3, 3)
    assert DetectionEvent(0, 0, 2).event_class == "e0"
    assert DetectionEvent(2, 2, 0).event_class == "e1"
    assert DetectionEvent(3, 2, 0).event_class == "e2"
    assert DetectionEvent(2, 3, 0).event_class == "e3"
    assert DetectionEvent(3, 0, 0).event_class is None
    with pytest.raises(ValidationError):
        DetectionEvent(-1, 0, 0)
    with pytest.raises(ValidationError):
        DetectionEvent.e3(0, 2)


@pytest.mark.parametrize("lam", range(1, 8))
def test_schedule_lengths_and_phases(lam):
    for beta in BETAS:
        s = PhaseSchedule(beta, lam)
        assert len(s.j_values) == (lam // 2 if lam % 2 == 0 else lam)
        for j, f, phi in zip(s.j_values, s.fractions, s.phases):
            assert f == (Fraction(beta) + 2 * j) / lam
            assert phi == pytest.approx(beta * math.pi / lam + 2 * math.pi * j / lam, abs=1e-15)
            assert phi == phase_setting(beta, j, lam)
    with pytest.raises(ValidationError):
        PhaseSchedule(0, 0)


# -- q vectors --------------------------------------------------------------


def test_q_vector_vacuum_event():
    q = q_vector(0, 0, 0, BeamSplitterSpec(0.4), 0.8, 4).amplitudes
    np.testing.assert_allclose(q, [math.exp(-0.32), 0, 0, 0, 0], atol=1e-16)


@pytest.mark.parametrize("N", range(5))
def test_q_vector_even_parity(N):
    q = q_vector(1, 1, N, BeamSplitterSpec(0.6), 0.9, 8).amplitudes
    assert q[N + 1] == 0


def test_q_vector_single_photon_event_against_oracle():
    bs = BeamSplitterSpec(math.pi / 4)
    q = q_vector(1, 0, 0, bs, 1.0, 3).amplitudes
    ref = oracle.q_contraction(DetectionEvent(1, 0, 0), bs, 1.0, 3).amplitudes
    assert np.abs(q - ref).max() <= 1e-12
    # alpha component at m=0 and the -r/sqrt(2) e^{-1/2} ladder term at m=1
    assert q[0] == pytest.approx(math.exp(-0.5) / math.sqrt(2), abs=1e-15)
    assert q[1] == pytest.approx(-bs.r / math.sqrt(2) * math.exp(-0.5), abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.floats(0.05, 1.5),
       st.floats(0.0, 1.4))
def test_q_vector_support_and_oracle(n_a, n_b, N, theta, alpha):
    bs = BeamSplitterSpec(theta)
    lam = n_a + n_b
    cutoff = N + lam + 2
    q = q_vector(n_a, n_b, N, bs, alpha, cutoff).amplitudes
    outside = np.r_[q[:N], q[N + lam + 1:]]
    assert np.all(outside == 0)
    ref = oracle.q_contraction(DetectionEvent(n_a, n_b, N), bs, alpha, cutoff).amplitudes
    assert np.abs(np.r_[ref[:N], ref[N + lam + 1:]]).max(initial=0) <= 1e-14
    # equal up to one global phase
    k = np.argmax(np.abs(ref))
    if abs(ref[k]) > 1e-12:
        phase = q[k] / ref[k]
        assert abs(abs(phase) - 1) <= 1e-10
        assert np.abs(q - phase * ref).max() <= 1e-12


def test_q_vector_errors():
    with pytest.raises(CutoffError):
        q_vector(2, 1, 2, BS2, 0.5, 4)
    with pytest.raises(ValidationError):
        q_vector(0, 0, 0, BS2, math.nan, 4)


# -- probabilities ------------------------------------------------------------


def test_pom_probability_examples():
    alpha = 0.9
    vac = make_test_states("fock", {"n": 0}, 4)
    q = q_vector(0, 0, 0, BeamSplitterSpec(0.3), alpha, 4)
    for phi in (0.0, 1.1, 4.0):
        assert pom_probability(vac, q, phi) == pytest.approx(math.exp(-alpha ** 2), abs=1e-15)
    rho = make_test_states("random", {}, 4, seed=1)
    assert pom_probability(rho, FockVector(np.zeros(5), normalized=False)) == 0
    coh = _coherent_rho(0.5, 14)
    q = q_vector(0, 0, 0, BeamSplitterSpec(0.7), math.sqrt(0.5), 14)
    assert pom_probability(coh, q) == pytest.approx(math.exp(-1), abs=1e-14)
    assert oracle.forward_probability(coh, DetectionEvent(0, 0, 0), BeamSplitterSpec(0.7),
                                      math.sqrt(0.5)) == pytest.approx(math.exp(-1), abs=1e-14)


def test_pom_probability_rejects_mismatch_and_flags_negative():
    with pytest.raises(ValidationError):
        pom_probability(make_test_states("fock", {"n": 0}, 3), q_vector(0, 0, 0, BS2, 0.5, 4))
    bad = -np.eye(3)
    with pytest.raises(NumericalFault):
        pom_probability(bad, FockVector(np.array([1.0, 0, 0]), normalized=False))


def test_event_probability_mixed_reference_matches_pure():
    rho = make_test_states("random", {}, 6, seed=5)
    bs = BeamSplitterSpec(0.8)
    ev = DetectionEvent(2, 1, 1)
    pure = event_probability(rho, ev, bs, 0.7, 0.4)
    diffused0 = event_probability(rho, ev, bs, ReferenceModel.phase_diffused(0.7, 0.0), 0.4)
    assert diffused0 == pytest.approx(pure, abs=1e-15)
    # reference phase is equivalent to shifting the phase setting
    rotated = event_probability(rho, ev, bs, ReferenceModel.coherent(0.7 * np.exp(0.3j)), 0.4)
    assert rotated == pytest.approx(event_probability(rho, ev, bs, 0.7, 0.7), abs=1e-15)


def test_event_probability_affine_in_rho():
    a = make_test_states("random", {}, 6, seed=11)
    b = make_test_states("thermal", {"mean": 0.7}, 6)
    mix = 0.3 * a.entries + 0.7 * b.entries
    for ev in [DetectionEvent(1, 1, 0), DetectionEvent(0, 2, 2)]:
        args = (ev, BeamSplitterSpec(0.5), 0.8, 0.9)
        assert event_probability(mix, *args) == pytest.approx(
            0.3 * event_probability(a, *args) + 0.7 * event_probability(b, *args), abs=1e-12)


# -- cycling ------------------------------------------------------------------


def test_cycled_probability_single_setting_for_lam2():
    rho = make_test_states("random", {}, 6, seed=2)
    ev, bs = DetectionEvent(1, 1, 1), BeamSplitterSpec(0.5)
    assert cycled_probability(rho, ev, 0, bs, 0.8) == event_probability(rho, ev, bs, 0.8, 0.0)
    with pytest.raises(ValidationError):
        cycled_probability(rho, DetectionEvent(0, 0, 1), 0, bs, 0.8)
    with pytest.raises(ValidationError):
        cycled_probability(rho, DetectionEvent(3, 0, 1), 0, bs, 0.8)


@pytest.mark.parametrize("n_a,n_b,N", [(1, 1, 0), (2, 2, 1), (3, 2, 0), (2, 1, 2), (1, 2, 1)])
def test_cycled_pom_structure(n_a, n_b, N):
    ev = DetectionEvent(n_a, n_b, N)
    lam = ev.lam
    for beta in BETAS:
        pi = cycled_pom(ev, beta, BeamSplitterSpec(0.6), 0.9, N + lam + 1)
        d = np.abs(np.subtract.outer(np.arange(len(pi)), np.arange(len(pi))))
        assert np.abs(pi[(d > 0) & (d < lam)]).max(initial=0) <= 1e-12
        assert np.abs(pi[d > lam]).max(initial=0) == 0


@pytest.mark.parametrize("lam", [1, 3, 5])
def test_odd_shortcut(lam):
    rho = make_test_states("random", {}, 8, seed=lam)
    bs = BeamSplitterSpec(0.7)
    for N in range(8 - lam + 1):
        for i, beta in enumerate([Fraction(0), Fraction(1, 2)]):
            p3 = cycled_probability(rho, DetectionEvent.e3(N, lam), beta, bs, 0.9)
            p2 = cycled_probability(rho, DetectionEvent.optimal(N, lam), beta + 1, bs, 0.9)
            assert abs(p3 - p2) <= 1e-12


# -- normalisation and reconstruction ---------------------------------------


def test_norm_constant_example():
    nc = norm_constant(0, 2, BS2, 1.0)
    assert nc.value == pytest.approx(-math.exp(-1) / (4 * math.sqrt(2)), abs=1e-15)
    assert nc.parity == "even"
    assert nc.conditioning == pytest.approx(4 * abs(nc.value))


def test_norm_constant_fully_diffused_reference():
    ref = ReferenceModel.phase_diffused(1.0, math.inf)
    with pytest.raises(UnmeasurableElementError):
        norm_constant(0, 2, BS2, ref)
    with pytest.raises(ValidationError):
        norm_constant(0, 0, BS2, 1.0)


@pytest.mark.parametrize("N,lam", [(0, 1), (1, 1), (0, 2), (2, 2), (1, 3), (0, 4), (3, 4), (2, 5)])
def test_norm_constant_equals_q_product(N, lam):
    bs, alpha = BeamSplitterSpec(0.65), 0.85
    ev = DetectionEvent.optimal(N, lam)
    q = q_vector(*ev.as_tuple(), bs, alpha, N + lam).amplitudes
    prod = q[N] * np.conj(q[N + lam])
    assert abs(norm_constant(N, lam, bs, alpha).value - prod) <= 1e-12
    assert abs(event_product(*ev.as_tuple(), bs, alpha) - prod) <= 1e-12


@pytest.mark.parametrize("n_a,n_b,N", [(0, 3, 1), (3, 1, 0), (4, 0, 2), (1, 4, 1)])
def test_event_product_any_split(n_a, n_b, N):
    bs, alpha = BeamSplitterSpec(1.1), 0.6
    lam = n_a + n_b
    q = q_vector(n_a, n_b, N, bs, alpha, N + lam).amplitudes
    assert abs(event_product(n_a, n_b, N, bs, alpha) - q[N] * np.conj(q[N + lam])) <= 1e-12


def test_reconstruct_offdiag_examples():
    bs = BeamSplitterSpec.from_ratio(0)
    vac = make_test_states("fock", {"n": 0}, 6)
    for N, lam in [(0, 1), (1, 2), (2, 3)]:
        nc = norm_constant(N, lam, BeamSplitterSpec(0.7), 0.8)
        val = reconstruct_offdiag(*_cycled(vac, N, lam, BeamSplitterSpec(0.7), 0.8), nc)
        assert abs(val) <= 1e-10
    coh = _coherent_rho(0.5, 14)
    ref = math.sqrt(0.5)
    val = reconstruct_offdiag(*_cycled(coh, 0, 1, bs, ref), norm_constant(0, 1, bs, ref))
    assert round(val.real, 4) == 0.4289 and abs(val.imag) < 1e-12
    sup = make_test_states("superposition", {"components": {0: 1, 2: 1}}, 6)
    val = reconstruct_offdiag(*_cycled(sup, 0, 2, bs, 1.0), norm_constant(0, 2, bs, 1.0))
    assert abs(val - 0.5) <= 1e-8


def test_reconstruct_offdiag_checks_range():
    nc = norm_constant(0, 1, BS2, 1.0)
    with pytest.raises(ValidationError):
        reconstruct_offdiag(1.2, 0, 0, 0, nc)
    assert reconstruct_offdiag(-0.1, 0, 0, 0, nc, check=False) == pytest.approx(-0.1 / (4 * nc.value))


def test_reconstruct_diag_examples():
    ref = math.sqrt(0.5)
    assert round(reconstruct_diag(math.exp(-1), 0, BS2, ref), 4) == 0.6065
    one = make_test_states("fock", {"n": 1}, 4)
    bs = BeamSplitterSpec(0.5)
    P = event_probability(one, DetectionEvent(0, 0, 1), bs, ref)
    assert reconstruct_diag(P, 1, bs, ref) == pytest.approx(1.0, abs=1e-10)
    assert reconstruct_diag(0.0, 3, bs, ref) == 0.0


def test_pom_matrix_matches_q_outer_product():
    bs, alpha, phi = BeamSplitterSpec(0.45), 0.75, 0.6
    ev = DetectionEvent(2, 1, 1)
    q = q_vector(*ev.as_tuple(), bs, alpha, 6).amplitudes
    qphi = q * np.exp(1j * np.arange(7) * phi)
    pi = pom_matrix(ev, bs, alpha, 6, phi)
    assert np.abs(pi - np.outer(qphi, qphi.conj())).max() <= 1e-15


# -- optimality -------------------------------------------------------------


def test_optimal_params_examples():
    assert optimal_params(1, 2) == (1.0, 1.0)
    assert optimal_params(0, 2)[1] == 0
    assert optimal_params(3, 0) == (0.0, math.inf)
    assert BeamSplitterSpec.from_ratio(optimal_params(0, 2)[1]).r == 1.0


@pytest.mark.parametrize("lam", range(1, 7))
@pytest.mark.parametrize("N", range(5))
def test_event_optimality(N, lam):
    bs, alpha = BeamSplitterSpec(0.7), 0.9
    mags = np.array([abs(event_product(n_a, lam - n_a, N, bs, alpha)) for n_a in range(lam + 1)])
    best = set(np.flatnonzero(mags >= mags.max() - 1e-12))
    assert best == ({lam // 2} if lam % 2 == 0 else {(lam - 1) // 2, (lam + 1) // 2})
