import math

import numpy as np
import pytest

from opsynth import _pykernels, kernels
from opsynth.config import ExperimentConfig
from opsynth.errors import ValidationError
from opsynth.pipeline import ProbabilitySource, measure_element, measure_full_matrix


def _config(**kw):
    doc = {"version": 1, "signal": {"kind": "random", "seed": 7, "params": {"support": 6}},
           "cutoff": 8, "n_max": 4}
    doc.update(kw)
    return ExperimentConfig.from_dict(doc)


def _true_block(cfg, n):
    return cfg.signal_state().block(n + 1)


def test_fock_one_round_trip():
    cfg = _config(signal={"kind": "fock", "params": {"n": 1}})
    est = measure_full_matrix(cfg.signal_state(), cfg).estimate.entries
    expected = np.zeros((5, 5))
    expected[1, 1] = 1
    assert np.abs(est - expected).max() <= 1e-8


@pytest.mark.parametrize("bs1", ["auto", {"t_over_r_sq": 0.8}, {"mixing_angle": 0.4},
                                 {"transmission": 0.9}])
def test_random_round_trip(bs1):
    cfg = _config(bs1=bs1, reference={"kind": "coherent", "mean": 0.7, "phase": 0.3})
    res = measure_full_matrix(cfg.signal_state(), cfg)
    assert not res.errors
    assert np.abs(res.estimate.entries - _true_block(cfg, 4)).max() <= 1e-8


def test_auto_reference_mean():
    cfg = _config(reference={"kind": "coherent", "mean": "auto"})
    res = measure_full_matrix(cfg.signal_state(), cfg)
    assert np.abs(res.estimate.entries - _true_block(cfg, 4)).max() <= 1e-8
    means = {e.lam: e.reference["mean_photons"] for e in res.elements}
    assert means == pytest.approx({lam: lam / 2 for lam in range(5)}, rel=1e-14)


def test_output_hermitian_with_real_diagonal():
    cfg = _config(mode="smeared", efficiency=0.8)
    est = measure_full_matrix(cfg.signal_state(), cfg).estimate.entries
    assert np.array_equal(est, est.conj().T)
    assert np.all(np.diag(est).imag == 0) and np.all(np.diag(est).real >= -1e-10)


def test_ideal_smearing_is_bit_identical(backend):
    exact = _config(mode="exact")
    smeared = _config(mode="smeared", efficiency=1.0)
    a = measure_full_matrix(exact.signal_state(), exact).estimate.entries
    b = measure_full_matrix(smeared.signal_state(), smeared).estimate.entries
    assert np.array_equal(a, b)


def test_inverted_smearing_recovers_state(backend):
    cfg = _config(mode="smeared", efficiency={"a": 0.9, "b": 0.85, "c": 0.95},
                  invert_efficiency=True)
    est = measure_full_matrix(cfg.signal_state(), cfg).estimate.entries
    assert np.abs(est - _true_block(cfg, 4)).max() <= 1e-8


def test_smeared_backends_agree():
    cfg = _config(mode="smeared", efficiency=0.9)
    rho = cfg.signal_state()
    src = ProbabilitySource(rho, cfg)
    T = cfg.total_cutoff_for(cfg.reference_for(1))
    bs = cfg.bs1_for(1, 2)
    chi = cfg.reference_for(2).components(T)[0][1]
    args = (np.ascontiguousarray(rho.entries), np.ascontiguousarray(chi), bs.t, bs.r, 0.4, T)
    py = _pykernels.event_distribution(*args)
    if kernels.compiled is not None:
        assert np.abs(kernels.compiled.event_distribution(*args) - py).max() <= 1e-15
    assert src.joint(bs, cfg.reference_for(2), 0).shape == (T + 1, T + 1, 9)


def test_phase_diffused_reference_round_trip():
    cfg = _config(reference={"kind": "phase-diffused", "mean": 0.6, "sigma": 0.3})
    res = measure_full_matrix(cfg.signal_state(), cfg)
    assert np.abs(res.estimate.entries - _true_block(cfg, 4)).max() <= 1e-8


def test_fully_diffused_reference_reports_unmeasurable():
    cfg = _config(reference={"kind": "phase-diffused", "mean": 0.6, "sigma": "inf"})
    res = measure_full_matrix(cfg.signal_state(), cfg)
    classes = {e["class"] for e in res.errors}
    assert classes == {"unmeasurable-element"}
    assert len(res.errors) == sum(5 - lam for lam in range(1, 5))
    # diagonals are still measured
    np.testing.assert_allclose(np.diag(res.estimate.entries).real,
                               np.diag(_true_block(cfg, 4)).real, atol=1e-8)
    assert np.isnan(res.estimate.entries[1, 0])


def test_sampled_is_deterministic_and_order_independent():
    cfg = _config(mode="sampled", shots=20_000, seed=99)
    rho = cfg.signal_state()
    a = measure_full_matrix(rho, cfg).estimate.entries
    b = measure_full_matrix(rho, cfg).estimate.entries
    assert np.array_equal(a, b)
    src = ProbabilitySource(rho, cfg)
    pairs = [(N, lam) for lam in range(5) for N in range(5 - lam)]
    backwards = {p: measure_element(src, *p).value for p in reversed(pairs)}
    for N, lam in pairs:
        assert backwards[(N, lam)] == a[N + lam, N]
    c = measure_full_matrix(rho, cfg.with_overrides(seed=100)).estimate.entries
    assert not np.array_equal(a, c)


def test_sampled_stderr_covers_error():
    cfg = _config(mode="sampled", shots=200_000, seed=5)
    res = measure_full_matrix(cfg.signal_state(), cfg)
    z = np.abs(res.estimate.entries - _true_block(cfg, 4)) / res.stderr_matrix()
    assert np.nanmax(z) < 5


def test_sampled_with_inversion_variance():
    cfg = _config(mode="sampled", shots=200_000, seed=6, efficiency=0.9, invert_efficiency=True)
    res = measure_full_matrix(cfg.signal_state(), cfg)
    z = np.abs(res.estimate.entries - _true_block(cfg, 4)) / res.stderr_matrix()
    assert np.nanmax(z) < 5


def test_report_contents():
    cfg = _config(mode="smeared", efficiency=0.9)
    res = measure_full_matrix(cfg.signal_state(), cfg)
    rep = res.report()
    assert rep["detector_model"] == {"efficiency": {"a": 0.9, "b": 0.9, "c": 0.9},
                                     "symmetric": True, "smearing": "analytic", "inverted": False}
    assert rep["bs1_auto_diagonal_ratio"] == 2.0
    el = {(e["N"], e["lam"]): e for e in rep["elements"]}
    assert el[(0, 2)]["schedule"] == {"0": ["0"], "1": ["1/2"], "1/2": ["1/4"], "3/2": ["3/4"]}
    assert el[(1, 2)]["conditioning"] > 0


def test_n_max_beyond_cutoff_rejected():
    cfg = _config()
    with pytest.raises(ValidationError):
        measure_full_matrix(cfg.signal_state(), cfg, n_max=9)


def test_element_cutoff_error_captured():
    cfg = _config(n_max=8)
    res = measure_element(ProbabilitySource(cfg.signal_state(), cfg), 5, 4)
    assert res.error["class"] == "cutoff" and math.isnan(res.value.real)
