"""Run the four cycling experiments per element and assemble density matrices.

A :class:`ProbabilitySource` answers "probability of event e at this setting"
in one of three modes:

exact    closed-form POM probabilities
smeared  joint count distribution through detectors of finite efficiency
         (optionally Bernoulli-inverted)
sampled  multinomial draws from the smeared joint distribution, one draw per
         experimental setting (BS1, reference, phase), with a seed substream
         derived from a hash of the setting so results do not depend on the
         order in which settings are visited
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .config import ExperimentConfig
from .errors import CutoffError, OpsynthError, ValidationError
from .fock import DensityMatrix
from .imperfection import (ReferenceModel, SampledCounts, bernoulli_invert, inversion_kernel,
                           sample_events, smear)
from .optics import BeamSplitterSpec
from .scheme import (BETAS, DetectionEvent, PhaseSchedule, diagonal_divisor, event_probability,
                     norm_constant, reconstruct_diag, reconstruct_offdiag)


def _setting_key(bs1: BeamSplitterSpec, reference: ReferenceModel, fraction: Fraction) -> str:
    desc = json.dumps(reference.descriptor(), sort_keys=True)
    return f"{bs1.mixing_angle!r}|{desc}|{fraction}"


def _substream(seed: int, key: str) -> np.random.Generator:
    digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
    word = int.from_bytes(digest, "little")
    ss = np.random.SeedSequence(seed, spawn_key=(word & 0xFFFFFFFF, word >> 32))
    return np.random.default_rng(ss)


class ProbabilitySource:
    """Event probabilities for one signal state under a configuration's detection model."""

    def __init__(self, rho_c: DensityMatrix, config: ExperimentConfig):
        self.rho = rho_c
        self.config = config
        self.mode = config.mode
        self.efficiencies = config.efficiencies
        self.invert = bool(config.invert_efficiency) and not config.ideal_detectors
        self._joint: dict[str, np.ndarray] = {}
        self._draws: dict[str, SampledCounts] = {}
        self.settings_used: list[str] = []
        self.total_cutoffs: dict[str, int] = {}

    @property
    def exact_path(self) -> bool:
        # ideal detectors make smearing the identity; skipping it keeps results bit-identical
        return self.mode == "exact" or (self.mode == "smeared" and self.config.ideal_detectors)

    def joint(self, bs1: BeamSplitterSpec, reference: ReferenceModel, fraction: Fraction) -> np.ndarray:
        """True joint counts P[n_a, n_b, n_c] at this setting (before detectors)."""
        key = _setting_key(bs1, reference, fraction)
        if key not in self._joint:
            T = self.config.total_cutoff_for(reference)
            phi = math.pi * float(fraction)
            rho = np.ascontiguousarray(self.rho.entries)
            P = None
            for w, chi in reference.components(T):
                part = w * kernels.event_distribution(rho, np.ascontiguousarray(chi, dtype=complex),
                                                      bs1.t, bs1.r, phi, T)
                P = part if P is None else P + part
            self._joint[key] = np.clip(P, 0.0, None)
            self.total_cutoffs[key] = T
        return self._joint[key]

    def detected(self, bs1, reference, fraction) -> np.ndarray:
        P = self.joint(bs1, reference, fraction)
        return P if self.config.ideal_detectors else smear(P, self.efficiencies)

    def _inverted(self, dist: np.ndarray) -> np.ndarray:
        return bernoulli_invert(dist, self.efficiencies, bound=self.config.inversion_bound)

    def probability(self, event: DetectionEvent, bs1: BeamSplitterSpec, reference: ReferenceModel,
                    fraction: Fraction) -> tuple[float, float]:
        """(estimate, variance of the estimate); variance is 0 outside sampled mode."""
        if self.exact_path:
            return event_probability(self.rho, event, bs1, reference, math.pi * float(fraction)), 0.0
        if self.mode == "smeared":
            dist = self.detected(bs1, reference, fraction)
            if self.invert:
                dist = self._inverted(dist)
            idx = self._index(event, dist)
            return (0.0 if idx is None else float(dist[idx])), 0.0
        return self._sampled(event, bs1, reference, fraction)

    @staticmethod
    def _index(event, dist):
        idx = event.as_tuple()
        if any(i >= s for i, s in zip(idx, dist.shape)):
            return None
        return idx

    def _sampled(self, event, bs1, reference, fraction):
        key = _setting_key(bs1, reference, fraction)
        shots = int(self.config.shots)
        if key not in self._draws:
            counts = sample_events(self.detected(bs1, reference, fraction), shots,
                                   _substream(int(self.config.seed), key))
            self._draws[key] = counts
            self.settings_used.append(key)
        counts = self._draws[key]
        f = counts.frequencies
        idx = self._index(event, f)
        if idx is None:
            return 0.0, 0.0
        if not self.invert:
            p = float(f[idx])
            return p, p * (1.0 - p) / shots
        # inverted estimate is a linear functional of the frequencies
        rows = [inversion_kernel(e, size)[i] for e, size, i in zip(self.efficiencies, f.shape, idx)]
        w = np.einsum("i,j,k->ijk", *rows)
        p = float(np.sum(w * f))
        var = (float(np.sum(w ** 2 * f)) - p ** 2) / shots
        return p, max(var, 0.0)

    def counts(self):
        """All multinomial draws made so far, keyed by setting."""
        return dict(self._draws)


@dataclass
class ElementResult:
    N: int
    lam: int
    value: complex = complex("nan")
    conditioning: float | None = None
    stderr: float | None = None
    probabilities: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    bs1: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_dict(self) -> dict:
        return {
            "N": self.N, "lam": self.lam, "value": self.value,
            "conditioning": self.conditioning, "stderr": self.stderr,
            "probabilities": self.probabilities, "schedule": self.schedule,
            "bs1": self.bs1, "reference": self.reference, "error": self.error,
        }


def _bs_desc(bs1: BeamSplitterSpec) -> dict:
    return {"mixing_angle": bs1.mixing_angle, "t": bs1.t, "r": bs1.r, "t_over_r_sq": bs1.t_over_r_sq}


def measure_element(source: ProbabilitySource, N: int, lam: int) -> ElementResult:
    """<N+lam| rho |N> from simulated cycling experiments; errors are captured, not raised."""
    cfg = source.config
    res = ElementResult(N, lam)
    try:
        if N < 0 or lam < 0:
            raise ValidationError("N and lam must be non-negative")
        if N + lam > cfg.cutoff:
            raise CutoffError(f"element needs level N+lam={N + lam} but cutoff is {cfg.cutoff}")
        bs1 = cfg.bs1_for(N, lam)
        ref = cfg.reference_for(lam)
        res.bs1, res.reference = _bs_desc(bs1), ref.descriptor()
        check = not source.invert
        if lam == 0:
            event = DetectionEvent(0, 0, N)
            p, var = source.probability(event, bs1, ref, Fraction(0))
            div = diagonal_divisor(N, bs1, ref)
            res.value = complex(reconstruct_diag(p, N, bs1, ref, check=check))
            res.conditioning = div
            res.stderr = math.sqrt(var) / div if div > 0 else None
            res.probabilities = {"event": event.as_tuple(), "P": p}
            return res
        event = DetectionEvent.optimal(N, lam)
        nc = norm_constant(N, lam, bs1, ref, floor=cfg.norm_floor)
        probs, total_var = {}, 0.0
        for beta in BETAS:
            sched = PhaseSchedule(beta, lam)
            vals = [source.probability(event, bs1, ref, f) for f in sched.fractions]
            probs[str(beta)] = float(np.mean([v[0] for v in vals]))
            total_var += sum(v[1] for v in vals) / len(vals) ** 2
            res.schedule[str(beta)] = [str(f) for f in sched.fractions]
        res.value = reconstruct_offdiag(probs["0"], probs["1"], probs["1/2"], probs["3/2"], nc,
                                        check=check)
        res.conditioning = nc.conditioning
        res.stderr = math.sqrt(total_var) / nc.conditioning
        res.probabilities = {"event": event.as_tuple(), "norm_constant": nc.value, **probs}
    except OpsynthError as exc:
        res.value = complex("nan")
        res.error = {"class": exc.error_class, "message": str(exc)}
    return res


@dataclass
class MatrixResult:
    estimate: DensityMatrix
    elements: list[ElementResult]
    source: ProbabilitySource = field(repr=False)

    @property
    def errors(self) -> list[dict]:
        return [{"N": e.N, "lam": e.lam, **e.error} for e in self.elements if e.error]

    def stderr_matrix(self) -> np.ndarray:
        n = self.estimate.cutoff + 1
        out = np.full((n, n), np.nan)
        for e in self.elements:
            if e.stderr is not None:
                out[e.N + e.lam, e.N] = out[e.N, e.N + e.lam] = e.stderr
        return out

    def report(self) -> dict:
        cfg = self.source.config
        effs = cfg.efficiencies
        return {
            "config": cfg.to_dict(),
            "kernel_backend": kernels.BACKEND,
            "mode": cfg.mode,
            "detector_model": {
                "efficiency": {"a": effs[0], "b": effs[1], "c": effs[2]},
                "symmetric": len(set(effs)) == 1,
                "smearing": ("none" if self.source.exact_path else
                             "analytic" if cfg.mode == "smeared" else "monte-carlo"),
                "inverted": self.source.invert,
            },
            "bs1_auto_diagonal_ratio": cfg.diagonal_ratio() if cfg.auto_bs1 else None,
            "truncation": {
                "signal_tail": self.source.rho.tail,
                "joint_total_cutoffs": sorted(set(self.source.total_cutoffs.values())),
            },
            "settings_sampled": len(self.source.settings_used),
            "elements": [e.as_dict() for e in self.elements],
            "errors": self.errors,
        }


def measure_full_matrix(rho_c: DensityMatrix, config: ExperimentConfig,
                        n_max: int | None = None) -> MatrixResult:
    """Estimate all elements with N + lam <= n_max; the upper triangle follows by Hermiticity."""
    n_max = config.n_max if n_max is None else n_max
    if n_max > config.cutoff:
        raise ValidationError(f"n_max={n_max} exceeds cutoff {config.cutoff}")
    source = ProbabilitySource(rho_c, config)
    est = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    elements = []
    for lam in range(n_max + 1):
        for N in range(n_max + 1 - lam):
            e = measure_element(source, N, lam)
            elements.append(e)
            if lam == 0:
                est[N, N] = e.value.real if e.ok else np.nan
            else:
                est[N + lam, N] = e.value
                est[N, N + lam] = np.conj(e.value)
    return MatrixResult(DensityMatrix.estimate(est), elements, source)
