"""Photon-number density-matrix elements from two beam splitters and a coherent reference."""

from .errors import (ConditioningError, CutoffError, NumericalFault, OpsynthError,
                     ToleranceBreach, UnmeasurableElementError, ValidationError)
from .fock import DensityMatrix, FockVector, coherent_amplitudes, density_from_pure, make_test_states
from .imperfection import ReferenceModel, bernoulli_invert, sample_events, smear
from .kernels import BACKEND
from .optics import BeamSplitterSpec
from .scheme import DetectionEvent, norm_constant, q_vector, reconstruct_diag, reconstruct_offdiag

__version__ = "0.1.0"
