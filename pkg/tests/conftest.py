import warnings

import numpy as np
import pytest

from opsynth import _pykernels, kernels
from opsynth.errors import TruncationWarning
from opsynth.fock import make_test_states

CORPUS_CUTOFF = 12


def corpus(cutoff=CORPUS_CUTOFF):
    """(name, DensityMatrix) pairs: Fock 0-3, coherent, superposition, thermal, 20 random."""
    states = [(f"fock{n}", make_test_states("fock", {"n": n}, cutoff)) for n in range(4)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        states.append(("coherent", make_test_states("coherent", {"mean": 0.5}, cutoff)))
    states.append(("superposition",
                   make_test_states("superposition", {"components": {0: 1, 2: 1}}, cutoff)))
    states.append(("thermal", make_test_states("thermal", {"mean": 0.5}, cutoff)))
    states += [(f"random{s}", make_test_states("random", {"support": 8}, cutoff, seed=s))
               for s in range(20)]
    return states


BACKENDS = ["python"] + (["cython"] if kernels.compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    impl = _pykernels if request.param == "python" else kernels.compiled
    monkeypatch.setattr(kernels, "apply_pair", impl.apply_pair)
    monkeypatch.setattr(kernels, "event_distribution", impl.event_distribution)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, name, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        print(line)
        lines.append((number, line))
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
