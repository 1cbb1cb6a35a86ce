import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def benchmark():
    from gptlab import RadialConductivity

    return RadialConductivity.benchmark()


@pytest.fixture(scope="session")
def benchmark_targets(benchmark):
    from gptlab import contracted_gpts

    return contracted_gpts(benchmark, 6)


@pytest.fixture(scope="session")
def benchmark_run(benchmark, benchmark_targets):
    """Default N=6 reconstruction of the benchmark, run once per session."""
    import time
    import warnings

    from gptlab import ReconstructionConfig, recursive_reconstruct

    t0 = time.perf_counter()
    with warnings.catch_warnings():
        # stages run to max_iter by design (tol is far below reachable)
        warnings.simplefilter("ignore", RuntimeWarning)
        sigma, state = recursive_reconstruct(benchmark_targets, ReconstructionConfig(6), truth=benchmark)
    return sigma, state, time.perf_counter() - t0


ACCEPTANCE_LINES = {}


@pytest.fixture
def report():
    """Record a one-line acceptance verdict: ``report(k, passed, detail)``."""

    def record(k, passed, detail):
        line = f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
