import os
import time
from dataclasses import dataclass

import pytest

from diar_adapt.pipeline import PipelineConfig, run_ablation
from diar_adapt.synthetic import make_benchmark

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def benchmark_sessions():
    """The pinned 20-session benchmark: seed 42, noise_sigma 0.25, 10% non-speech."""
    return make_benchmark(n_sessions=20, seed=42, noise_sigma=0.25, nonspeech_fraction=0.1)


@dataclass
class BenchmarkAblation:
    rows: dict
    seconds: float

    def der(self, clusterer, techniques):
        return self.rows[(clusterer, techniques)].der


@pytest.fixture(scope="session")
def benchmark_ablation(benchmark_sessions):
    """All 16 ablation rows on the pinned benchmark, computed once per run."""
    os.environ.setdefault("DIAR_ADAPT_THREADS", "1")
    t0 = time.perf_counter()
    rows = run_ablation(benchmark_sessions, PipelineConfig(seed=0))
    return BenchmarkAblation({(r.clusterer, r.techniques): r for r in rows}, time.perf_counter() - t0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
