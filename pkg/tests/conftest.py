import dataclasses
import time

import pytest

from inflowkit import pipeline, synth


@pytest.fixture(scope="session")
def default_synth():
    """The default generator output (bundle, ground truth)."""
    return synth.generate_corpus(synth.SynthConfig())


@pytest.fixture(scope="session")
def all_runs(tmp_path_factory):
    """``pipeline all`` on the bundled corpus at one and at two threads."""
    out = {}
    for threads in (1, 2):
        d = tmp_path_factory.mktemp(f"all_t{threads}")
        cfg = dataclasses.replace(pipeline.RunConfig(out_dir=str(d)), threads=threads)
        t0 = time.perf_counter()
        rep = pipeline.cmd_all(cfg)
        out[threads] = {"dir": d, "report": rep, "seconds": time.perf_counter() - t0}
    return out


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
