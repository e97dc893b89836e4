from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_synth():
    from painclf.synth import SynthConfig, generate_corpus

    return generate_corpus(SynthConfig(n_docs=120, n_spans=400, annotator_noise=0.05, seed=11))


@pytest.fixture(scope="session")
def small_examples(small_synth):
    from painclf.annotation import adjudicate_all
    from painclf.pipeline import LabeledSpan

    texts = {s.span_id: s.text for s in small_synth.spans}
    gold = [g for g in adjudicate_all(small_synth.all_annotations()) if g.resolved]
    return [LabeledSpan(g.span_id, texts[g.span_id], g.label2) for g in gold]


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
