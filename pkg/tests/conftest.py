import numpy as np
import pytest


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {name}: {report.outcome.upper()}")

from blockaudit import (
    DriftParams,
    EvokedParams,
    Session,
    TrialEvent,
    generate_session,
    make_block_schedule,
)


def make_session(channels=2, total=64, rate=100.0, events=None, seed=0,
                 subject="s01"):
    """Tiny handcrafted session for format/segmentation tests."""
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((channels, total)).astype(np.float32)
    if events is None:
        events = (
            TrialEvent(trial_id=0, class_label=0, block_id=0,
                       onset_sample=4, length_samples=20),
            TrialEvent(trial_id=1, class_label=1, block_id=1,
                       onset_sample=30, length_samples=20),
        )
    return Session(samples=samples, sample_rate=rate, subject_id=subject,
                   events=tuple(events))


@pytest.fixture
def tiny_session():
    return make_session()


@pytest.fixture(scope="session")
def drift_session():
    """Small block-design session with contaminating drift only."""
    schedule = make_block_schedule(
        6, 20, stimulus_ms=500, blank_ms=1000, seed=5, blocks_per_class=4
    )
    return generate_session(
        schedule, channels=16, sample_rate=256.0,
        drift=DriftParams(5.0, 0.05, 1.0), evoked=EvokedParams(),
        subject_id="s01", seed=5,
    )


@pytest.fixture(scope="session")
def evoked_session():
    """Small session with genuine class signal and no drift."""
    schedule = make_block_schedule(
        6, 20, stimulus_ms=500, blank_ms=1000, seed=9, blocks_per_class=4
    )
    return generate_session(
        schedule, channels=16, sample_rate=256.0,
        drift=DriftParams(0.0, 0.0, 1.0),
        evoked=EvokedParams(amplitude=4.0, template_ms=150.0, center_hz=30.0,
                            enabled=True),
        subject_id="s01", seed=9,
    )
