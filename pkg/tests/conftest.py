import sys

import numpy as np
import pytest

from podclass.dataset import (
    SplitPolicy,
    SyntheticSpec,
    generate_synthetic,
    split_dataset,
)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance gate")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_spec():
    return SyntheticSpec(
        class_count=3,
        frames_per_class=36,
        image_side=16,
        intrinsic_rank=3,
        noise_level=0.1,
        seed=9,
    )


@pytest.fixture(scope="session")
def tiny_samples(tiny_spec):
    return generate_synthetic(tiny_spec)


@pytest.fixture(scope="session")
def tiny_split(tiny_samples):
    policy = SplitPolicy.for_samples(tiny_samples)
    return split_dataset(tiny_samples, policy, seed=2, view="tiny")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
