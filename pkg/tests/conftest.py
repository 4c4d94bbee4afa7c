import numpy as np
import pytest

from ihif.harness.pipeline import prepare_split, run_evaluation, train_on
from ihif.harness.synthetic import synthetic_config, texture_dataset


def brute_convolve_same(img, kernel):
    """Direct double-loop linear convolution, cropped so the kernel center sits on each pixel."""
    img = np.asarray(img, dtype=np.complex128)
    kernel = np.asarray(kernel, dtype=np.complex128)
    H, W = img.shape
    kh, kw = kernel.shape
    cy, cx = kh // 2, kw // 2
    out = np.zeros((H, W), dtype=np.complex128)
    for y in range(H):
        for x in range(W):
            acc = 0j
            for u in range(kh):
                for v in range(kw):
                    yy, xx = y + cy - u, x + cx - v
                    if 0 <= yy < H and 0 <= xx < W:
                        acc += kernel[u, v] * img[yy, xx]
            out[y, x] = acc
    return out


@pytest.fixture(scope="session")
def synth_data():
    return texture_dataset(seed=0)


@pytest.fixture(scope="session")
def synth_config(synth_data):
    return synthetic_config(synth_data, seed=0)


@pytest.fixture(scope="session")
def synth_split(synth_data, synth_config):
    return prepare_split(synth_config, synth_data)


@pytest.fixture(scope="session")
def synth_bundle(synth_split, synth_config):
    train, _, _ = synth_split
    return train_on(train, synth_config)


@pytest.fixture(scope="session")
def synth_evaluation(synth_bundle, synth_split):
    _, pos, neg = synth_split
    return run_evaluation(synth_bundle, pos, neg)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
