import numpy as np
import pytest

from voxscreen.audio import AudioBuffer

FS = 16000


def sine(freq, seconds=1.0, fs=FS, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * fs))) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)


def buffer(samples, fs=FS, source_id="t"):
    return AudioBuffer(np.asarray(samples, dtype=np.float64), fs, source_id)


def noisy_sine(freq, snr_db, seconds=1.0, seed=0):
    x = sine(freq, seconds)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.size) * np.sqrt(np.mean(x ** 2) / 10 ** (snr_db / 10))
    return x + noise


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_tree(rng, n_features, max_depth, min_cover=1):
    """Random DecisionTree in pre-order with consistent integer covers."""
    from voxscreen.learn import DecisionTree

    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def grow(depth, n):
        node = len(feature)
        for arr in (feature, threshold, left, right, value, cover):
            arr.append(0)
        cover[node] = float(n)
        if depth >= max_depth or n < 2 * min_cover or rng.random() < 0.25:
            feature[node], left[node], right[node] = -1, -1, -1
            value[node] = float(rng.normal())
            return node
        feature[node] = int(rng.integers(n_features))
        threshold[node] = float(rng.uniform(-1, 1))
        n_left = int(rng.integers(min_cover, n - min_cover + 1))
        left[node] = grow(depth + 1, n_left)
        right[node] = grow(depth + 1, n - n_left)
        return node

    grow(0, int(rng.integers(8, 200)))
    return DecisionTree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                        np.array(value), np.array(cover))


def random_ensemble(rng, n_features=4, max_depth=3, max_trees=5):
    from voxscreen.learn import BOOSTED, FOREST, TreeEnsemble

    n_trees = int(rng.integers(1, max_trees + 1))
    trees = [random_tree(rng, n_features, max_depth) for _ in range(n_trees)]
    kind = FOREST if rng.random() < 0.5 else BOOSTED
    weights = np.ones(n_trees) if kind == FOREST else np.full(n_trees, rng.uniform(0.05, 1.0))
    return TreeEnsemble(trees, weights, float(rng.normal()) if kind == BOOSTED else 0.0, kind,
                        tuple(f"f{i}" for i in range(n_features)))


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
