"""Acceptance criteria, one test each, every one printing a PASS/FAIL line."""

import time
from fractions import Fraction

import numpy as np

from conftest import ACCEPTANCE_LINES, brute_convolve_same
from ihif.errors import ModelFormatError
from ihif.features import ExtractionParams, build_vector, localize, per_image_L
from ihif.gabor import convolve_fft, make_bank
from ihif.harness.bss import bss_demo
from ihif.harness.metrics import ConfusionCounts, exact_rates, metrics
from ihif.harness.persistence import dumps, load_model, loads, save_model
from ihif.harness.pipeline import prepare_split, run_evaluation, run_training, train_on
from ihif.harness.report import write_report
from ihif.harness.synthetic import synthetic_config, texture_dataset, write_dataset
from ihif.ica import center, fastica_symmetric, whiten, whitening_error


def verdict(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_confusion_rates_exact():
    c = ConfusionCounts(tp=199, fp=0, tn=200, fn=1)
    exact = exact_rates(c)
    m = metrics(c)
    want = {"sensitivity": Fraction(995, 1000), "specificity": Fraction(1),
            "false_positive_rate": Fraction(0), "false_negative_rate": Fraction(5, 1000),
            "accuracy": Fraction(9975, 10000)}
    ok = exact == want and all(abs(getattr(m, k) - float(v)) < 1e-12 for k, v in want.items())
    verdict("confusion rates", ok,
            f"sensitivity={m.sensitivity} specificity={m.specificity} accuracy={m.accuracy}")


def test_gabor_dc_free():
    t = time.perf_counter()
    bank = make_bank()
    ratios = [abs(k.sum()) / np.abs(k).max() for k in bank.kernels]
    elapsed = time.perf_counter() - t
    ok = len(ratios) == 40 and max(ratios) < 1e-6 and elapsed < 1.0
    verdict("gabor DC-free", ok, f"worst |sum|/max = {max(ratios):.3g} over {len(ratios)} kernels "
                                 f"in {elapsed:.2f}s")


def test_fft_matches_brute_force():
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        h, w = rng.integers(1, 17, 2)
        kh, kw = rng.integers(1, 8, 2)
        img = rng.random((h, w))
        kernel = rng.standard_normal((kh, kw)) + 1j * rng.standard_normal((kh, kw))
        worst = max(worst, float(np.abs(convolve_fft(img, kernel) - brute_convolve_same(img, kernel)).max()))
    elapsed = time.perf_counter() - t
    verdict("FFT convolution", worst < 1e-8 and elapsed < 5.0,
            f"50 cases, worst entry error {worst:.3g} in {elapsed:.2f}s")


def test_feature_hand_trace():
    resp = np.arange(1, 17, dtype=np.float64).reshape(4, 4)
    rf = localize(resp, ExtractionParams(block_size=2, threshold=3))
    gl = per_image_L(rf)
    vec = build_vector(rf, gl).tolist()
    ok = vec == [8.5, 8.5, 14.0, 16.0] and gl.lengths.tolist() == [1]
    verdict("feature hand trace", ok, f"vector {vec}, L = {gl.lengths.tolist()[0]}")


def test_whitening_identity_covariance():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        dim = int(rng.integers(1, 11))
        n = int(rng.integers(100, 400))
        X = rng.standard_normal((dim, dim)) @ rng.standard_normal((dim, n)) + rng.normal(size=(dim, 1))
        Z, _ = whiten(center(X)[0])
        worst = max(worst, whitening_error(Z))
    verdict("whitening", worst < 1e-8, f"20 datasets, worst ||cov(Z) - I||_F = {worst:.3g}")


def test_symmetric_orthonormality_every_sweep():
    rng = np.random.default_rng(12)
    worst, sweeps = 0.0, 0
    for n_src in (2, 3, 4, 6):
        S = np.concatenate([rng.uniform(-1.7, 1.7, (n_src // 2, 3000)),
                            rng.laplace(0, 0.7, (n_src - n_src // 2, 3000))])
        Z, _ = whiten(center(rng.standard_normal((n_src, n_src)) @ S)[0])

        def track(_, W):
            nonlocal worst, sweeps
            sweeps += 1
            worst = max(worst, float(np.linalg.norm(W @ W.T - np.eye(W.shape[0]))))

        fastica_symmetric(Z, n_src, seed=n_src, callback=track)
    verdict("FastICA orthonormality", sweeps > 0 and worst < 1e-8,
            f"{sweeps} sweeps, worst ||W W^T - I||_F = {worst:.3g}")


def test_bss_recovery():
    t = time.perf_counter()
    tallies = {}
    for n in (2, 3, 4):
        tallies[n] = sum(bss_demo(n, 10_000, seed).amari < 0.05 for seed in range(20))
    elapsed = time.perf_counter() - t
    ok = all(v >= 19 for v in tallies.values()) and elapsed < 30.0
    detail = ", ".join(f"{n} sources {v}/20" for n, v in tallies.items())
    verdict("BSS recovery", ok, f"{detail} below 0.05 in {elapsed:.1f}s")


def test_end_to_end_synthetic_recognition():
    t = time.perf_counter()
    data = texture_dataset(n_subjects=4, images_per_subject=6, n_impostors=4, seed=0)
    cfg = synthetic_config(data, metric="cosine")
    train, pos, neg = prepare_split(cfg, data)
    ev = run_evaluation(train_on(train, cfg), pos, neg)
    elapsed = time.perf_counter() - t
    m = ev.metrics
    ok = (len(train), len(pos), len(neg)) == (20, 4, 4) and m.sensitivity == 1.0 \
        and m.specificity == 1.0 and elapsed < 60.0
    verdict("end-to-end synthetic", ok,
            f"sensitivity={m.sensitivity} specificity={m.specificity} ({ev.counts}) in {elapsed:.1f}s")


def full_run(cfg, out):
    bundle = run_training(cfg)
    save_model(bundle, out / "model.ihif")
    _, pos, neg = prepare_split(cfg)
    ev = run_evaluation(bundle, pos, neg)
    return write_report(ev, out / "report", threshold=bundle.classes.threshold,
                        metric=bundle.classes.metric, svg=True) + [out / "model.ihif"]


def test_determinism(tmp_path):
    data = texture_dataset(seed=1)
    root = write_dataset(data, tmp_path / "images")
    cfg = synthetic_config(data, seed=1, dataset_root=root)
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = full_run(cfg, tmp_path / "a")
    b = full_run(cfg, tmp_path / "b")
    same = [pa.read_bytes() == pb.read_bytes() for pa, pb in zip(a, b)]
    verdict("determinism", len(a) == len(b) == 5 and all(same),
            f"{sum(same)}/{len(same)} files byte-identical ({', '.join(p.name for p in a)})")


def test_persistence(synth_bundle, tmp_path):
    path = tmp_path / "m.ihif"
    save_model(synth_bundle, path)
    back = load_model(path)
    pairs = [
        (synth_bundle.lengths.lengths.astype(np.float64), back.lengths.lengths.astype(np.float64)),
        (synth_bundle.ica.whitening.mean, back.ica.whitening.mean),
        (synth_bundle.ica.whitening.eigvecs, back.ica.whitening.eigvecs),
        (synth_bundle.ica.whitening.eigvals, back.ica.whitening.eigvals),
        (synth_bundle.ica.unmixing, back.ica.unmixing),
        (synth_bundle.classes.means, back.classes.means),
        (np.array([synth_bundle.classes.threshold]), np.array([back.classes.threshold])),
    ]
    exact = all(a.shape == b.shape and a.tobytes() == b.tobytes() for a, b in pairs)
    data = bytearray(dumps(synth_bundle))
    missed = []
    for pos in range(len(data)):
        data[pos] ^= 0xA5
        try:
            loads(bytes(data))
            missed.append(pos)
        except ModelFormatError:
            pass
        data[pos] ^= 0xA5
    verdict("persistence", exact and not missed,
            f"arrays bit-exact: {exact}; corruption detected at {len(data) - len(missed)}/{len(data)} "
            f"byte offsets")
