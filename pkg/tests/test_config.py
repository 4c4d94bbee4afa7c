import math
from pathlib import Path

import pytest

from ihif.errors import DataError
from ihif.gabor import GaborParams
from ihif.harness.config import (
    KNOWN_KEYS,
    ExperimentConfig,
    build_config,
    dump_config,
    load_config,
    parse_assignments,
)


def test_defaults():
    cfg = ExperimentConfig()
    assert (cfg.width, cfg.height) == (92, 112)
    assert cfg.gabor == GaborParams()
    assert cfg.extraction.block_size == 4 and cfg.extraction.threshold == 3.0
    assert cfg.ica.n_ics is None and cfg.ica.tol == 1e-10 and cfg.ica.seed == 0
    assert cfg.metric == "cosine"
    assert cfg.split.seed == 0 and cfg.split.train_per_subject == 5


def test_parse_ignores_comments_and_blanks():
    values = parse_assignments(["# comment", "", "  gabor.sigma = 6.283185307179586  ", "ica.n_ics=auto"])
    assert values == {"gabor.sigma": "6.283185307179586", "ica.n_ics": "auto"}


@pytest.mark.parametrize("line", ["gabor.sigma", "nonsense.key = 1", " = 3"])
def test_parse_errors(line):
    with pytest.raises(DataError):
        parse_assignments([line])


@pytest.mark.parametrize("key,value", [("ica.n_ics", "many"), ("gabor.kernel_size", "32"),
                                       ("classifier.metric", "hamming"), ("ica.strict", "maybe"),
                                       ("features.block_size", "0")])
def test_bad_values(key, value):
    with pytest.raises(DataError):
        build_config({key: value})


def test_every_key_parses_and_roundtrips(tmp_path):
    cfg = build_config({
        "dataset.root": "faces",
        "dataset.width": "40",
        "dataset.height": "50",
        "split.seed": "7",
        "split.train_per_subject": "3",
        "split.impostors": "x1, x2",
        "gabor.sigma": "3.5",
        "gabor.n_scales": "2",
        "features.block_size": "2",
        "features.threshold": "1.5",
        "ica.n_ics": "4",
        "ica.tol": "1e-8",
        "ica.max_iter": "50",
        "ica.eigen_floor": "1e-12",
        "ica.seed": "3",
        "ica.strict": "true",
        "classifier.metric": "l2",
    })
    assert cfg.split.impostor_subjects == ("x1", "x2")
    assert cfg.ica.strict is True and cfg.ica.eigen_floor == 1e-12
    text = dump_config(cfg)
    assert {line.split(" = ")[0] for line in text.splitlines()} == set(KNOWN_KEYS)
    path = tmp_path / "c.cfg"
    path.write_text(text)
    again = load_config(path)
    assert again.dataset_root == tmp_path / "faces"
    assert again == build_config({"dataset.root": str(tmp_path / "faces")}, base=cfg)


def test_dump_of_defaults_reloads_identically(tmp_path):
    path = tmp_path / "d.cfg"
    path.write_text(dump_config(ExperimentConfig()))
    assert load_config(path) == ExperimentConfig()
    assert "gabor.sigma = 6.283185307179586" in path.read_text()


def test_auto_kernel_size_follows_other_gabor_keys():
    cfg = build_config({"gabor.n_scales": "1"})
    assert cfg.gabor.kernel_size == GaborParams(n_scales=1).kernel_size
    fixed = build_config({"gabor.kernel_size": "31"})
    assert build_config({"gabor.sigma": "3"}, base=fixed).gabor.kernel_size == 31


def test_overrides_win(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("features.block_size = 4\nclassifier.metric = cosine\n")
    cfg = load_config(path, {"features.block_size": "2", "classifier.metric": "l2"})
    assert cfg.extraction.block_size == 2 and cfg.metric == "l2"


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_config(tmp_path / "none.cfg")


def test_absolute_root_kept(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(f"dataset.root = {Path('/data/faces')}\n")
    assert load_config(path).dataset_root == Path("/data/faces")


def test_sigma_literal():
    assert build_config({"gabor.sigma": "6.283185307179586"}).gabor.sigma == 2 * math.pi
