import csv
import io

from ihif.harness.metrics import ConfusionCounts, metrics
from ihif.harness.pipeline import Evaluation, ImageResult
from ihif.harness.report import bar_chart_svg, metrics_csv, per_image_csv, summary_text, write_report


def evaluation(counts=ConfusionCounts(1, 0, 1, 0)):
    rows = (
        ImageResult("a", "1.pgm", "pos", "a", -0.9, True, "TP"),
        ImageResult("x", "2.pgm", "neg", "a", -0.1, False, "TN"),
    )
    return Evaluation(counts, metrics(counts), rows)


def test_metrics_csv():
    rows = list(csv.reader(io.StringIO(metrics_csv(evaluation()))))
    assert rows[0] == ["quantity", "value"]
    assert dict(rows[1:])["sensitivity"] == "1.0"
    assert dict(rows[1:])["tp"] == "1"


def test_absent_rates_are_blank():
    ev = evaluation(ConfusionCounts(2, 0, 0, 0))
    table = dict(list(csv.reader(io.StringIO(metrics_csv(ev))))[1:])
    assert table["specificity"] == ""
    assert "specificity: absent" in summary_text(ev)


def test_per_image_csv():
    rows = list(csv.reader(io.StringIO(per_image_csv(evaluation()))))
    assert rows[1] == ["a", "1.pgm", "pos", "a", "-0.9", "true", "TP"]
    assert len(rows) == 3


def test_summary_text():
    text = summary_text(evaluation(), threshold=-0.5, metric="cosine")
    assert "TP=1 FP=0 TN=1 FN=0" in text
    assert "acceptance threshold: -0.5" in text
    assert "sensitivity: 100.00%" in text


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    ev = evaluation()
    root = ET.fromstring(bar_chart_svg([("run <1>", ev.metrics), ("b", ev.metrics)]))
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}rect")) >= 5


def test_write_report_is_repeatable(tmp_path):
    a = write_report(evaluation(), tmp_path / "a", svg=True)
    b = write_report(evaluation(), tmp_path / "b", svg=True)
    assert [p.name for p in a] == ["metrics.csv", "per_image.csv", "summary.txt", "metrics.svg"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
