import json
import os

import pytest

from aeromec_figures.data import MissingColumnError, extract_figure_data, read_csv
from aeromec_figures.render import render

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "data")
GOLDEN = os.path.join(HERE, "golden")

FIGURES = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8"]


def _close(a, b, rel=1e-9):
    if isinstance(a, list):
        return len(a) == len(b) and all(_close(x, y, rel) for x, y in zip(a, b))
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b) <= rel * max(1.0, abs(a), abs(b))
    return a == b


@pytest.mark.parametrize("figure", FIGURES)
def test_golden_data_arrays(figure):
    data = extract_figure_data(figure, os.path.join(DATA, figure))
    with open(os.path.join(GOLDEN, f"{figure}.json")) as fh:
        golden = json.load(fh)
    assert set(data) == set(golden), (set(data) ^ set(golden))
    for key in golden:
        assert _close(data[key], golden[key]), f"{figure}:{key}"


@pytest.mark.parametrize("figure", FIGURES)
def test_render_writes_image(tmp_path, figure):
    out = tmp_path / f"{figure}.png"
    data = render(figure, os.path.join(DATA, figure), str(out))
    assert out.exists() and out.stat().st_size > 1000
    assert data  # the arrays fed to the plot are returned for inspection


def test_empty_csv_is_an_error_and_writes_nothing(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    (src / "report.csv").write_text("")
    out = tmp_path / "fig6.png"
    with pytest.raises(ValueError):
        render("fig6", str(src), str(out))
    assert not out.exists()


def test_missing_column_is_named(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    (src / "report.csv").write_text("task_bits,proposed_j\n1,2\n")
    with pytest.raises(MissingColumnError, match="fixed_schedule_j"):
        extract_figure_data("fig6", str(src))


def test_missing_input_file_is_an_error(tmp_path):
    with pytest.raises(FileNotFoundError):
        extract_figure_data("fig3", str(tmp_path))


def test_unknown_figure_rejected(tmp_path):
    with pytest.raises(ValueError):
        extract_figure_data("fig99", str(tmp_path))


def test_cli_errors_return_2(tmp_path):
    from aeromec_figures.render import main

    assert main(["--figure", "fig3", "--in", str(tmp_path), "--out",
                 str(tmp_path / "x.png")]) == 2


def test_read_csv_types(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1.5,robust\n2.5,non-robust\n")
    t = read_csv(str(p))
    assert t["a"] == [1.5, 2.5]
    assert t["b"] == ["robust", "non-robust"]
