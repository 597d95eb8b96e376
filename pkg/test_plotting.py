"""
Tests for chart and report rendering
"""
from model import ProtocolKind, SourceKind
from plotting import markup_comment, md_to_html, plot_rate_curves, write_report
from rates import RatePoint


def _row(loss_db, rate, protocol=ProtocolKind.DPS, source_kind=SourceKind.POISSON):
    return RatePoint(loss_db=loss_db, transmission=10 ** (-loss_db / 10), nbar=0.23, p_click=0.01,
                     qber=0.01, rate=rate, protocol=protocol, source_kind=source_kind)


def test_plot_is_reproducible(tmp_path):
    rows = [_row(0.0, 0.1), _row(10.0, 0.01), _row(20.0, 0.0),
            _row(0.0, 0.5, ProtocolKind.BB84, SourceKind.SINGLE_PHOTON),
            _row(10.0, 0.05, ProtocolKind.BB84, SourceKind.SINGLE_PHOTON)]
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_rate_curves(rows, str(first), "rates")
    plot_rate_curves(rows, str(second), "rates")
    assert first.read_bytes() == second.read_bytes()
    text = first.read_text()
    assert "<svg" in text
    assert "BB84, single photon source" in text


def test_md_to_html_renders_tables():
    html = md_to_html("| a | b |\n|---|---|\n| 1 | 2 |\n")
    assert "<table>" in html
    assert "<td>1</td>" in html


def test_write_report(tmp_path):
    md_path, html_path = tmp_path / "report.md", tmp_path / "report.html"
    write_report("# Title\n\ntext\n", str(md_path), str(html_path))
    assert md_path.read_text() == "# Title\n\ntext\n"
    html = html_path.read_text()
    assert html.startswith("<!DOCTYPE html>")
    assert "<h1>Title</h1>" in html


def test_header_comment_opens_every_file(tmp_path):
    header = ["# dpsrate 0.1.0 figures", "# f_ec=None", "# columns: loss_db,rate"]
    svg = tmp_path / "rates.svg"
    plot_rate_curves([_row(0.0, 0.1), _row(10.0, 0.01)], str(svg), "rates", header=header)
    md_path, html_path = tmp_path / "report.md", tmp_path / "report.html"
    write_report("# Title\n", str(md_path), str(html_path), header=header)
    for path in (svg, md_path, html_path):
        text = path.read_text()
        assert text.startswith("<!--\n# dpsrate 0.1.0 figures\n# f_ec=None\n# columns: loss_db,rate\n-->\n"), path
    assert "<svg" in svg.read_text()
    assert "<?xml" not in svg.read_text()
    assert "<!DOCTYPE html>" in html_path.read_text()


def test_markup_comment_escapes_double_hyphen():
    assert markup_comment(["# out=a--b"]) == "<!--\n# out=a- -b\n-->\n"
    assert markup_comment([]) == ""
