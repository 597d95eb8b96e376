"""
SVG charts and the Markdown/HTML run report for the figures command

The CSV files are the canonical artifact; everything here is presentation.
"""
import io
import logging
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

import markdown
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from rates import RatePoint

logger = logging.getLogger(__name__)

# Fixed ids and no timestamp so identical data gives identical SVG bytes
plt.rcParams["svg.hashsalt"] = "dpsrate"
_SVG_METADATA = {"Date": None}

CURVE_NAMES = {
    "dps": "DPS-QKD",
    "bb84-poisson": "BB84, Poisson source",
    "bb84-single": "BB84, single photon source",
    "dps-seq": "DPS-QKD, sequential attack",
}


def _curves(rows: Sequence[RatePoint]) -> Dict[str, Tuple[List[float], List[float]]]:
    curves: Dict[str, Tuple[List[float], List[float]]] = OrderedDict()
    for row in rows:
        if row.rate <= 0:
            continue
        losses, values = curves.setdefault(row.label, ([], []))
        losses.append(row.loss_db)
        values.append(row.rate)
    return curves


def markup_comment(header: Sequence[str]) -> str:
    """Header lines as one ``<!-- -->`` block; '--' may not appear inside it"""
    if not header:
        return ""
    body = "\n".join(line.replace("--", "- -") for line in header)
    return f"<!--\n{body}\n-->\n"


def plot_rate_curves(rows: Sequence[RatePoint], path: str, title: str, header: Sequence[str] = ()) -> str:
    """Secure rate (log scale) against channel loss, one line per protocol

    ``header`` lines open the file as an XML comment. The XML declaration is
    dropped so that the comment comes first; UTF-8 is the XML default anyway.
    """
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, (losses, values) in _curves(rows).items():
        ax.semilogy(losses, values, label=CURVE_NAMES.get(label, label))
    ax.set_xlabel("Channel loss (dB)")
    ax.set_ylabel("Secure bits per pulse")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    svg = buffer.getvalue()
    if svg.startswith("<?xml"):
        svg = svg.split("\n", 1)[1]
    with open(path, "w", encoding="utf-8") as f:
        f.write(markup_comment(header) + svg)
    logger.info("wrote %s", path)
    return path


def md_to_html(md_text: str) -> str:
    """Convert markdown text to HTML"""
    return markdown.markdown(md_text, extensions=["tables", "fenced_code"])


def write_report(md_text: str, md_path: str, html_path: str, header: Sequence[str] = ()) -> None:
    """Write the run report as Markdown and as a standalone HTML page

    Both files open with ``header`` as an HTML comment.
    """
    comment = markup_comment(header)
    with open(md_path, "w", encoding="utf-8") as f:
        f.write(comment + md_text)
    body = md_to_html(md_text)
    with open(html_path, "w", encoding="utf-8") as f:
        f.write(comment)
        f.write("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>dpsrate report</title></head>\n")
        f.write(f"<body>\n{body}\n</body></html>\n")
    logger.info("wrote %s and %s", md_path, html_path)
