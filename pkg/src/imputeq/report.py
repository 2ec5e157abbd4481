"""Report emission: canonical JSON documents and an SVG quality chart.

JSON is the machine-readable record; the SVG is derived presentation.  Both
are rendered with stable formatting so a seeded run writes byte-identical
files every time.
"""

from __future__ import annotations

import json
import os
import tempfile
from xml.sax.saxutils import escape

from .table import Table

QUALITY_FORMAT = "imputeq-quality-records"
AUDIT_FORMAT = "imputeq-audit"
DOC_SCHEMA_VERSION = 1

# chart geometry (px)
AXIS_LEN = 480.0
BAR_HEIGHT = 18
BAR_GAP = 8
MARGIN_LEFT = 150
MARGIN_RIGHT = 30
MARGIN_TOP = 34
MARGIN_BOTTOM = 42

COLOR_COMPLETENESS = "#1f77b4"  # blue: observed fraction
COLOR_IMPUTATION = "#ff7f0e"  # orange: recovered fraction
COLOR_FALLBACK_NAME = "#d62728"  # red: feature forced onto random sampling
COLOR_NAME = "#333333"
COLOR_AXIS = "#666666"


def write_bytes_atomic(path: str, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    half-written file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".imputeq-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_canonical(doc) -> bytes:
    text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False)
    return (text + "\n").encode("utf-8")


def column_summary(t: Table) -> list[dict]:
    return [
        {
            "name": c.name,
            "kind": c.kind.value if c.kind is not None else None,
            "n_missing": c.n_missing(),
            "missing_fraction": (
                c.n_missing() / c.n_rows if c.n_rows else 0.0
            ),
        }
        for c in t.columns
    ]


def quality_document(
    records_jsonable: list[dict],
    threshold: float | None = None,
    columns: list[dict] | None = None,
) -> dict:
    doc = {
        "format": QUALITY_FORMAT,
        "schema_version": DOC_SCHEMA_VERSION,
        "threshold": threshold,
        "records": records_jsonable,
    }
    if columns is not None:
        doc["columns"] = columns
    return doc


def audit_document(reports_jsonable: list[dict]) -> dict:
    return {
        "format": AUDIT_FORMAT,
        "schema_version": DOC_SCHEMA_VERSION,
        "lower_is_better": True,
        "reports": reports_jsonable,
    }


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _chosen_std(record: dict) -> float:
    for entry in record.get("imputers", []):
        if entry["id"] == record.get("chosen_imputer"):
            return float(entry.get("delta_std") or 0.0)
    return 0.0


def emit_quality_svg(
    records_jsonable: list[dict], threshold: float | None = None
) -> bytes:
    """Horizontal stacked bars, one per feature, sorted by descending omega.

    Blue encodes completeness mu, orange the recovered portion (1-mu)*delta,
    so the stack length is the quality omega.  A whisker marks the fold-std
    spread, a dashed line the keep/drop threshold, and features that fell
    back to random sampling get their name drawn in red.
    """
    records = sorted(
        records_jsonable,
        key=lambda r: (-float(r["omega"]), str(r["feature"])),
    )
    n = len(records)
    width = MARGIN_LEFT + AXIS_LEN + MARGIN_RIGHT
    rows_h = n * (BAR_HEIGHT + BAR_GAP)
    height = MARGIN_TOP + rows_h + MARGIN_BOTTOM
    x0 = MARGIN_LEFT
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<text x="{x0:g}" y="20" font-family="sans-serif" font-size="14" '
        f'fill="{COLOR_NAME}">Feature quality: completeness + recovered '
        "portion (longer is better)</text>",
    ]

    for i, rec in enumerate(records):
        mu = float(rec["completeness"])
        delta = float(rec["delta"])
        omega = float(rec["omega"])
        y = MARGIN_TOP + i * (BAR_HEIGHT + BAR_GAP)
        w_mu = mu * AXIS_LEN
        w_delta = (1.0 - mu) * delta * AXIS_LEN
        cy = y + BAR_HEIGHT / 2.0
        name_fill = (
            COLOR_FALLBACK_NAME if rec.get("fallback_used") else COLOR_NAME
        )
        parts.append('<g class="feature-row">')
        parts.append(
            f'<text class="feature-name" x="{x0 - 8:g}" y="{cy + 4:.2f}" '
            f'text-anchor="end" font-family="sans-serif" font-size="12" '
            f'fill="{name_fill}">{escape(str(rec["feature"]))}</text>'
        )
        if w_mu > 0:
            parts.append(
                f'<rect class="mu-bar" x="{_fmt(x0)}" y="{_fmt(y)}" '
                f'width="{_fmt(w_mu)}" height="{BAR_HEIGHT}" '
                f'fill="{COLOR_COMPLETENESS}"/>'
            )
        if w_delta > 0:
            parts.append(
                f'<rect class="delta-bar" x="{_fmt(x0 + w_mu)}" '
                f'y="{_fmt(y)}" width="{_fmt(w_delta)}" '
                f'height="{BAR_HEIGHT}" fill="{COLOR_IMPUTATION}"/>'
            )
        half = (1.0 - mu) * _chosen_std(rec) * AXIS_LEN
        if half > 0:
            lo = max(x0, x0 + omega * AXIS_LEN - half)
            hi = min(x0 + AXIS_LEN, x0 + omega * AXIS_LEN + half)
            parts.append(
                f'<line class="whisker" x1="{_fmt(lo)}" y1="{_fmt(cy)}" '
                f'x2="{_fmt(hi)}" y2="{_fmt(cy)}" stroke="{COLOR_NAME}" '
                f'stroke-width="1"/>'
            )
            for xw in (lo, hi):
                parts.append(
                    f'<line x1="{_fmt(xw)}" y1="{_fmt(cy - 4)}" '
                    f'x2="{_fmt(xw)}" y2="{_fmt(cy + 4)}" '
                    f'stroke="{COLOR_NAME}" stroke-width="1"/>'
                )
        parts.append("</g>")

    axis_y = MARGIN_TOP + rows_h + 8
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(axis_y)}" '
        f'x2="{_fmt(x0 + AXIS_LEN)}" y2="{_fmt(axis_y)}" '
        f'stroke="{COLOR_AXIS}" stroke-width="1"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xt = x0 + frac * AXIS_LEN
        parts.append(
            f'<line x1="{_fmt(xt)}" y1="{_fmt(axis_y)}" x2="{_fmt(xt)}" '
            f'y2="{_fmt(axis_y + 5)}" stroke="{COLOR_AXIS}" '
            f'stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(xt)}" y="{_fmt(axis_y + 18)}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11" '
            f'fill="{COLOR_AXIS}">{frac:g}</text>'
        )

    if threshold is not None:
        xt = x0 + float(threshold) * AXIS_LEN
        parts.append(
            f'<line class="threshold" x1="{_fmt(xt)}" '
            f'y1="{_fmt(MARGIN_TOP - 6)}" x2="{_fmt(xt)}" '
            f'y2="{_fmt(axis_y)}" stroke="{COLOR_NAME}" stroke-width="1" '
            f'stroke-dasharray="5,3"/>'
        )

    parts.append("</svg>")
    return "\n".join(parts).encode("utf-8")


def quality_summary_text(records_jsonable: list[dict]) -> str:
    """Human-oriented digest printed by the report command."""
    lines = []
    ordered = sorted(
        records_jsonable,
        key=lambda r: (-float(r["omega"]), str(r["feature"])),
    )
    for r in ordered:
        flags = []
        if not r.get("kept", True):
            flags.append("drop")
        if r.get("fallback_used"):
            flags.append("fallback")
        suffix = f" [{', '.join(flags)}]" if flags else ""
        lines.append(
            f"{r['feature']}: omega={float(r['omega']):.3f} "
            f"mu={float(r['completeness']):.3f} "
            f"delta={float(r['delta']):.3f} "
            f"imputer={r['chosen_imputer']}{suffix}"
        )
    kept = sum(1 for r in records_jsonable if r.get("kept", True))
    lines.append(f"{kept}/{len(records_jsonable)} features kept")
    return "\n".join(lines)
