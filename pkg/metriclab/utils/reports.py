# metriclab/utils/reports.py
import csv
import io
import json
import logging
import math
from pathlib import Path

import numpy as np
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
SAMPLES_CSV = "samples.csv"
REPORT_PDF = "report.pdf"


def _clean(value):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def row_fields(rows: list[dict]) -> list[str]:
    """Union of row keys in first-seen order; ``index`` first, ``error`` last."""
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    ordered = [k for k in fields if k not in {"index", "error"}]
    if "index" in fields:
        ordered.insert(0, "index")
    if "error" in fields:
        ordered.append("error")
    return ordered


def samples_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    fields = row_fields(rows) or ["index"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([format_cell(row.get(k)) for k in fields])
    return buf.getvalue()


def report_json(report) -> str:
    return json.dumps(_clean(report.as_dict()), indent=2, sort_keys=False, ensure_ascii=False) + "\n"


def _build_report_pdf(report) -> bytes:
    """One-page summary; invariant mode keeps reruns byte-identical."""
    buf = io.BytesIO()
    title = f"metriclab: {report.config.experiment}"
    doc = SimpleDocTemplate(
        buf,
        pagesize=A4,
        leftMargin=36,
        rightMargin=36,
        topMargin=36,
        bottomMargin=36,
        title=title,
        invariant=1,
    )
    styles = getSampleStyleSheet()
    story = [
        Paragraph(title, styles["Title"]),
        Paragraph(f"Domain {report.config.spec}, degree cap {report.config.degree_cap}, "
                  f"version {report.version}", styles["Normal"]),
        Spacer(1, 12),
        Paragraph("Verdicts", styles["Heading2"]),
    ]

    data = [["Assertion", "Kind", "Observed", "Tolerance", "Result"]]
    for v in report.verdicts:
        data.append([
            v.name,
            v.kind,
            "" if v.observed is None else f"{v.observed:.6g}",
            f"{v.tolerance:.1e}",
            "pass" if v.passed else "FAIL",
        ])
    table = Table(data, colWidths=[170, 80, 100, 80, 60])
    table.setStyle(TableStyle([
        ("BACKGROUND", (0, 0), (-1, 0), colors.lightgrey),
        ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
        ("FONTNAME", (0, 0), (-1, -1), "Helvetica"),
        ("FONTSIZE", (0, 0), (-1, -1), 9),
        ("VALIGN", (0, 0), (-1, -1), "MIDDLE"),
    ]))
    story.append(table)
    story.append(Spacer(1, 16))

    story.append(Paragraph("Summary", styles["Heading2"]))
    scalars = [[k, f"{v:.10g}"] for k, v in report.summary.items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    if scalars:
        summary_table = Table(scalars, colWidths=[250, 200])
        summary_table.setStyle(TableStyle([
            ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
            ("FONTNAME", (0, 0), (-1, -1), "Helvetica"),
            ("FONTSIZE", (0, 0), (-1, -1), 9),
            ("ROWBACKGROUNDS", (0, 0), (-1, -1), [colors.white, colors.whitesmoke]),
        ]))
        story.append(summary_table)
    else:
        story.append(Paragraph("No scalar summary values.", styles["Normal"]))

    doc.build(story)
    return buf.getvalue()


def emit_report(report, out_dir, *, pdf: bool = False) -> list[Path]:
    """Write report.json and samples.csv (and report.pdf on request) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / REPORT_JSON
    json_path.write_text(report_json(report), encoding="utf-8")
    written.append(json_path)

    csv_path = out / SAMPLES_CSV
    csv_path.write_text(samples_csv(report.rows), encoding="utf-8")
    written.append(csv_path)

    if pdf:
        pdf_path = out / REPORT_PDF
        pdf_path.write_bytes(_build_report_pdf(report))
        written.append(pdf_path)

    logger.info("Wrote %s report file(s) to %s", len(written), out)
    return written
