# [Purpose] Renders markdown report sections to a PDF
# [Comment] Handles the subset the report writer produces: headings, paragraphs, bullet lists and pipe tables

from datetime import datetime, timezone
from pathlib import Path
from typing import List, Sequence

# [Library] fpdf2 - Lightweight PDF generation
# [Source] https://py-pdf.github.io/fpdf2/
from fpdf import FPDF

from src.config import settings
from src.utils.logger import get_logger

logger = get_logger(__name__)

# [Comment] Fixed creation date so that the same report gives the same bytes
CREATION_DATE = datetime(2000, 1, 1, tzinfo=timezone.utc)


def _table_rows(lines: Sequence[str]) -> List[List[str]]:
    rows = []
    for line in lines:
        cells = [c.strip() for c in line.strip().strip("|").split("|")]
        if all(set(c) <= {"-", ":"} for c in cells):
            continue
        rows.append(cells)
    return rows


def _ascii(text: str) -> str:
    """[Comment] Core PDF fonts are Latin-1 only"""
    return text.replace("±", "+-").replace("µ", "u").encode("latin-1", "replace").decode("latin-1")


def _write_table(pdf: FPDF, lines: Sequence[str]) -> None:
    rows = _table_rows(lines)
    if not rows:
        return
    width = (pdf.w - pdf.l_margin - pdf.r_margin) / len(rows[0])
    font_size = 8 if len(rows[0]) <= 6 else 6
    for k, row in enumerate(rows):
        pdf.set_font("Helvetica", "B" if k == 0 else "", font_size)
        for cell in row:
            pdf.cell(width, 5, _ascii(cell)[:28], border=1)
        pdf.ln(5)
    pdf.ln(2)


def build_report_pdf(file_path: Path, title: str, sections: Sequence[str]) -> Path:
    """
    [Purpose] Writes report sections (markdown text) into one PDF
    [Parameters]
    - file_path: output file, parent directories are created
    - title: heading of the first page
    - sections: markdown blocks as written to the markdown report
    [Returns] file_path
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    pdf = FPDF(orientation="L")
    pdf.set_creation_date(CREATION_DATE)
    pdf.set_title(title)
    pdf.set_creator(f"{settings.APP_NAME} {settings.APP_VERSION}")
    pdf.set_auto_page_break(auto=True, margin=14)
    pdf.add_page()
    pdf.set_font("Helvetica", "B", 16)
    pdf.cell(0, 10, _ascii(title), new_x="LMARGIN", new_y="NEXT")

    for section in sections:
        table: List[str] = []
        for line in section.splitlines() + [""]:
            if line.startswith("|"):
                table.append(line)
                continue
            if table:
                _write_table(pdf, table)
                table = []
            if line.startswith("#"):
                pdf.ln(2)
                pdf.set_font("Helvetica", "B", 13 if line.startswith("## ") else 11)
                pdf.cell(0, 8, _ascii(line.lstrip("#").strip()), new_x="LMARGIN", new_y="NEXT")
            elif line.strip():
                pdf.set_font("Helvetica", "", 10)
                pdf.multi_cell(0, 5, _ascii(line.replace("`", "")), new_x="LMARGIN", new_y="NEXT")

    pdf.output(str(file_path))
    logger.info(f"Report PDF saved to {file_path}")
    return file_path
