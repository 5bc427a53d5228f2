"""
Generador de documentos Word - Informe de backtesting de VaR
"""

import os
from pathlib import Path
from typing import Dict, Optional

try:
    from docx import Document
    from docx.enum.table import WD_TABLE_ALIGNMENT
    from docx.enum.text import WD_ALIGN_PARAGRAPH
    from docx.shared import Inches, Pt, RGBColor
    DOCX_AVAILABLE = True
except ImportError:
    DOCX_AVAILABLE = False

from config.settings import REPORT_FORMAT
from utils.errors import DataIOError
from utils.logger import get_logger

logger = get_logger("report_document")

MODEL_LABELS = {'psp': 'PSP', 'const_vol': 'Const. Vol', 'vix': 'VIX'}


def _fmt(value, digits: int = 4) -> str:
    if isinstance(value, str):
        return value
    return f"{value:.{digits}f}"


class BacktestDocumentGenerator:
    """Construye el informe .docx a partir del diccionario de un BacktestReport."""

    def __init__(self, formato: Optional[Dict] = None):
        if not DOCX_AVAILABLE:
            raise DataIOError("python-docx no está disponible. Instala con: pip install python-docx")
        self.formato_config = dict(REPORT_FORMAT)
        if formato:
            self.formato_config.update(formato)

    def generar(self, report: dict, path, run_info: Optional[dict] = None) -> Path:
        """Genera y guarda el documento; devuelve la ruta escrita."""
        doc = Document()
        self._configurar_documento(doc)
        self._crear_portada(doc, report, run_info or {})
        for key in sorted(report['coverage'], key=float):
            self._crear_seccion_nivel(doc, report, key)
        return self._guardar(doc, path)

    def _configurar_documento(self, doc):
        for section in doc.sections:
            section.top_margin = Inches(1)
            section.bottom_margin = Inches(1)
            section.left_margin = Inches(1)
            section.right_margin = Inches(1)
        style = doc.styles['Normal']
        style.font.name = self.formato_config['fuente_texto']
        style.font.size = Pt(self.formato_config['tamaño_texto'])
        style.font.color.rgb = RGBColor(0, 0, 0)

    def _titulo(self, doc, texto: str, size: int):
        p = doc.add_paragraph()
        p.alignment = WD_ALIGN_PARAGRAPH.CENTER
        run = p.add_run(texto)
        run.bold = True
        run.font.name = self.formato_config['fuente_titulo']
        run.font.size = Pt(size)
        return p

    def _crear_portada(self, doc, report: dict, run_info: dict):
        self._titulo(doc, self.formato_config['titulo'], 18)
        metodos = ", ".join(MODEL_LABELS.get(m, m) for m in report['methods'])
        doc.add_paragraph(f"Métodos: {metodos}")
        doc.add_paragraph(f"Días evaluados: {report['n_days']}")
        doc.add_paragraph(f"Error para Diebold-Mariano: {report.get('dm_error_kind', 'exceedance')}")
        for campo, valor in sorted(run_info.items()):
            doc.add_paragraph(f"{campo}: {valor}")

    def _tabla(self, doc, cabecera, filas):
        table = doc.add_table(rows=1, cols=len(cabecera))
        table.style = self.formato_config['estilo_tabla']
        table.alignment = WD_TABLE_ALIGNMENT.CENTER
        for celda, texto in zip(table.rows[0].cells, cabecera):
            celda.text = texto
            for run in celda.paragraphs[0].runs:
                run.bold = True
        for fila in filas:
            cells = table.add_row().cells
            for celda, texto in zip(cells, fila):
                celda.text = texto
        return table

    def _crear_seccion_nivel(self, doc, report: dict, key: str):
        doc.add_heading(f"Nivel de confianza {key}%", level=1)

        filas = []
        for metodo, res in report['coverage'][key].items():
            filas.append([MODEL_LABELS.get(metodo, metodo), _fmt(res['violation_rate']),
                          _fmt(res['uc']['stat'], 2), _fmt(res['uc']['p']),
                          _fmt(res['ind']['stat'], 2), _fmt(res['ind']['p']),
                          _fmt(res['cc']['stat'], 2), _fmt(res['cc']['p'])])
        doc.add_heading("Tests de cobertura", level=2)
        self._tabla(doc, ["Método", "Tasa", "UC", "p", "IND", "p", "CC", "p"], filas)

        doc.add_heading("Diebold-Mariano", level=2)
        dm = report['dm'][key]
        filas = [[MODEL_LABELS.get(a, a), MODEL_LABELS.get(b, b), _fmt(r['stat'], 3), _fmt(r['p'])]
                 for a, fila in dm.items() for b, r in fila.items()]
        self._tabla(doc, ["Método A", "Método B", "DM", "p"], filas)

        doc.add_heading("Ranking por penalizaciones", level=2)
        ranking = sorted(report['ranking'][key].items(), key=lambda item: (item[1]['rank'], item[0]))
        filas = [[MODEL_LABELS.get(m, m), _fmt(r['penalty']), _fmt(r['percentage'], 2), str(r['rank'])]
                 for m, r in ranking]
        self._tabla(doc, ["Método", "Penalización", "Porcentaje", "Rango"], filas)

    def _guardar(self, doc, path) -> Path:
        path = Path(path)
        if path.suffix.lower() != '.docx':
            path = path.with_suffix('.docx')
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            doc.save(str(path))
        except OSError as e:
            raise DataIOError(f"no se pudo guardar el documento {path}: {e}") from e
        if not os.path.exists(path) or os.path.getsize(path) == 0:
            raise DataIOError(f"el documento no se guardó correctamente: {path}")
        logger.info(f"Documento guardado exitosamente: {path}")
        return path


def write_backtest_docx(report: dict, path, run_info: Optional[dict] = None) -> Path:
    """Escribe el informe de backtesting como documento Word."""
    return BacktestDocumentGenerator().generar(report, path, run_info)
