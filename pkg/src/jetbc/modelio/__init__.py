from .parser import ModelError, ModelSpec, load_model, parse_expression, parse_model
from .report import ReportDocument, build_report, from_json, render_report

__all__ = [
    "ModelError",
    "ModelSpec",
    "ReportDocument",
    "build_report",
    "from_json",
    "load_model",
    "parse_expression",
    "parse_model",
    "render_report",
]
