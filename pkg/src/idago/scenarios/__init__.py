"""Scenario documents, built-in reproductions and the baseline sweep."""

from .baselines import METHODS, BaselineReport, BaselineRow, run_baselines
from .builtin import NAMES, builtin, builtin_document
from .config import ScenarioConfig, Sweep, document_from_models, from_document, load, save, schema

__all__ = [
    "METHODS", "BaselineReport", "BaselineRow", "run_baselines", "NAMES", "builtin", "builtin_document",
    "ScenarioConfig", "Sweep", "document_from_models", "from_document", "load", "save", "schema",
]
