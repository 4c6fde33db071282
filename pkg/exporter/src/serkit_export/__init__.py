"""Checkpoint conversion into serkit tensor archives + parity fixtures."""

from .export import ExportError, ExportSpec, export, export_model
from .fixture import FIXTURE_SEED, make_fixture, tiny_model

__version__ = "0.1.0"
