"""TEMB export of per-layer encoder hidden states."""

__version__ = "0.1.0"

from .container import ExportError, write_manifest, write_temb
from .export import ExportSpec, export, resolve_layer
