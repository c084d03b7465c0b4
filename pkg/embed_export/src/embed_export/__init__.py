"""One-shot frozen-encoder feature extraction to FMAT files."""

from .exporter import CorpusRow, Encoder, ExportError, export, load_corpus, mask_hash
from .fmat import write_fmat
from .manifest import ExportManifest, ManifestError

__version__ = "0.1.0"

__all__ = [
    "CorpusRow",
    "Encoder",
    "ExportError",
    "ExportManifest",
    "ManifestError",
    "export",
    "load_corpus",
    "mask_hash",
    "write_fmat",
    "__version__",
]
