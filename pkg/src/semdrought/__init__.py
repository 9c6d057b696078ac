"""Semantic sensor-data integration middleware for drought early warning.

Pipeline: heterogeneous observation payloads are aligned to a canonical
vocabulary, stored as triples, streamed through a complex-event engine
fused with indigenous-knowledge indicators, and disseminated as
drought-vulnerability bulletins over CLI and HTTP.
"""

__version__ = "0.1.0"

from .errors import SemDroughtError

__all__ = ["SemDroughtError", "__version__"]
