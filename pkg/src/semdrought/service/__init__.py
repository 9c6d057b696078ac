"""Operational shell: configuration, pipeline wiring, replay, HTTP and CLI."""

from .config import Config, InvalidConfigError, NotFoundError, load_config
from .pipeline import Pipeline, ReplaySummary, UnknownRegionError

__all__ = [
    "Config", "InvalidConfigError", "NotFoundError", "Pipeline",
    "ReplaySummary", "UnknownRegionError", "load_config",
]
