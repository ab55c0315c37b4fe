"""Companion exporter for descsel embedding stores.

descsel itself never decodes an image or calls a model; it consumes
store directories. This package produces those directories: it encodes
image folders, classname prompts and description pools with a real or
deterministic encoder, renders sparse pair-embedding tables for the
keys a selection actually needs, and builds contrastive description
pools by prompting an LLM about commonly confused class pairs.

The two packages share only the on-disk store format and the descsel
command line; there is no import dependency in either direction.
"""
from .errors import ConfigError, DataError, ExporterError, LLMError

__all__ = ["ConfigError", "DataError", "ExporterError", "LLMError"]
__version__ = "0.1.0"
