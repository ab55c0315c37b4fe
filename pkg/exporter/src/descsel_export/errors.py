"""Exception taxonomy; the CLI maps these onto exit codes."""


class ExporterError(Exception):
    """Base class for descsel-export failures."""


class ConfigError(ExporterError):
    """Bad flags, templates, or environment configuration."""


class DataError(ExporterError):
    """Dataset folders, stores, or key lists that violate the contract."""


class LLMError(ExporterError):
    """The language-model endpoint returned an unusable response."""
