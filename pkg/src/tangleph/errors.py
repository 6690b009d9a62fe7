"""Exception types shared across the package.

Every error raised by library code derives from PipelineError so the CLI can
map failures onto exit codes without pattern-matching message strings.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PipelineError):
    """Malformed input file. Carries the offending path/line when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)


class ParameterError(PipelineError, ValueError):
    """Invalid argument value (empty input, bad scale, unsupported p, ...)."""


class AnnotationError(PipelineError):
    """Missing or inconsistent backbone annotation."""


class UnknownPairError(PipelineError):
    """A persistence pair that is not part of the given diagram."""


class IdCollisionError(PipelineError):
    """Duplicate structure ids where unique ids are required."""


class ConnectivityError(PipelineError):
    """Neighborhood graph is disconnected; lists the components found."""

    def __init__(self, components: list[list[str]]):
        self.components = components
        parts = "; ".join("{" + ", ".join(c) + "}" for c in components)
        super().__init__(
            f"neighborhood graph has {len(components)} connected components: {parts}"
        )


class DegenerateGeometryError(PipelineError):
    """Embedding dimension not supported by the data (non-positive eigenvalue)."""


class NormalizationError(PipelineError):
    """Similarity values outside the expected [0, 1] range."""


class SilhouetteUndefinedError(PipelineError):
    """Silhouette requested for a labeling with fewer than two clusters."""


class NoSuchLayerError(PipelineError):
    """Landscape layer index beyond the depth of the landscape."""


class ConfigError(PipelineError):
    """Bad configuration file or command-line parameter combination."""


class StructureFailuresError(PipelineError):
    """One or more structures failed during a batch step; others completed."""

    def __init__(self, failures: dict[str, str]):
        self.failures = failures
        detail = "; ".join(f"{sid}: {msg}" for sid, msg in sorted(failures.items()))
        super().__init__(f"{len(failures)} structure(s) failed: {detail}")
