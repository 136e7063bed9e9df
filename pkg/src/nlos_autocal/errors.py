"""Exception hierarchy. Every error carries a short machine-readable code."""


class NlosError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationError(NlosError):
    """Bad inputs: violated invariants, dimension mismatches, unusable flags.

    The CLI maps these to exit status 2.
    """

    code = "validation"


class InvariantError(ValidationError):
    """A domain-type invariant was violated; names the offending field."""

    code = "invariant"

    def __init__(self, type_name, field, message):
        self.type_name = type_name
        self.field = field
        super().__init__(f"{type_name}.{field}: {message}")


class DimensionMismatchError(ValidationError):
    code = "dimension-mismatch"


class MissingFileError(ValidationError):
    code = "missing-file"


class SizeMismatchError(ValidationError):
    """On-disk byte length disagrees with the metadata in scene.json."""

    code = "size-mismatch"


class DegenerateGeometryError(NlosError):
    """A voxel center coincides with a scan/detection point (or an
    instrument leg collapsed); division by the falloff term would blow up."""

    code = "degenerate-geometry"


class GradientError(NlosError):
    """Non-finite gradient; names the parameter block it came from."""

    code = "gradient"


class BackendUnavailableError(NlosError):
    code = "backend-unavailable"
