"""Exception types shared by the lab modules.

Every error carries a short machine code so the CLI can report failures
without parsing messages.
"""


class LabError(Exception):
    code = "lab-error"


class InvalidArgument(LabError, ValueError):
    code = "invalid-argument"


class UnsupportedClass(LabError):
    code = "unsupported-class"


class UnsupportedPotential(LabError):
    code = "unsupported-potential"


class PotentialOverflow(LabError, OverflowError):
    code = "overflow"


class NearSpectrum(LabError):
    code = "near-spectrum"

    def __init__(self, z, message=None):
        self.z = complex(z)
        super().__init__(message or f"z = {self.z!r} is numerically on the spectrum")


class ContourCollision(LabError):
    code = "contour-collision"


class OracleUnavailable(LabError):
    code = "oracle-unavailable"


class RadiusCollision(LabError):
    code = "radius-collision"

    def __init__(self, message, suggested_radius=None):
        self.suggested_radius = suggested_radius
        super().__init__(message)


class GapTooSmall(LabError):
    code = "gap-too-small"


class UnsupportedStructure(LabError):
    code = "unsupported-structure"


class BilinearDegenerate(LabError):
    code = "bilinear-degenerate"


class NormalizationImpossible(LabError):
    code = "normalization-impossible"


class WindowViolation(LabError):
    code = "window-violation"


class ConfigError(LabError):
    code = "config-error"

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
