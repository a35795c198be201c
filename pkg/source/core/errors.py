"""Exception hierarchy shared by every module.

Each error carries a `category` used by the command line to print
`error:<category>:<detail>` on stderr.
"""


class GsliftError(Exception):
    category = "internal"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# --------------------- Cloud files --------------------- #

class CloudFormatError(GsliftError):
    category = "format"


class HeaderError(CloudFormatError):
    """Magic bytes or primitive count unreadable."""


class TruncatedPayloadError(CloudFormatError):
    """Fewer payload bytes than the header announces."""


class VersionMismatchError(CloudFormatError):
    """Recognised family magic with an unsupported version."""


# --------------------- Numerical contracts --------------------- #

class DimensionError(GsliftError, ValueError):
    category = "dimension"


class DegenerateMaskError(GsliftError, ValueError):
    category = "mask"


class RankError(GsliftError, ValueError):
    category = "landmarks"


# --------------------- Priors --------------------- #

class TimestepRangeError(GsliftError, ValueError):
    category = "prior"


class InvalidPoseError(GsliftError, ValueError):
    category = "prior"


class MissingCameraError(GsliftError):
    category = "prior"


class OracleError(GsliftError):
    category = "prior"


class StageAborted(OracleError):
    """Raised by a stage when its oracle fails; carries the partial report."""

    def __init__(self, detail: str, report=None):
        super().__init__(detail)
        self.report = report


# --------------------- Configuration / IO --------------------- #

class ConfigError(GsliftError, ValueError):
    category = "config"


class DatasetError(GsliftError):
    category = "dataset"
