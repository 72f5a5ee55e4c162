"""Exception types raised across the simulator."""


class XlsimError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(XlsimError):
    """Inconsistent or unsatisfiable configuration parameters."""


class DomainError(XlsimError):
    """Input outside the mathematical domain of an operation."""


class FramingError(XlsimError):
    """Sample stream does not align with whole OFDM symbols."""


class NoSyncError(XlsimError):
    """Synchronization peak metric below the detection threshold."""


class RankError(XlsimError):
    """Matrix too ill-conditioned to invert for the requested scheme."""


class SolverError(XlsimError):
    """Numerical solver failed (rank-deficient augmented system)."""


class IllPosedError(XlsimError):
    """Estimation problem is ill-posed (e.g. a zero pilot entry)."""
