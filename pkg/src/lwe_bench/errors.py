"""Exception types raised across the toolkit."""


class LweBenchError(Exception):
    """Base class for all toolkit errors."""


class InvalidModulus(LweBenchError, ValueError):
    pass


class InvalidDimension(LweBenchError, ValueError):
    pass


class InvalidOperands(LweBenchError, ValueError):
    pass


class InvalidSpec(LweBenchError, ValueError):
    pass


class InvalidBasis(LweBenchError, ValueError):
    pass


class InvalidShift(LweBenchError, ValueError):
    pass


class UnstableStatistics(LweBenchError, ValueError):
    pass


class BoundTooLarge(LweBenchError, ValueError):
    """The derived MitM error bound is not below q/8."""


class SearchBlowup(LweBenchError, RuntimeError):
    """Too many hash boundary positions to enumerate flips."""


class MemoryCapExceeded(LweBenchError, MemoryError):
    def __init__(self, estimate_bytes, cap_bytes):
        self.estimate_bytes = estimate_bytes
        self.cap_bytes = cap_bytes
        super().__init__(
            f"table needs ~{estimate_bytes / 1e9:.3g} GB, cap is {cap_bytes / 1e9:.3g} GB"
        )
