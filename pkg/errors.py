"""
Exception family shared by the lattice, drive, analysis and CLI modules
"""


class RMDError(Exception):
    """Base class for every error raised by this toolkit"""


class InvalidArgumentError(RMDError, ValueError):
    """Shapes, sizes or values that violate an operation's preconditions"""


class ResourceLimitError(RMDError, MemoryError):
    """Requested structure would not fit in memory (e.g. block order > 30)"""


class UnreachableEnergyError(RMDError, ValueError):
    """Target energy density lies outside every calibrated range"""


class ConfigError(RMDError, ValueError):
    """Invalid experiment configuration or command-line usage"""


class AllRunsCensoredError(RMDError):
    """Every run of a command reached the step cap before thermalizing"""
