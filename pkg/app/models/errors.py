class SQKDError(Exception):
    """Base class for all laboratory errors"""


class ConfigurationError(SQKDError):
    """Invalid layout, parameter set, attack choice or attack/protocol pairing"""


class DimensionError(SQKDError):
    """Matrix or target dimensions disagree, or a state exceeds the memory budget"""


class NonUnitaryError(SQKDError):
    """A matrix failed the U^dagger U = I check"""


class InvalidStateError(SQKDError):
    """A state vector or density matrix violates its invariants"""


class NonBijectiveError(SQKDError):
    """A basis map is not a permutation"""


class DomainError(SQKDError):
    """A closed-form expression was evaluated outside its validity range"""


class EnumerationCapError(SQKDError):
    """An exhaustive enumeration would exceed the configured table cap"""


class InsufficientSamplesError(SQKDError):
    """Too few samples for an empirical estimate"""


class InsufficientBalancedBits(SQKDError):
    """The sifted string cannot supply the bits a selection rule needs"""
