"""Exception hierarchy.

Each error carries the process exit code the ``vcc`` command maps it to:
2 input error, 3 provider auth/availability, 4 data-contract violation,
5 replay fixture miss.
"""


class VccError(Exception):
    exit_code = 1


class InputError(VccError):
    exit_code = 2


class UnsupportedLanguage(InputError):
    pass


class ParseFailure(InputError):
    pass


class EmptyInput(InputError):
    pass


class EmptyGroundTruth(InputError):
    pass


class EmptyQuerySet(InputError):
    pass


class ProviderUnavailable(VccError):
    exit_code = 3


class DataContractError(VccError):
    exit_code = 4


class DimensionMismatch(DataContractError):
    pass


class DuplicateId(DataContractError):
    pass


class ZeroVector(DataContractError):
    pass


class EmptyText(DataContractError):
    pass


class UnparseableClone(DataContractError):
    pass


class IndistinctClone(DataContractError):
    pass


class FixtureMiss(VccError):
    exit_code = 5

    def __init__(self, digests):
        if isinstance(digests, str):
            digests = [digests]
        self.digests = list(digests)
        super().__init__("replay fixture has no response for prompt digest(s): " + ", ".join(self.digests))
