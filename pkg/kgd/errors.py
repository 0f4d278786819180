"""Exception hierarchy shared by the kgd library, the CLI and the results store.

Each class carries a short ``prefix`` that the CLI prints in front of the message,
so different failure families stay distinguishable on stderr.
"""
from __future__ import annotations


class KgdError(Exception):
    prefix = "error"


class KgdInputError(KgdError, ValueError):
    prefix = "input error"


class KgdDimensionError(KgdInputError):
    prefix = "dimension mismatch"


class KgdNumericError(KgdError, ArithmeticError):
    prefix = "numeric error"


class LepskiiGridEmptyError(KgdNumericError):
    """Raised when the Lepskii cap removes every candidate iteration count."""


class KgdConfigError(KgdError, ValueError):
    prefix = "config error"


class KgdDataFileError(KgdError, OSError):
    prefix = "data file error"


class KgdResultsIOError(KgdError, OSError):
    prefix = "results I/O error"
