"""Exception hierarchy shared by every pobo module."""


class PoboError(Exception):
    """Base class for all errors raised by pobo."""


class InputError(PoboError, ValueError):
    """Invalid argument: wrong shape, out-of-range index or parameter."""


class NumericError(PoboError, ArithmeticError):
    """A factorization or decomposition failed."""


class ContractError(PoboError):
    """A documented precondition of a theoretical result does not hold."""


class SchemaError(InputError):
    """A data file lacks a required column or field."""


class ParseError(InputError):
    """A data file holds a value that cannot be parsed.

    ``row`` is the 1-based data row (header excluded) when known.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
