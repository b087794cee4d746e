"""Exception hierarchy shared by the library and the command line."""


class DuctWarpError(Exception):
    pass


class InputError(DuctWarpError, ValueError):
    """Bad user input: files, parameters, invariant violations."""


class NumericalError(DuctWarpError, RuntimeError):
    """A computation could not produce a meaningful result."""


class CutoffError(NumericalError):
    """The requested mode is not trapped at the requested frequency."""


class NoModesError(NumericalError):
    pass
