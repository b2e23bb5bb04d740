class MechanismError(Exception):
    """Base class for anything wrong with a mechanism file or its evaluation."""


class MechanismSyntaxError(MechanismError):
    def __init__(self, line, col, expected, found=None):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"line {line}, col {col}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnknownSpecies(MechanismError):
    def __init__(self, name, line):
        self.name = name
        self.line = line
        super().__init__(f"line {line}: unknown species {name!r}")


class UnknownElement(MechanismError):
    def __init__(self, name, line):
        self.name = name
        self.line = line
        super().__init__(f"line {line}: unknown element {name!r}")


class DuplicateSpecies(MechanismError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"duplicate species {name!r}")


class MissingThermo(MechanismError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"no THERMO record for species {name!r}")


class ElementImbalance(MechanismError):
    def __init__(self, index, element, line=None):
        self.index = index
        self.element = element
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"reaction {index}{where}: element {element} not balanced")


class TemperatureOutOfRange(MechanismError, ValueError):
    def __init__(self, T, t_min, t_max):
        self.T = T
        self.t_min = t_min
        self.t_max = t_max
        super().__init__(f"temperature {T} K outside [{t_min}, {t_max}] K")
