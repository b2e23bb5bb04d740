class MLError(Exception):
    pass


class EmptyDataset(MLError, ValueError):
    pass


class InvalidConfig(MLError, ValueError):
    pass


class Diverged(MLError, ArithmeticError):
    pass


class NotConverged(MLError):
    def __init__(self, max_passes):
        super().__init__(f"SMO did not converge within {max_passes} passes")
        self.max_passes = max_passes


class DimensionMismatch(MLError, ValueError):
    pass


class ShapeMismatch(MLError, ValueError):
    pass
