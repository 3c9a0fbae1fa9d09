class InvalidInputError(Exception):
    """Exception raised when the given input is not valid."""

    def __init__(
        self,
        input_name: str,
        input_value,
        message: str = "Incorrect input",
    ):
        self.input_name = input_name
        self.input_value = input_value
        self.message = message
        super().__init__(self.message)


class DatasetValidationError(Exception):
    """Exception raised when a data file fails validation. Carries one diagnostic per offending line."""

    def __init__(
        self,
        path: str,
        diagnostics: list[str],
        message: str = "",
    ):
        self.path = path
        self.diagnostics = diagnostics
        self.message = message or (
            f"Invalid data file {path}:\n" + "\n".join(diagnostics)
        )
        super().__init__(self.message)


class ConfigurationError(Exception):
    """Exception raised when parameters don't match the quality scheme they are used with."""

    def __init__(
        self,
        expected: int,
        actual: int,
        message: str = "",
    ):
        self.expected = expected
        self.actual = actual
        self.message = (
            message
            or f"Parameter dimension mismatch: expected {expected}, got {actual}."
        )
        super().__init__(self.message)


class ModeNotFoundError(Exception):
    """Exception raised when the inner solver for the random effects mode doesn't converge."""

    def __init__(
        self,
        iterations: int,
        grad_norm: float,
        b_last,
        coordinate: str | None = None,
        message: str = "",
    ):
        self.iterations = iterations
        self.grad_norm = grad_norm
        self.b_last = b_last
        self.coordinate = coordinate
        self.message = (
            message
            or f"Random effects mode not found after {iterations} iterations (gradient norm {grad_norm:.3e})."
        )
        if coordinate is not None:
            self.message += f" Failed while perturbing {coordinate}."
        super().__init__(self.message)


class NumericalError(Exception):
    """Exception raised on numerical failures: non positive-definite matrices, singular systems, degenerate weights."""

    def __init__(
        self,
        message: str,
        diagnostics: dict | None = None,
    ):
        self.message = message
        self.diagnostics = diagnostics or {}
        super().__init__(self.message)


class BoundaryError(Exception):
    """Exception raised when the likelihood has no finite maximizer and a parameter runs off to the boundary."""

    def __init__(
        self,
        parameter: str,
        value: float,
        message: str = "",
    ):
        self.parameter = parameter
        self.value = value
        self.message = (
            message
            or f"No finite MLE: {parameter} diverges towards the boundary (last value {value})."
        )
        super().__init__(self.message)


class OutOfRegimeError(Exception):
    """Exception raised when a Poisson rate is too large for the model to be meaningful."""

    def __init__(
        self,
        rate: float,
        message: str = "",
    ):
        self.rate = rate
        self.message = message or f"Poisson rate {rate:.3e} is outside the model's regime."
        super().__init__(self.message)


class QuadratureRefusedError(Exception):
    """Exception raised when the quadrature oracle is asked to integrate too many random effects."""

    def __init__(
        self,
        f: int,
        max_f: int = 4,
        message: str = "",
    ):
        self.f = f
        self.max_f = max_f
        self.message = (
            message
            or f"Quadrature needs F <= {max_f} random effects, got F = {f}."
        )
        super().__init__(self.message)
