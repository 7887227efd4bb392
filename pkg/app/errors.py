"""Domain failures that the experiment runner maps onto exit codes."""


class BasisSizeError(RuntimeError):
    """A Fock basis would exceed the configured size cap."""

    def __init__(self, mode_count: int, photon_number: int, size: int, cap: int):
        self.mode_count = mode_count
        self.photon_number = photon_number
        self.size = size
        self.cap = cap
        super().__init__(
            f"Fock basis for {photon_number} photons in {mode_count} modes has "
            f"{size} elements, above the cap of {cap}"
        )


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, iteration: int, value: float):
        self.iteration = iteration
        self.value = value
        super().__init__(f"Non-finite loss {value!r} at iteration {iteration}")


class GridResolutionError(ValueError):
    """A scattering time grid does not resolve the atomic time scales."""

    def __init__(self, quantity: str, ratio: float, required: float):
        self.quantity = quantity
        self.ratio = ratio
        self.required = required
        super().__init__(
            f"Time step resolves {quantity} with only {ratio:.3g} points "
            f"(need at least {required:g})"
        )
