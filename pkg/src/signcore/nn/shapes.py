"""Output-size formulas for sliding-window layers."""


class ShapeError(ValueError):
    pass


def conv_output_size(input: int, filter: int, padding: int = 0, stride: int = 1, dim: str = "extent") -> int:
    """Number of filter placements along one axis.

    ``floor((input - filter + 2*padding) / stride) + 1``
    """
    if stride < 1:
        raise ShapeError(f"{dim}: stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"{dim}: padding must be >= 0, got {padding}")
    if filter < 1:
        raise ShapeError(f"{dim}: filter must be >= 1, got {filter}")
    if filter > input + 2 * padding:
        raise ShapeError(
            f"{dim}: filter {filter} larger than padded input {input} + 2*{padding}"
        )
    return (input - filter + 2 * padding) // stride + 1


def pool_output_size(input: int, window: int, stride: int, dim: str = "extent") -> int:
    """Number of pooling windows along one axis; a partial trailing window is dropped."""
    if stride < 1:
        raise ShapeError(f"{dim}: stride must be >= 1, got {stride}")
    if window < 1:
        raise ShapeError(f"{dim}: window must be >= 1, got {window}")
    if window > input:
        raise ShapeError(f"{dim}: window {window} larger than input {input}")
    return (input - window) // stride + 1
