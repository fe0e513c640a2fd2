"""Equal-angular-interval view subsampling."""

from __future__ import annotations

from .geometry import ProjectionStack


def sparse_sample(stack: ProjectionStack, factor: int) -> ProjectionStack:
    """Keep every ``factor``-th view (indices 0, factor, 2*factor, ...).

    The factor must divide the view count exactly; silent truncation would
    break the equal angular spacing the backprojection quadrature assumes.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("sparse factor must be >= 1")
    if stack.n_views % factor != 0:
        raise ValueError(
            f"sparse factor {factor} does not divide the view count {stack.n_views}"
        )
    if factor == 1:
        return stack
    geom = stack.geometry.with_angles(stack.geometry.angles[::factor])
    return ProjectionStack(geometry=geom, data=stack.data[::factor])
