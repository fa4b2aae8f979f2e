import numpy as np
import pytest


def finite_difference_check(
    loss_fn,
    params: dict,
    analytic: dict,
    rng: np.random.Generator,
    n_points: int = 10,
    h: float = 1e-5,
    rel_tol: float = 1e-4,
    abs_tol: float = 1e-7,
):
    """Central-difference check of analytic gradients at random coordinates.

    ``loss_fn`` recomputes the scalar loss from the live arrays in
    ``params`` (perturbed in place), so it must re-derive any internal
    randomness from a fixed seed. Passes when
    |numeric - analytic| <= abs_tol + rel_tol * max(|numeric|, |analytic|).
    """
    for name, p in params.items():
        flat = p.reshape(-1)
        grad = analytic[name].reshape(-1)
        count = min(n_points, flat.size)
        idx = rng.choice(flat.size, size=count, replace=False)
        for i in idx:
            original = flat[i]
            flat[i] = original + h
            up = loss_fn()
            flat[i] = original - h
            down = loss_fn()
            flat[i] = original
            numeric = (up - down) / (2.0 * h)
            reference = grad[i]
            tolerance = abs_tol + rel_tol * max(abs(numeric), abs(reference))
            assert abs(numeric - reference) <= tolerance, (
                f"{name}[{i}]: numeric {numeric:.10g} vs analytic {reference:.10g}"
            )


@pytest.fixture
def fd_check():
    return finite_difference_check
