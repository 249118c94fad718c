import numpy as np
import pytest

from rotortrack import BasisSpec, RotorState


def random_state(rng, M, interior_margin=0):
    """Random normalized state; optionally supported away from the basis edge.

    Truncation artifacts in operator products live within two rows of the
    edge, so states with interior_margin >= 3 see the untruncated algebra
    exactly.
    """
    dim = 2 * M + 1
    c = np.zeros(dim, dtype=complex)
    lo, hi = interior_margin, dim - interior_margin
    c[lo:hi] = rng.normal(size=hi - lo) + 1j * rng.normal(size=hi - lo)
    return RotorState.from_coeffs(BasisSpec(M), c)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
