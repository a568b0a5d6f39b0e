import numpy as np
import pytest

from omgsim.hilbert import FockSpace, SpinMotionState


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(fock: FockSpace, rng: np.random.Generator) -> SpinMotionState:
    """Random full-rank density matrix on the composite space."""
    d = fock.composite_dim
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    rho /= rho.trace().real
    return SpinMotionState(rho, fock)
