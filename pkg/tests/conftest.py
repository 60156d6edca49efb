import numpy as np
import pytest
from hypothesis import strategies as st

from nctspin.nc_torus import ThetaMatrix, TorusElement


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def elements(theta: ThetaMatrix, max_terms: int = 5, max_exp: int = 4):
    """Hypothesis strategy for finitely supported elements over a fixed theta."""
    mono = st.tuples(*[st.integers(-max_exp, max_exp)] * theta.n)
    coef = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)
    return st.dictionaries(mono, coef, max_size=max_terms).map(
        lambda d: TorusElement(theta, d)
    )
