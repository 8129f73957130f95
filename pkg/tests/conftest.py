import numpy as np
import pytest
from hypothesis import strategies as st

from maskboost.mask import BinaryMask


@st.composite
def mask_arrays(draw, max_side: int = 16):
    """A random boolean (h, w) array, sides 1..max_side."""
    h = draw(st.integers(min_value=1, max_value=max_side))
    w = draw(st.integers(min_value=1, max_value=max_side))
    bits = draw(
        st.lists(st.booleans(), min_size=h * w, max_size=h * w)
    )
    return np.array(bits, dtype=bool).reshape(h, w)


@st.composite
def masks(draw, max_side: int = 16):
    return BinaryMask(draw(mask_arrays(max_side=max_side)))


@st.composite
def mask_pairs(draw, max_side: int = 16):
    """Two independent masks sharing one shape."""
    h = draw(st.integers(min_value=1, max_value=max_side))
    w = draw(st.integers(min_value=1, max_value=max_side))
    n = h * w
    a = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    b = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return (
        BinaryMask(np.array(a, dtype=bool).reshape(h, w)),
        BinaryMask(np.array(b, dtype=bool).reshape(h, w)),
    )


@pytest.fixture
def checker_mask():
    """4x4 checkerboard starting with foreground at (0, 0)."""
    arr = np.zeros((4, 4), dtype=bool)
    arr[::2, ::2] = True
    arr[1::2, 1::2] = True
    return BinaryMask(arr)
