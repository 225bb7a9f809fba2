import numpy as np


def edge_sqrt(w, c):
    """``sqrt(w**2 - c**2)`` with the cut on [-c, c] and ``~ w`` at infinity.

    Product of two principal roots; for ``Im w > 0`` both factors lie in the
    first quadrant, so the result lies in the upper half-plane.
    """
    w = np.asarray(w, dtype=complex)
    return np.sqrt(w - c) * np.sqrt(w + c)
