"""Sign/permutation symmetry catalog of the two-neuron tanh network.

Because tanh is odd and hidden neurons are exchangeable, eight distinct
parameter combinations realize the same input-output function.  The
catalog lists them for the reference boxcar parameters; each entry is a
name -> value map over the 1-2-1 layout.  ``extend_to_width`` embeds a
combination into a wider hidden layer by zeroing the extra neurons, which
is the conventional starting point for mode-centered Laplace fits.
"""

from __future__ import annotations

import numpy as np

from .network import NetworkSpec, ParamVector

# columns: W^[2]_{11}, W^[2]_{12}, W^[1]_{11}, W^[1]_{21}, b^[1]_1, b^[1]_2, b^[2]_1
_COMBOS = np.array([
    [2, 2, 5, -5, 5, 5, 0],
    [2, 2, -5, 5, 5, 5, 0],
    [2, -2, 5, 5, 5, -5, 0],
    [2, -2, -5, -5, 5, -5, 0],
    [-2, 2, 5, 5, -5, 5, 0],
    [-2, 2, -5, -5, -5, 5, 0],
    [-2, -2, 5, -5, -5, -5, 0],
    [-2, -2, -5, 5, -5, -5, 0],
], dtype=np.float64)

_NAMES = ("W^[2]_{11}", "W^[2]_{12}", "W^[1]_{11}", "W^[1]_{21}",
          "b^[1]_1", "b^[1]_2", "b^[2]_1")

SPEC_121 = NetworkSpec((1, 2, 1), "tanh")


def mode_catalog() -> list[dict[str, float]]:
    """The eight equivalent parameter combinations of the reference network."""
    return [dict(zip(_NAMES, row)) for row in _COMBOS]


def mode_param_vector(combination: int) -> ParamVector:
    """Combination ``1..8`` as a ParamVector on the 1-2-1 layout."""
    if not 1 <= combination <= 8:
        raise ValueError("combination index must be in 1..8")
    return ParamVector.from_named(SPEC_121, mode_catalog()[combination - 1])


def extend_to_width(combination: int, hidden: int) -> ParamVector:
    """Embed a 1-2-1 combination into a 1-``hidden``-1 net, extra neurons zeroed."""
    if hidden < 2:
        raise ValueError("hidden width must be >= 2")
    named = mode_catalog()[combination - 1]
    spec = NetworkSpec((1, hidden, 1), "tanh")
    pv = ParamVector.zeros(spec)
    pv["W^[2]_{11}"] = named["W^[2]_{11}"]
    pv["W^[2]_{12}"] = named["W^[2]_{12}"]
    pv["W^[1]_{11}"] = named["W^[1]_{11}"]
    pv["W^[1]_{21}"] = named["W^[1]_{21}"]
    pv["b^[1]_1"] = named["b^[1]_1"]
    pv["b^[1]_2"] = named["b^[1]_2"]
    pv["b^[2]_1"] = named["b^[2]_1"]
    return pv
