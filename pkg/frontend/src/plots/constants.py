"""Named reference constants drawn as horizontal target lines.

These are the limit constants the simulation converges to; they are fixed
numbers of the models (not fitted), recorded here so figure specs can name
them instead of embedding magic floats.
"""

import math

# The heavy-tail step law with tail exponent 2 (unit-index stable attraction)
# has stable scale sigma^2 = 3/pi exactly, so pi sigma^2 = 3 and the limiting
# density at the origin is 1/3.
LOCAL_DENSITY_CRITICAL = 1.0 / 3.0
INVERSE_LOCAL_DENSITY_CRITICAL = 3.0

# Escape probability (no return to the start site) of the rate-1 walk with
# tail exponent 1.7 (transient case), from the exact Green-function value
# G(0) = 1.709110... produced by the simulation package's oracle.
ESCAPE_PROBABILITY_HEAVY07 = 0.5850988563902972
INVERSE_ESCAPE_PROBABILITY_HEAVY07 = 1.0 / ESCAPE_PROBABILITY_HEAVY07

UNIT = 1.0

REFERENCE_CONSTANTS = {
    "local_density_critical": LOCAL_DENSITY_CRITICAL,
    "inverse_local_density_critical": INVERSE_LOCAL_DENSITY_CRITICAL,
    "escape_probability_heavy07": ESCAPE_PROBABILITY_HEAVY07,
    "inverse_escape_probability_heavy07": INVERSE_ESCAPE_PROBABILITY_HEAVY07,
    "unit": UNIT,
}


def resolve_reference(token: str) -> float:
    """A reference is either a named constant or a literal float."""
    if token in REFERENCE_CONSTANTS:
        return REFERENCE_CONSTANTS[token]
    try:
        value = float(token)
    except ValueError:
        known = ", ".join(sorted(REFERENCE_CONSTANTS))
        raise ValueError(
            f"unknown reference constant {token!r}; known names: {known}"
        ) from None
    if not math.isfinite(value):
        raise ValueError(f"reference must be finite, got {token!r}")
    return value
