from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

from fairtie.model import Instance  # noqa: E402

values = st.builds(Fraction, st.integers(0, 20), st.integers(1, 5))


@st.composite
def instances(draw, min_n=1, max_n=4, min_m=0, max_m=8):
    n = draw(st.integers(min_n, max_n))
    m = draw(st.integers(min_m, max_m))
    rows = draw(st.lists(st.lists(values, min_size=m, max_size=m), min_size=n, max_size=n))
    return Instance(tuple(tuple(r) for r in rows))


@st.composite
def orderings(draw, n):
    return tuple(draw(st.permutations(list(range(n)))))
