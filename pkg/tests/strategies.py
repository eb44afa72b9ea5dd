"""Hypothesis strategies for structured SOPs."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from sopstruct.generators import SopGenerator


@st.composite
def sops(draw, max_subtasks: int = 12, broken_rate: float = 0.0, min_subtasks: int = 1):
    seed = draw(st.integers(0, 2**32 - 1))
    edge_prob = draw(st.sampled_from([0.0, 0.2, 0.35, 0.6, 1.0]))
    gen = SopGenerator(max_subtasks=max_subtasks, min_subtasks=min_subtasks, edge_prob=edge_prob,
                       broken_rate=broken_rate)
    return gen(random.Random(seed))


variable_names = st.text(
    alphabet=st.sampled_from("abcXYZ _-éß0123456789 \t"), min_size=1, max_size=20
).filter(lambda s: s.strip())
