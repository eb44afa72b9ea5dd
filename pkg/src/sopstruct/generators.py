"""Seeded random structured SOPs for property tests and sweeps."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import Binding, Category, StructuredSop, Subtask, normalize_name

INGREDIENTS = [
    "flour", "egg", "Milk", "butter", "sugar", "order form", "customer id", "api key",
    "Invoice", "address", "city name", "date",
]
PRODUCTS = ["mixture", "report", "approval", "Parts List", "result", "record"]


@dataclass
class SopGenerator:
    """Random valid DAGs with up to ``max_subtasks`` subtasks.

    ``broken_rate`` is the chance that a binding reads an output its source
    never produces, which typically leaves the planning task unsolvable.
    ``messy_names`` varies casing and spacing of variable names between
    producer and consumer so that name normalization is exercised.
    """

    max_subtasks: int = 12
    min_subtasks: int = 1
    edge_prob: float = 0.35
    binding_prob: float = 0.7
    broken_rate: float = 0.0
    messy_names: bool = True

    def __call__(self, rng: random.Random) -> StructuredSop:
        n = rng.randint(self.min_subtasks, self.max_subtasks)
        ids = [f"subtask{i + 1}" for i in range(n)]
        outputs: dict[str, list[str]] = {}
        built: list[Subtask] = []
        for i, sid in enumerate(ids):
            deps = [d for d in ids[:i] if rng.random() < self.edge_prob]
            rng.shuffle(deps)
            inputs = rng.sample(INGREDIENTS, rng.randint(0, 2))
            slots = {normalize_name(v) for v in inputs}
            bindings = []
            for d in deps:
                if rng.random() >= self.binding_prob:
                    continue
                src = rng.choice(outputs[d])
                if rng.random() < self.broken_rate:
                    src = f"ghost {rng.randint(0, 999)}"
                bound = src if rng.random() < 0.5 else f"in {i + 1} {len(bindings)}"
                if self.messy_names and rng.random() < 0.3:
                    src = _mess(src, rng)
                if normalize_name(bound) in slots:
                    continue
                slots.add(normalize_name(bound))
                bindings.append(Binding(d, src, bound))
            outs = [f"out {i + 1} {k}" for k in range(rng.randint(1, 2))]
            if rng.random() < 0.3:
                outs.append(rng.choice(PRODUCTS))
            outputs[sid] = outs
            built.append(Subtask(
                id=sid,
                name=f"step {i + 1}",
                description=f"Perform step {i + 1}.",
                dependencies=tuple(deps),
                inputs=tuple(inputs),
                inputs_from_dependencies=tuple(bindings),
                outputs=tuple(outs),
                category=rng.choice(list(Category)),
            ))
        # insertion order is deliberately not the generation order
        rng.shuffle(built)
        return StructuredSop.from_subtasks(built)


def _mess(name: str, rng: random.Random) -> str:
    words = name.split()
    if rng.random() < 0.5:
        words = [w.upper() for w in words]
    return ("  " if rng.random() < 0.5 else "") + "   ".join(words).title()


def random_sops(count: int, seed: int = 0, **kwargs) -> list[StructuredSop]:
    gen = SopGenerator(**kwargs)
    return [gen(random.Random(f"{seed}:{k}")) for k in range(count)]
