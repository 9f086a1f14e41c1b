"""Flat phase-state vectors and their layouts.

Only free quasi-components are stored; uᵅ, aᵅ and ȷᵅ are identically zero.

========== ============================ ==========
Layout     Blocks                       Length
========== ============================ ==========
MECHANICS  q, uᴬ                        2n - m
KINEMATIC  q, uᴵ, μ_σ                   2n
DYNAMIC    q, uᴬ, aᴬ, ȷᴬ, μ_σ           4n - 2m
========== ============================ ==========
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]


class Layout(enum.Enum):
    """State layouts of the three assembled systems."""

    MECHANICS = "mechanics"
    KINEMATIC = "kinematicOC"
    DYNAMIC = "dynamicOC"


_BLOCKS: dict[Layout, tuple[str, ...]] = {
    Layout.MECHANICS: ("q", "u"),
    Layout.KINEMATIC: ("q", "u", "mu"),
    Layout.DYNAMIC: ("q", "u", "a", "j", "mu"),
}


def block_slices(layout: Layout, n: int, m: int) -> dict[str, slice]:
    """Slices of each block inside the flat vector."""
    sizes = {"q": n, "u": n - m, "a": n - m, "j": n - m, "mu": m}
    slices: dict[str, slice] = {}
    start = 0
    for block in _BLOCKS[layout]:
        slices[block] = slice(start, start + sizes[block])
        start += sizes[block]
    return slices


def state_size(layout: Layout, n: int, m: int) -> int:
    """Length of a flat state: 2n-m, 2n or 4n-2m."""
    return block_slices(layout, n, m)[_BLOCKS[layout][-1]].stop


@dataclass(frozen=True, eq=False)
class PhaseState:
    """A layout tag plus the flat real vector it describes."""

    layout: Layout
    n: int
    m: int
    vector: FloatArray

    def __post_init__(self) -> None:
        vector = np.asarray(self.vector, dtype=float)
        expected = state_size(self.layout, self.n, self.m)
        if vector.shape != (expected,):
            raise ValueError(
                f"{self.layout.value} state length {vector.size}, expected {expected}"
            )
        object.__setattr__(self, "vector", vector)

    @classmethod
    def pack(
        cls,
        layout: Layout,
        n: int,
        m: int,
        *,
        q: FloatArray,
        u: FloatArray | None = None,
        a: FloatArray | None = None,
        j: FloatArray | None = None,
        mu: FloatArray | None = None,
    ) -> PhaseState:
        """Assemble a state from named blocks; missing blocks are zero."""
        slices = block_slices(layout, n, m)
        vector = np.zeros(state_size(layout, n, m))
        given = {"q": q, "u": u, "a": a, "j": j, "mu": mu}
        for block, value in given.items():
            if value is None:
                continue
            if block not in slices:
                raise ValueError(f"{layout.value} layout has no '{block}' block")
            vector[slices[block]] = value
        return cls(layout, n, m, vector)

    def block(self, name: str) -> FloatArray:
        """Return a copy of one block (``q``, ``u``, ``a``, ``j`` or ``mu``)."""
        slices = block_slices(self.layout, self.n, self.m)
        if name not in slices:
            raise KeyError(f"{self.layout.value} layout has no '{name}' block")
        return self.vector[slices[name]].copy()

    @property
    def q(self) -> FloatArray:
        return self.block("q")

    @property
    def u(self) -> FloatArray:
        return self.block("u")

    @property
    def a(self) -> FloatArray:
        return self.block("a")

    @property
    def j(self) -> FloatArray:
        return self.block("j")

    @property
    def mu(self) -> FloatArray:
        return self.block("mu")
