"""Portable deterministic random source.

All randomness in the package flows through :class:`LCG64` so that results
are reproducible across platforms and implementations:

* state update: ``state = (6364136223846793005 * state + 1442695040888963407) mod 2**64``
  (Knuth's MMIX constants); the initial state is ``seed mod 2**64``;
* each draw advances the state once and returns its high 32 bits;
* ``randbelow(n)`` rejects draws ``>= 2**32 - (2**32 mod n)`` and returns
  ``draw mod n``;
* ``sample_indices`` is a partial Fisher-Yates shuffle over ``range(size)``.
"""

from typing import List, Sequence, Tuple

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1
_TWO32 = 1 << 32


class LCG64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u32(self) -> int:
        self.state = (MULTIPLIER * self.state + INCREMENT) & _MASK64
        return self.state >> 32

    def randbelow(self, n: int) -> int:
        if not 1 <= n <= _TWO32:
            raise ValueError(f"randbelow bound out of range: {n}")
        limit = _TWO32 - (_TWO32 % n)
        while True:
            draw = self.next_u32()
            if draw < limit:
                return draw % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 32 bits of resolution."""
        return self.next_u32() / _TWO32

    def sample_indices(self, size: int, k: int) -> List[int]:
        """``min(k, size)`` distinct indices from ``range(size)``, in draw order."""
        order = list(range(size))
        k = min(k, size)
        for i in range(k):
            j = i + self.randbelow(size - i)
            order[i], order[j] = order[j], order[i]
        return order[:k]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: Sequence):
        return items[self.randbelow(len(items))]


def sample_without_replacement(items: Sequence, u: int, rng: LCG64) -> Tuple[list, list]:
    """Split ``items`` into a pool of ``u`` sampled items (draw order) and the
    remainder (original order)."""
    if u < 1:
        raise ValueError("pool size must be >= 1")
    if u >= len(items):
        return list(items), []
    picked = rng.sample_indices(len(items), u)
    chosen = set(picked)
    return [items[i] for i in picked], [x for i, x in enumerate(items) if i not in chosen]
