"""Seedable splitmix64 generator: the project-wide randomness source.

splitmix64 is pinned (rather than a stdlib generator) so that a flow
schedule or an ECMP path choice can be reproduced from the 64-bit seed
alone in any language: the state advances by the golden-gamma constant and
each output is a three-step finalizing mix of the new state. Derived
quantities are defined on top of the raw stream as:

  random():      next_u64() >> 11, scaled by 2**-53  (53-bit double in [0,1))
  randbelow(n):  next_u64() % n                      (modulo; n is tiny here)
"""

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """One splitmix64 output for state x; used as a stateless integer hash."""
    x = (x + _GAMMA) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


class Splitmix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _M64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _M64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 1.1102230246251565e-16  # 2**-53

    def randbelow(self, n: int) -> int:
        return self.next_u64() % n

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        return lo + self.next_u64() % (hi - lo + 1)

    def spawn(self) -> "Splitmix64":
        """Child generator seeded from this stream (documented derivation)."""
        return Splitmix64(self.next_u64())
