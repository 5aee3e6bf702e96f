"""Deterministic pseudo-random streams used for all experiment sampling.

Everything here is pinned bit-exactly so that a single integer seed
reproduces identical instances on any platform (or in a port to another
language):

* Base generator: SplitMix64. The 64-bit state advances by the odd
  constant ``0x9E3779B97F4A7C15``; each output applies the finalizer
  ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31`` to the advanced state, all
  arithmetic modulo 2**64.
* Uniform doubles take the top 53 bits: ``(u64 >> 11) * 2.0**-53``,
  giving values in [0, 1).
* Discrete uniforms map a 53-bit double onto the integer span
  (``a + floor(u * span)`` clamped to ``b``); the O(span / 2**53) bias
  is accepted for the sake of a trivially portable rule.
* Normals use the Box-Muller transform on pairs of uniforms (the first
  shifted into (0, 1] so the logarithm is finite). Values are produced
  in cos/sin pairs; an odd trailing request discards the sine partner,
  so each normal batch consumes ``2 * ceil(count / 2)`` raw draws.
* Student-t(dof) is ``normal / sqrt(chisq(dof) / dof)`` with the
  chi-square realized as a sum of ``dof`` squared normals, then scaled
  and shifted. Each variate draws one batch of ``1 + dof`` normals.
* Substreams hash the parent's seed with a key path (integers used
  as-is, strings via FNV-1a 64), so every ``(seed, keys)`` pair
  addresses a stable stream: adding agents or instances never
  reshuffles draws already assigned to other keys.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TWO_PI = 2.0 * math.pi


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


class SeededStream:
    """SplitMix64 stream addressed by a 64-bit seed."""

    algorithm = "splitmix64-boxmuller-v1"

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & _MASK64
        self._state = self.seed

    def __repr__(self) -> str:
        return f"SeededStream(seed={self.seed:#x})"

    def substream(self, *keys: int | str) -> "SeededStream":
        """Derive a child stream from this stream's seed and a key path.

        Children depend only on (seed, keys), never on draws already
        taken, so sibling streams are independent of one another.
        """
        s = self.seed
        for key in keys:
            if isinstance(key, str):
                k = _fnv1a64(key.encode("utf-8"))
            else:
                k = int(key) & _MASK64
            s = _mix64(((s ^ k) + _GAMMA) & _MASK64)
        return SeededStream(s)

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix64(self._state)

    def next_float(self) -> float:
        """Next double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    # ------------------------------------------------------------------
    # distributions

    def uniform(self, a: float = 0.0, b: float = 1.0, count: int | None = None):
        """Uniform draws on [a, b); scalar when count is None."""
        if not (b >= a):
            raise ValueError(f"uniform requires a <= b, got ({a}, {b})")
        if count is None:
            return a + (b - a) * self.next_float()
        out = np.empty(count)
        for i in range(count):
            out[i] = a + (b - a) * self.next_float()
        return out

    def discrete_uniform(self, a: int, b: int, count: int | None = None):
        """Integer draws uniform on {a, ..., b} inclusive."""
        if b < a:
            raise ValueError(f"discrete_uniform requires a <= b, got ({a}, {b})")
        span = b - a + 1
        if count is None:
            return a + min(int(self.next_float() * span), span - 1)
        out = np.empty(count, dtype=np.int64)
        for i in range(count):
            out[i] = a + min(int(self.next_float() * span), span - 1)
        return out

    def _normal_pair(self) -> tuple[float, float]:
        # first uniform shifted into (0, 1] so log() is finite
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = self.next_float()
        r = math.sqrt(-2.0 * math.log(u1))
        return r * math.cos(_TWO_PI * u2), r * math.sin(_TWO_PI * u2)

    def normal(self, mu: float = 0.0, sigma: float = 1.0, count: int | None = None):
        """Gaussian draws via Box-Muller; scalar when count is None."""
        if sigma < 0:
            raise ValueError(f"normal requires sigma >= 0, got {sigma}")
        if count is None:
            return mu + sigma * self._normal_pair()[0]
        out = np.empty(count)
        for i in range(0, count, 2):
            z0, z1 = self._normal_pair()
            out[i] = z0
            if i + 1 < count:
                out[i + 1] = z1
        return mu + sigma * out

    def student_t(
        self,
        dof: int = 3,
        scale: float = 1.0,
        shift: float = 0.0,
        count: int | None = None,
    ):
        """Student-t draws: shift + scale * N / sqrt(chisq(dof)/dof)."""
        if dof < 1 or dof != int(dof):
            raise ValueError(f"student_t requires integer dof >= 1, got {dof}")
        if count is None:
            return self.student_t(dof, scale, shift, count=1)[0]
        dof = int(dof)
        out = np.empty(count)
        for i in range(count):
            batch = self.normal(count=1 + dof)
            chisq = float(np.dot(batch[1:], batch[1:]))
            out[i] = shift + scale * batch[0] / math.sqrt(chisq / dof)
        return out


def draw(stream: SeededStream, dist: dict, count: int) -> np.ndarray:
    """Dispatch a distribution described by a config mapping.

    ``dist`` carries a ``kind`` of uniform | discrete_uniform | normal |
    student_t plus that kind's parameters (missing ones default).
    """
    kind = dist.get("kind", "uniform")
    if kind == "uniform":
        return stream.uniform(dist.get("a", 0.0), dist.get("b", 1.0), count)
    if kind == "discrete_uniform":
        return stream.discrete_uniform(dist.get("a", 0), dist.get("b", 1), count)
    if kind == "normal":
        return stream.normal(dist.get("mu", 0.0), dist.get("sigma", 1.0), count)
    if kind == "student_t":
        return stream.student_t(
            dist.get("dof", 3), dist.get("scale", 1.0), dist.get("shift", 0.0), count
        )
    raise ValueError(f"unknown distribution kind: {kind!r}")
