"""Deterministic 64-bit random stream used by every seeded component.

The generator is counter-based so that draws depend only on ``(seed, draw
index)`` and never on platform, thread count, or numpy version.  Draw ``k``
(0-based) from a stream with seed ``s`` is::

    raw_k = mix64((s + (k + 1) * GOLDEN) mod 2**64)

where ``GOLDEN = 0x9E3779B97F4A7C15`` and ``mix64`` is the SplitMix64
finalizer::

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

(all arithmetic mod 2**64).  Derived quantities are defined on top of the
raw draws:

* uniform in [0, 1):  ``(raw >> 11) * 2**-53``
* standard normals:   Box-Muller pairs; the radius uses
  ``u1 = ((raw >> 11) + 1) * 2**-53`` (in (0, 1], so log never sees 0) and
  the angle uses the next draw's [0, 1) uniform.
* permutation of n:   stable argsort of n raw draws.
* integer in [0, b):  ``floor(uniform * b)``.

Independent substreams come from :func:`derive`, which folds integer path
components (repetition index, column index, ...) into a new seed through the
same finalizer.  Distinct key tuples give distinct seeds by construction.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

_U_GOLDEN = np.uint64(_GOLDEN)
_U_M1 = np.uint64(0xBF58476D1CE4E5B9)
_U_M2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U1 = np.uint64(1)
_TWO_NEG_53 = 2.0 ** -53


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2**64, which is exactly what SplitMix64 wants
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


def _mix_int(z: int) -> int:
    z &= _MASK
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def derive(seed: int, *keys: int) -> int:
    """Fold integer path components into ``seed``, yielding a substream seed.

    For a fixed base seed, distinct key tuples of equal length always map to
    distinct seeds (the finalizer is a bijection on 64-bit words).
    """
    s = seed & _MASK
    for k in keys:
        s = _mix_int(((s + _GOLDEN) & _MASK) ^ _mix_int(k))
    return s


def derive_text(seed: int, text: str) -> int:
    """Fold a string (e.g. a feature name) into ``seed``.

    The UTF-8 bytes are folded in 8-byte little-endian chunks, with the byte
    length appended so prefixes cannot collide with padded strings.
    """
    data = text.encode("utf-8")
    keys = [
        int.from_bytes(data[i : i + 8], "little") for i in range(0, len(data), 8)
    ]
    return derive(seed, *keys, len(data))


class Stream:
    """Counter-based SplitMix64 stream (exact definition in the module docstring)."""

    __slots__ = ("seed", "_count")

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._count = 0

    def raw(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit words as a uint64 array."""
        ks = np.arange(self._count + 1, self._count + count + 1, dtype=np.uint64)
        self._count += count
        return _mix_array(np.uint64(self.seed) + ks * _U_GOLDEN)

    def uniforms(self, count: int) -> np.ndarray:
        """``count`` float64 uniforms in [0, 1)."""
        return (self.raw(count) >> _U11).astype(np.float64) * _TWO_NEG_53

    def normals(self, count: int) -> np.ndarray:
        """``count`` standard normal draws via Box-Muller pairs."""
        pairs = (count + 1) // 2
        r = self.raw(2 * pairs)
        u1 = ((r[0::2] >> _U11) + _U1).astype(np.float64) * _TWO_NEG_53
        u2 = (r[1::2] >> _U11).astype(np.float64) * _TWO_NEG_53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of ``range(n)`` (stable sort of raw keys)."""
        return np.argsort(self.raw(n), kind="stable")

    def integers(self, count: int, bound: int) -> np.ndarray:
        """``count`` int64 draws uniform on [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.uniforms(count) * bound).astype(np.int64)
