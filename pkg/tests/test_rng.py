"""The normal stream must reproduce the classic 32-bit twister word for word,
and the pair transform must match a scalar reference implementation."""

import math

import numpy as np
import pytest

from tickbench.pricing import NormalStream


class ReferenceTwister:
    """Textbook 624-word generator, kept deliberately naive and scalar."""

    N, M = 624, 397
    MATRIX = 0x9908B0DF
    UPPER = 0x80000000
    LOWER = 0x7FFFFFFF

    def __init__(self, seed):
        self.mt = [0] * self.N
        self.mt[0] = seed & 0xFFFFFFFF
        for i in range(1, self.N):
            self.mt[i] = (1812433253 * (self.mt[i - 1] ^ (self.mt[i - 1] >> 30)) + i) & 0xFFFFFFFF
        self.index = self.N

    def _twist(self):
        for i in range(self.N):
            y = (self.mt[i] & self.UPPER) | (self.mt[(i + 1) % self.N] & self.LOWER)
            self.mt[i] = self.mt[(i + self.M) % self.N] ^ (y >> 1)
            if y & 1:
                self.mt[i] ^= self.MATRIX
        self.index = 0

    def word(self):
        if self.index >= self.N:
            self._twist()
        y = self.mt[self.index]
        self.index += 1
        y ^= y >> 11
        y ^= (y << 7) & 0x9D2C5680
        y ^= (y << 15) & 0xEFC60000
        y ^= y >> 18
        return y & 0xFFFFFFFF


# first outputs of the reference generator for its canonical seed
KNOWN_WORDS_5489 = [
    3499211612, 581869302, 3890346734, 3586334585,
    545404204, 4161255391, 3922919429, 949333985,
]
KNOWN_WORDS_12345 = [
    3992670690, 3823185381, 1358822685, 561383553,
    789925284, 170765737, 878579710, 3549516158,
]


def test_known_words_seed_5489():
    words = NormalStream(5489).raw_words(8)
    assert words.tolist() == KNOWN_WORDS_5489


def test_known_words_seed_12345():
    words = NormalStream(12345).raw_words(8)
    assert words.tolist() == KNOWN_WORDS_12345


@pytest.mark.parametrize("seed", [5489, 12345, 0, 2**32 - 1])
def test_words_match_scalar_reference(seed):
    # 1500 words crosses the internal 624-word refill twice
    ref = ReferenceTwister(seed)
    words = NormalStream(seed).raw_words(1500)
    assert words.tolist() == [ref.word() for _ in range(1500)]


def test_uniforms_live_in_half_open_unit_interval():
    u = NormalStream(5489).uniforms(10_000)
    assert np.all(u > 0.0)
    assert np.all(u <= 1.0)


def test_first_uniform_is_shifted_word():
    u = NormalStream(12345).uniforms(1)[0]
    assert u == (KNOWN_WORDS_12345[0] + 1) / 2.0**32


def test_normals_match_scalar_pair_transform():
    ref = ReferenceTwister(777)
    expected = []
    while len(expected) < 2001:
        u1 = (ref.word() + 1) / 2.0**32
        u2 = (ref.word() + 1) / 2.0**32
        r = math.sqrt(-2.0 * math.log(u1))
        expected.append(r * math.cos(2.0 * math.pi * u2))
        expected.append(r * math.sin(2.0 * math.pi * u2))
    z = NormalStream(777).normals(2001)
    np.testing.assert_allclose(z, expected[:2001], rtol=1e-12, atol=0.0)


def test_first_normals_seed_12345():
    z = NormalStream(12345).normals(4)
    np.testing.assert_allclose(
        z,
        [0.294616195782047, -0.24324570482718, 1.0336144679632797, 1.1105366756677901],
        rtol=1e-13,
    )


def test_second_draw_of_pair_is_buffered():
    whole = NormalStream(42).normals(8)
    stream = NormalStream(42)
    pieces = np.concatenate([stream.normals(3), stream.normals(1), stream.normals(4)])
    np.testing.assert_array_equal(pieces, whole)


def test_scalar_normal_agrees_with_vector_path():
    stream = NormalStream(9001)
    singles = [stream.normal() for _ in range(7)]
    np.testing.assert_array_equal(singles, NormalStream(9001).normals(7))


def test_moments_at_a_million_draws():
    z = NormalStream(42).normals(1_000_000)
    assert abs(z.mean()) < 0.005
    assert abs(z.var() - 1.0) < 0.01


def test_same_seed_same_stream_different_seed_not():
    a = NormalStream(31337).normals(64)
    b = NormalStream(31337).normals(64)
    c = NormalStream(31338).normals(64)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("bad", [-1, 2**32])
def test_seed_must_fit_in_32_bits(bad):
    with pytest.raises(ValueError):
        NormalStream(bad)
