import itertools

import numpy as np
import pytest

from basinlab.symbolic import (BernoulliSpec, Cylinder, LazyWord, Word, baker_apply, binary_codec,
                               cylinder_prob, ep_apply, sample_word, shift_word, word_to_point)
from helpers import cells_within, occupancy


def w(text):
    return Word.from_string(text)


class TestShift:
    def test_one_step(self):
        assert shift_word(w("011"), 1) == w("11")

    def test_zero_steps_is_identity(self):
        word = w("0110")
        assert shift_word(word, 0) == word

    def test_two_steps(self):
        assert shift_word(w("1010"), 2) == w("10")

    def test_negative_on_one_sided_rejected(self):
        with pytest.raises(ValueError):
            shift_word(w("01"), -1)

    def test_two_sided_keeps_absolute_indexing(self):
        omega = Word((0, 1, 1, 0), 2, origin_offset=-2, two_sided=True)
        moved = shift_word(omega, 1)
        for i in range(-3, 1):
            assert moved[i] == omega[i + 1]
        back = shift_word(omega, -1)
        assert back[-1] == omega[-2]


class TestCylinders:
    def test_fair_coin(self):
        assert cylinder_prob(BernoulliSpec.binary(0.5), Cylinder.of([0, 1, 1])) == 0.125

    def test_biased(self):
        assert cylinder_prob(BernoulliSpec.binary(0.7), Cylinder.of([0, 0, 1])) == pytest.approx(0.147, abs=1e-15)

    def test_empty_cylinder(self):
        assert cylinder_prob(BernoulliSpec.uniform(4), Cylinder.of([], 4)) == 1.0

    def test_multiplicative_under_concatenation(self):
        spec = BernoulliSpec.binary(0.3)
        for a in itertools.product((0, 1), repeat=3):
            for b in itertools.product((0, 1), repeat=2):
                c, d = Cylinder.of(a), Cylinder.of(b)
                assert cylinder_prob(spec, c + d) == pytest.approx(
                    cylinder_prob(spec, c) * cylinder_prob(spec, d), rel=1e-14)

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.77])
    def test_depth_sums_to_one(self, p):
        spec = BernoulliSpec.binary(p)
        for k in range(1, 9):
            total = sum(cylinder_prob(spec, Cylinder.of(a)) for a in itertools.product((0, 1), repeat=k))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_render(self):
        assert str(Cylinder.of([0, 1, 1])) == "[0,1,1]"

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            BernoulliSpec((0.5, 0.6))
        with pytest.raises(ValueError):
            BernoulliSpec((1.0, 0.0))


class TestSampling:
    def test_empty(self):
        assert len(sample_word(BernoulliSpec.binary(0.5), 0, 7)) == 0

    def test_fair_frequency(self):
        word = sample_word(BernoulliSpec.binary(0.5), 100_000, seed=1)
        freq = np.mean(word.as_array() == 0)
        assert 0.49 <= freq <= 0.51

    def test_biased_frequency(self):
        word = sample_word(BernoulliSpec.binary(0.9), 100_000, seed=2)
        freq = np.mean(word.as_array() == 0)
        assert 0.897 <= freq <= 0.903

    def test_deterministic_and_prefix_stable(self):
        spec = BernoulliSpec.binary(0.4)
        a = sample_word(spec, 500, seed=9)
        assert a == sample_word(spec, 500, seed=9)
        assert sample_word(spec, 1000, seed=9).symbols[:500] == a.symbols
        assert a != sample_word(spec, 500, seed=10)

    def test_lazy_two_sided(self):
        lw = LazyWord(BernoulliSpec.uniform(4), seed=3, two_sided=True)
        pre = lw.prefix(10, start=-5)
        assert pre.index_range == (-5, 5)
        assert all(pre[i] == lw[i] for i in range(-5, 5))

    def test_string_roundtrip(self):
        word = sample_word(BernoulliSpec.uniform(4), 40, seed=5)
        assert Word.from_string(word.to_string(), 4) == word


class TestIntervalModels:
    def test_ep_examples(self):
        assert ep_apply(1 / 3, 0.5) == pytest.approx(0.25, abs=1e-15)
        assert ep_apply(0.4, 0.0) == 0.0
        assert ep_apply(0.5, 0.3) == pytest.approx(0.6, abs=1e-15)

    def test_ep_boundary_takes_second_branch(self):
        assert ep_apply(0.25, 0.25) == 0.0

    def test_ep_rejects_bad_p(self):
        with pytest.raises(ValueError):
            ep_apply(1.0, 0.5)

    def test_baker_examples(self):
        assert baker_apply(0.5, 0.25, 0.5, 1) == pytest.approx((0.5, 0.25), abs=1e-15)
        assert baker_apply(1 / 3, 0.5, 0.0, 1) == pytest.approx((0.25, 1 / 3), abs=1e-15)

    def test_baker_roundtrip(self):
        rng = np.random.default_rng(0)
        for p in (0.2, 0.5, 0.71):
            wv, yv = rng.random(10_000), rng.random(10_000)
            bw, by = baker_apply(p, wv, yv, -1)
            fw, fy = baker_apply(p, bw, by, 1)
            assert np.max(np.abs(fw - wv)) < 1e-14 and np.max(np.abs(fy - yv)) < 1e-14

    def test_baker_rejects_outside(self):
        with pytest.raises(ValueError):
            baker_apply(0.5, 1.0, 0.2)

    def test_baker_preserves_lebesgue(self):
        rng = np.random.default_rng(11)
        wv, yv = rng.random(1_000_000), rng.random(1_000_000)
        ok, worst = cells_within(occupancy(baker_apply(0.3, wv, yv, 1), 8))
        assert ok, worst

    def test_ep_preserves_lebesgue(self):
        rng = np.random.default_rng(12)
        ok, worst = cells_within(occupancy([ep_apply(1 / 3, rng.random(1_000_000))], 16))
        assert ok, worst

    def test_codec(self):
        assert binary_codec(0.5, 3) == w("100")
        assert word_to_point(w("01")) == 0.25

    def test_semiconjugacy(self):
        code = binary_codec(0.3, 20)
        assert abs(ep_apply(0.5, 0.3) - word_to_point(shift_word(code, 1))) < 2.0 ** -19
