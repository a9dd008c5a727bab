import numpy as np

from clampbm.seeding import derive_seed, generator


class TestDeriveSeed:
    def test_stable_across_calls(self):
        assert derive_seed(0, "run", 0.75, 3, 1024, 0) == derive_seed(0, "run", 0.75, 3, 1024, 0)

    def test_fits_in_64_bits(self):
        assert 0 <= derive_seed(123, "partition") < 2**64

    def test_every_coordinate_matters(self):
        base = derive_seed(0, "run", 0.75, 3, 1024, 0)
        assert base != derive_seed(1, "run", 0.75, 3, 1024, 0)
        assert base != derive_seed(0, "run", 0.5, 3, 1024, 0)
        assert base != derive_seed(0, "run", 0.75, 3, 1024, 1)
        assert base != derive_seed(0, "init", 0.75, 3, 1024, 0)

    def test_float_spelling(self):
        assert derive_seed(0, 0.75) == derive_seed(0, 0.750)
        assert derive_seed(0, 0.1 + 0.2) != derive_seed(0, 0.3)

    def test_generators_share_streams_only_for_equal_coordinates(self):
        first = generator(4, "binarize", 0, 12).random(5)
        again = generator(4, "binarize", 0, 12).random(5)
        other = generator(4, "binarize", 1, 12).random(5)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, other)
