from unittest import TestCase

import numpy as np

import support  # noqa: F401
import seeding


class TestSeeding(TestCase):
    def test_same_key_same_stream(self):
        np.testing.assert_array_equal(seeding.stream(7, 1, 2).random(5), seeding.stream(7, 1, 2).random(5))

    def test_keys_are_independent_addresses(self):
        self.assertFalse(np.array_equal(seeding.stream(7, 1).random(5), seeding.stream(7, 2).random(5)))
        self.assertFalse(np.array_equal(seeding.stream(7, 1).random(5), seeding.stream(8, 1).random(5)))

    def test_stream_int(self):
        value = seeding.stream_int(7, 3, 0)
        self.assertEqual(value, seeding.stream_int(7, 3, 0))
        self.assertTrue(0 <= value < 2 ** 32)

    def test_full_u64_seed(self):
        seeding.stream(2 ** 64 - 1, 0).random()

    def test_negative_seed(self):
        with self.assertRaises(ValueError):
            seeding.stream(-1)
