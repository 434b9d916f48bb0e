import unittest

from cellcheck.utils import (
    parse_assignments,
    parse_counts,
    parse_domain,
    parse_labels,
    parse_ranges,
    parse_schedule,
    parse_threshold,
    parse_vector,
)


class TestParsers(unittest.TestCase):
    def test_vector(self):
        self.assertEqual(parse_vector('0.25,0.25'), [0.25, 0.25])
        with self.assertRaises(ValueError):
            parse_vector('')
        with self.assertRaises(ValueError):
            parse_vector('1,nan')

    def test_counts(self):
        self.assertEqual(parse_counts('20,20'), [20, 20])
        with self.assertRaises(ValueError):
            parse_counts('20,0')

    def test_threshold(self):
        self.assertEqual(parse_threshold('0.005'), 0.005)
        self.assertIsNone(parse_threshold('off'))
        with self.assertRaises(ValueError):
            parse_threshold('-1')

    def test_schedule(self):
        self.assertEqual(parse_schedule('0.1'), 0.1)
        self.assertIsNone(parse_schedule('none'))
        self.assertEqual(parse_schedule('0:0.1,10:0.02'), [(0, 0.1), (10, 0.02)])
        with self.assertRaises(ValueError):
            parse_schedule('0:off')

    def test_domain(self):
        lows, highs = parse_domain('-1:1,0:20')
        self.assertEqual((lows, highs), ([-1.0, 0.0], [1.0, 20.0]))
        with self.assertRaises(ValueError):
            parse_domain('2:1')

    def test_assignments_and_ranges(self):
        self.assertEqual(parse_assignments('vown=0, vint=-10'), {'vown': 0.0, 'vint': -10.0})
        self.assertEqual(parse_ranges('h=-400:400'), {'h': (-400.0, 400.0)})
        with self.assertRaises(ValueError):
            parse_assignments('vown')

    def test_labels(self):
        self.assertEqual(parse_labels('COC, CL1500'), ['COC', 'CL1500'])


if __name__ == '__main__':
    unittest.main()
