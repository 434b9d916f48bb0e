import unittest

import numpy as np

from cellcheck import shipped_network
from cellcheck.adaptive import (
    SplitStrategy,
    VerifierStats,
    adaptive_verify,
    reverify,
    strategy_dims,
    uniform_verify,
)
from cellcheck.partition import PartitionTree
from cellcheck.verifier import IntervalVerifier, mask_size

DOMAIN = ([0.0, 0.0], [20.0, 20.0])


class TestStrategyDims(unittest.TestCase):
    def test_all_agree(self):
        self.assertEqual(strategy_dims([2, 2, 2, 2], 2), set())

    def test_disagreement_along_one_dim(self):
        # Corners 0 and 1 differ in dimension 0 only
        self.assertEqual(strategy_dims([0, 1, 0, 1], 2), {0})
        self.assertEqual(strategy_dims([0, 0, 1, 1], 2), {1})

    def test_both_dims(self):
        self.assertEqual(strategy_dims([0, 1, 1, 1], 2), {0, 1})

    def test_wrong_length(self):
        with self.assertRaises(ValueError):
            strategy_dims([0, 1, 0], 2)


class TestAdaptiveVerify(unittest.TestCase):
    def setUp(self):
        self.net = shipped_network('continuum')

    def test_leaves_carry_actions(self):
        tree, stats = adaptive_verify(self.net, *DOMAIN, [0.5, 0.5])
        self.assertAlmostEqual(tree.total_volume(), 400.0)
        for cell in tree.iter_leaves():
            self.assertNotEqual(cell.action_set, 0)
            if mask_size(cell.action_set) > 1:
                np.testing.assert_array_less(cell.widths, [0.5 + 1e-12, 0.5 + 1e-12])
        self.assertEqual(stats.leaves_total, len(tree))
        self.assertEqual(stats.leaves_singleton + stats.leaves_multi, stats.leaves_total)

    def test_actions_are_sound(self):
        tree, _ = adaptive_verify(self.net, *DOMAIN, [0.5, 0.5])
        rng = np.random.default_rng(3)
        xs = rng.uniform(0, 20, size=(2000, 2))
        for x, a in zip(xs, self.net.best_action_batch(xs)):
            cell = tree[tree.locate(x)]
            self.assertTrue((cell.action_set >> int(a)) & 1)

    def test_call_count_ordering(self):
        min_size = [0.25, 0.25]
        _, informed = adaptive_verify(self.net, *DOMAIN, min_size, SplitStrategy.INFORMED)
        _, split_all = adaptive_verify(self.net, *DOMAIN, min_size, SplitStrategy.ALL)
        _, uniform = uniform_verify(self.net, *DOMAIN, min_size)
        self.assertEqual(uniform.verifier_calls, 80 * 80)
        self.assertLessEqual(informed.verifier_calls, split_all.verifier_calls)
        self.assertLessEqual(split_all.verifier_calls, uniform.verifier_calls)
        self.assertLessEqual(2 * informed.verifier_calls, uniform.verifier_calls)
        self.assertGreater(informed.corner_eval_batches, 0)
        self.assertEqual(split_all.corner_eval_batches, 0)

    def test_refines_existing_tree(self):
        tree = PartitionTree.uniform(*DOMAIN, [10.0, 10.0])
        tree, _ = adaptive_verify(self.net, None, None, [1.0, 1.0], tree=tree)
        for cell in tree.iter_leaves():
            self.assertNotEqual(cell.action_set, 0)

    def test_bad_min_size(self):
        with self.assertRaises(ValueError):
            adaptive_verify(self.net, *DOMAIN, [0.5])
        with self.assertRaises(ValueError):
            adaptive_verify(self.net, *DOMAIN, [0.0, 1.0])

    def test_unknown_strategy(self):
        with self.assertRaises(ValueError):
            adaptive_verify(self.net, *DOMAIN, [1.0, 1.0], 'random')


class TestReverify(unittest.TestCase):
    def test_child_subset_of_parent(self):
        net = shipped_network('continuum')
        tree, _ = adaptive_verify(net, *DOMAIN, [2.0, 2.0])
        verifier = IntervalVerifier(net)
        multi = [c for c in tree.iter_leaves() if mask_size(c.action_set) > 1]
        self.assertTrue(multi)
        parent = multi[0]
        for i in tree.split(parent.id, [0, 1]):
            child = tree[i]
            mask = reverify(verifier, child)
            self.assertEqual(mask & ~parent.action_set, 0)
        self.assertEqual(verifier.calls, 4)


class TestVerifierStats(unittest.TestCase):
    def test_merge(self):
        a = VerifierStats(verifier_calls=3, leaves_total=2, wall_time=0.5)
        b = VerifierStats(verifier_calls=4, leaves_total=5, wall_time=0.25)
        merged = a.merge(b)
        self.assertEqual(merged.verifier_calls, 7)
        self.assertEqual(merged.leaves_total, 7)
        self.assertEqual(merged.to_dict(), b.merge(a).to_dict())


if __name__ == '__main__':
    unittest.main()
