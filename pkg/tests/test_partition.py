import unittest

import numpy as np

from cellcheck.dynamics.base import point_in_box
from cellcheck.exceptions import (
    DegenerateSplitError,
    DomainError,
    EmptySplitError,
    NotALeafError,
    PartitionError,
)
from cellcheck.partition import PartitionTree, box_intersects, refine_unsafe


def _box(lows, highs):
    return np.asarray(lows, dtype=float), np.asarray(highs, dtype=float)


class TestBoxIntersects(unittest.TestCase):
    def test_touching_face_does_not_overlap(self):
        self.assertFalse(box_intersects(*_box([0, 0], [1, 1]), *_box([1, 0], [2, 1])))

    def test_positive_overlap(self):
        self.assertTrue(box_intersects(*_box([0, 0], [1, 1]), *_box([0.5, 0.5], [2, 2])))

    def test_flat_box_on_face_overlaps(self):
        # A point image sitting on a shared face meets both cells
        self.assertTrue(box_intersects(*_box([0, 0], [1, 1]), *_box([1, 0.5], [1, 0.5])))
        self.assertTrue(box_intersects(*_box([1, 0], [2, 1]), *_box([1, 0.5], [1, 0.5])))


class TestPartitionTree(unittest.TestCase):
    def setUp(self):
        self.tree = PartitionTree([0, 0], [4, 4])

    def test_split_children_cover_parent(self):
        ids = self.tree.split(0, [0, 1])
        self.assertEqual(len(ids), 4)
        self.assertEqual(len(self.tree), 4)
        self.assertAlmostEqual(self.tree.total_volume(), 16.0)
        self.assertNotIn(0, self.tree.leaves)
        # Child j takes the upper half of dims[t] iff bit t of j is set
        np.testing.assert_array_equal(self.tree[ids[1]].lows, [2, 0])
        np.testing.assert_array_equal(self.tree[ids[2]].lows, [0, 2])

    def test_children_inherit(self):
        root = self.tree.root
        root.action_set = 0b101
        root.prob = 0.25
        for i in self.tree.split(0, [1]):
            child = self.tree[i]
            self.assertEqual(child.action_set, 0b101)
            self.assertEqual(child.candidates, 0b101)
            self.assertEqual(child.prob, 0.25)
            self.assertEqual(child.parent, 0)
            self.assertEqual(child.depth, 1)

    def test_ids_are_stable(self):
        first = self.tree.split(0, [0])
        second = self.tree.split(first[0], [1])
        self.assertEqual(first, [1, 2])
        self.assertEqual(second, [3, 4])
        self.assertTrue(self.tree.is_descendant(4, 1))
        self.assertFalse(self.tree.is_descendant(4, 2))

    def test_version_bumps(self):
        self.tree.split(0, [0])
        self.assertEqual(self.tree.version, 1)

    def test_split_errors(self):
        ids = self.tree.split(0, [0])
        with self.assertRaises(NotALeafError):
            self.tree.split(0, [1])
        with self.assertRaises(EmptySplitError):
            self.tree.split(ids[0], [])
        with self.assertRaises(PartitionError):
            self.tree.split(ids[0], [5])

    def test_degenerate_split(self):
        tree = PartitionTree([1.0], [np.nextafter(1.0, 2.0)])
        with self.assertRaises(DegenerateSplitError):
            tree.split(0, [0])

    def test_locate_half_open(self):
        left, right = self.tree.split(0, [0])
        self.assertEqual(self.tree.locate([1.9, 1]), left)
        self.assertEqual(self.tree.locate([2.0, 1]), right)
        # The domain's upper face belongs to the last cell
        self.assertEqual(self.tree.locate([4.0, 4.0]), right)

    def test_locate_outside(self):
        with self.assertRaises(DomainError):
            self.tree.locate([4.5, 1])

    def test_overlapping(self):
        ids = self.tree.split(0, [0, 1])
        found = sorted(self.tree.overlapping([1, 1], [3, 1.5]))
        self.assertEqual(found, sorted([ids[0], ids[1]]))
        # Touching the middle line from below reaches only the lower cells
        found = sorted(self.tree.overlapping([0.5, 1], [1.5, 2]))
        self.assertEqual(found, [ids[0]])

    def test_overlapping_misses_domain(self):
        with self.assertRaises(DomainError):
            self.tree.overlapping([5, 5], [6, 6])

    def test_random_splits_tile_the_domain(self):
        rng = np.random.default_rng(21)
        lows, highs = np.array([0.0, 0.0, -2.0]), np.array([8.0, 4.0, 2.0])
        for _ in range(5):
            tree = PartitionTree(lows, highs)
            for _ in range(60):
                cell_id = int(rng.choice(sorted(tree.leaves)))
                dims = [d for d in range(3) if rng.random() < 0.5] or [int(rng.integers(3))]
                tree.split(cell_id, dims)
            leaves = list(tree.iter_leaves())
            self.assertEqual(tree.total_volume(), 128.0)
            for i, a in enumerate(leaves):
                for b in leaves[i + 1:]:
                    self.assertFalse(box_intersects(a.lows, a.highs, b.lows, b.highs))

            # Grid points land on split faces and the domain's upper faces too
            steps = rng.integers(0, 33, size=(300, 3)) / 32.0
            points = np.vstack([lows + steps * (highs - lows), rng.uniform(lows, highs, size=(300, 3))])
            for x in points:
                owners = [c.id for c in leaves if point_in_box(x, c.lows, c.highs, highs)]
                self.assertEqual(owners, [tree.locate(x)])

            for _ in range(200):
                qlo = rng.uniform(lows, highs)
                qhi = np.minimum(qlo + rng.uniform(0, 3, size=3) * (rng.random(3) < 0.8), highs)
                expected = sorted(c.id for c in leaves if box_intersects(c.lows, c.highs, qlo, qhi))
                self.assertEqual(sorted(tree.overlapping(qlo, qhi)), expected)


    def test_uniform(self):
        tree = PartitionTree.uniform([0, 0], [4, 2], [1, 1])
        self.assertEqual(len(tree), 8)
        for cell in tree.iter_leaves():
            np.testing.assert_allclose(cell.widths, [1, 1])

    def test_from_leaves_round_trip(self):
        tree = PartitionTree.uniform([0, 0], [4, 4], [2, 2])
        tree.split(sorted(tree.leaves)[0], [0])
        for i, cell in enumerate(tree.iter_leaves()):
            cell.action_set = 1 << (i % 3)
            cell.prob = i / 10
        rebuilt = PartitionTree.from_leaves([0, 0], [4, 4], list(tree.iter_leaves()))
        self.assertEqual(sorted(rebuilt.leaves), sorted(tree.leaves))
        for cell_id, cell in tree.leaves.items():
            other = rebuilt.leaves[cell_id]
            np.testing.assert_array_equal(other.lows, cell.lows)
            np.testing.assert_array_equal(other.highs, cell.highs)
            self.assertEqual(other.action_set, cell.action_set)
            self.assertEqual(other.prob, cell.prob)
        point = [0.5, 0.5]
        self.assertEqual(rebuilt.locate(point), tree.locate(point))

    def test_from_leaves_missing_leaf(self):
        tree = PartitionTree.uniform([0, 0], [4, 4], [2, 2])
        with self.assertRaises(PartitionError):
            PartitionTree.from_leaves([0, 0], [4, 4], list(tree.iter_leaves())[1:])


class TestRefineUnsafe(unittest.TestCase):
    def test_hugs_unsafe_box(self):
        tree = PartitionTree([0, 0], [8, 8])
        pit_lo, pit_hi = np.array([2.0, 2.0]), np.array([4.0, 4.0])

        def unsafe(lo, hi):
            return box_intersects(lo, hi, pit_lo, pit_hi)

        def inside(lo, hi):
            return bool(np.all(lo >= pit_lo) and np.all(hi <= pit_hi))

        created = refine_unsafe(tree, unsafe, inside, [1, 1])
        self.assertTrue(created)
        for cell in tree.iter_leaves():
            if unsafe(cell.lows, cell.highs):
                self.assertTrue(inside(cell.lows, cell.highs) or np.all(cell.widths <= 1))

    def test_no_unsafe_no_splits(self):
        tree = PartitionTree([0, 0], [8, 8])
        self.assertEqual(refine_unsafe(tree, lambda lo, hi: False, lambda lo, hi: False, [1, 1]), [])
        self.assertEqual(len(tree), 1)


if __name__ == '__main__':
    unittest.main()
