import unittest

import numpy as np

from cellcheck.dynamics import (
    ADVISORIES,
    ContinuumWorld,
    VcasModel,
    continuum_outcomes,
    get_model,
    interval_image,
    vcas_outcomes,
    vcas_unsafe,
)
from cellcheck.dynamics.vcas import G
from cellcheck.exceptions import ModelError, UnknownActionError


class TestIntervalImage(unittest.TestCase):
    def test_mixed_signs(self):
        matrix = np.array([[1.0, -2.0], [0.0, 3.0]])
        lo, hi = interval_image(matrix, np.array([1.0, 0.0]),
                                np.array([0.0, -1.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(lo, [1.0 + 0.0 - 2.0, -3.0])
        np.testing.assert_allclose(hi, [1.0 + 1.0 + 2.0, 3.0])

    def test_mixed_rows_are_widened(self):
        matrix = np.array([[1.0, -1.0, 1.0], [0.0, 1.0, 0.0]])
        offset = np.array([0.1, 0.3])
        lows = np.array([1e3 + 0.1, -0.7, 0.2])
        highs = lows.copy()
        lo, hi = interval_image(matrix, offset, lows, highs)
        point = matrix @ lows + offset
        self.assertLess(lo[0], point[0])
        self.assertGreater(hi[0], point[0])
        # Single-term rows stay exact
        self.assertEqual(lo[1], hi[1])
        self.assertEqual(lo[1], point[1])



class TestContinuumWorld(unittest.TestCase):
    def setUp(self):
        self.world = ContinuumWorld()

    def test_outcome_table(self):
        outs = self.world.outcomes([5, 5], [6, 6], 0, 3)
        self.assertEqual(len(outs), 4)
        self.assertAlmostEqual(outs[0].probability, 0.7)
        for out in outs[1:]:
            self.assertAlmostEqual(out.probability, 0.1)
        # Intended move (right) comes first
        np.testing.assert_array_equal(outs[0].lows, [6, 5])
        np.testing.assert_array_equal(outs[0].highs, [7, 6])
        np.testing.assert_allclose(self.world.probability_sums(), [[1, 1, 1, 1]])

    def test_action_label(self):
        outs = continuum_outcomes(self.world, [5, 5], [6, 6], 'up')
        np.testing.assert_array_equal(outs[0].lows, [5, 6])
        with self.assertRaises(UnknownActionError):
            continuum_outcomes(self.world, [5, 5], [6, 6], 'jump')
        with self.assertRaises(UnknownActionError):
            self.world.outcomes([5, 5], [6, 6], 0, 4)

    def test_clamp_at_wall(self):
        out = self.world.outcomes([19.5, 5], [20, 6], 0, 3)[0]
        np.testing.assert_array_equal(out.lows, [20, 5])
        np.testing.assert_array_equal(out.highs, [20, 6])
        self.assertFalse(out.escaped)

    def test_safe_boundary(self):
        world = ContinuumWorld(boundary='safe')
        outs = world.outcomes([19.5, 5], [20, 6], 0, 3)
        # The intended move leaves the field entirely and is dropped
        self.assertEqual(len(outs), 3)
        self.assertAlmostEqual(sum(o.probability for o in outs), 0.3)
        partial = world.outcomes([19, 5], [20, 6], 0, 3)[0]
        self.assertTrue(partial.escaped)
        np.testing.assert_array_equal(partial.highs, [20, 6])

    def test_unsafe_positive_overlap(self):
        self.assertTrue(self.world.unsafe(np.array([7.5, 7.5]), np.array([8.5, 8.5])))
        self.assertFalse(self.world.unsafe(np.array([7.0, 7.0]), np.array([8.0, 8.0])))
        self.assertTrue(self.world.inside_unsafe(np.array([9.0, 9.0]), np.array([10.0, 10.0])))
        self.assertFalse(self.world.inside_unsafe(np.array([7.5, 9.0]), np.array([8.5, 10.0])))

    def test_goal_absorbing(self):
        self.assertTrue(self.world.absorbing_safe(np.array([19.0, 19.0]), np.array([20.0, 20.0])))
        self.assertFalse(self.world.absorbing_safe(np.array([18.5, 19.0]), np.array([19.5, 20.0])))

    def test_points_half_open(self):
        self.assertTrue(self.world.point_unsafe([8.0, 8.0]))
        self.assertFalse(self.world.point_unsafe([12.0, 10.0]))
        self.assertTrue(self.world.point_absorbing([20.0, 20.0]))
        states = np.array([[8.0, 8.0], [12.0, 10.0], [19.5, 19.5], [1.0, 1.0]])
        np.testing.assert_array_equal(self.world.point_unsafe_batch(states), [True, False, False, False])
        np.testing.assert_array_equal(self.world.point_absorbing_batch(states), [False, False, True, False])

    def test_no_pit(self):
        world = ContinuumWorld(pit=None)
        self.assertFalse(world.unsafe(np.array([0.0, 0.0]), np.array([20.0, 20.0])))
        self.assertFalse(world.point_unsafe_batch(np.array([[10.0, 10.0]]))[0])

    def test_point_outcomes(self):
        succ = self.world.point_outcomes([20.0, 3.0], 0, 3)
        self.assertEqual(len(succ), 4)
        p, nxt, mode = succ[0]
        self.assertAlmostEqual(p, 0.7)
        np.testing.assert_array_equal(nxt, [20.0, 3.0])
        self.assertEqual(mode, 0)
        safe = ContinuumWorld(boundary='safe').point_outcomes([20.0, 3.0], 0, 3)
        self.assertIsNone(safe[0][1])

    def test_sample_step_frequencies(self):
        rng = np.random.default_rng(7)
        n = 20000
        states = np.tile([5.0, 5.0], (n, 1))
        nxt, modes, escaped = self.world.sample_step(states, np.zeros(n, dtype=int),
                                                     np.zeros(n, dtype=int), rng)
        self.assertFalse(escaped.any())
        moved_up = np.mean(np.all(nxt == [5.0, 6.0], axis=1))
        self.assertAlmostEqual(moved_up, 0.7, delta=0.02)

    def test_images_contain_point_successors(self):
        rng = np.random.default_rng(12)
        world = ContinuumWorld(step=0.75)
        pairs = 0
        for _ in range(2500):
            lows = rng.uniform(0, 19, size=2)
            highs = np.minimum(lows + rng.uniform(0.01, 3, size=2), 20.0)
            action = int(rng.integers(4))
            images = world.outcomes(lows, highs, 0, action)
            xs = rng.uniform(lows, highs, size=(40, 2))
            for out, (_, nxt, _, _) in zip(images, world.successors_batch(xs, 0, action)):
                inside = np.all((nxt >= out.lows) & (nxt <= out.highs), axis=1)
                self.assertTrue(inside.all(), f"successor outside image of {lows}..{highs}")
                pairs += nxt.shape[0]
        self.assertEqual(pairs, 2500 * 40 * 4)

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            ContinuumWorld(p_intended=1.5)
        with self.assertRaises(ValueError):
            ContinuumWorld(boundary='wrap')


class TestVcasModel(unittest.TestCase):
    def setUp(self):
        self.model = VcasModel()

    def test_layout(self):
        self.assertEqual(self.model.state_labels, ('h', 'vown', 'vint', 'tau'))
        self.assertEqual(self.model.num_modes, 9)
        self.assertEqual(self.model.num_actions, 9)
        np.testing.assert_allclose(self.model.probability_sums(), np.ones((9, 9)))

    def test_point_successor(self):
        x = [900.0, -5.0, 5.0, 20.0]
        succ = self.model.point_outcomes(x, self.model.mode_index('COC'), ADVISORIES.index('COC'))
        self.assertEqual(len(succ), 9)
        # Ownship-major ordering: outcome 7 is (+g/3 ownship, 0 intruder)
        p, nxt, mode = succ[7]
        self.assertAlmostEqual(p, 0.33 / 3)
        self.assertAlmostEqual(nxt[0], 910.0 - G / 6, places=9)
        self.assertAlmostEqual(nxt[0], 904.633, places=3)
        self.assertAlmostEqual(nxt[1], -5.0 + G / 3)
        self.assertAlmostEqual(nxt[2], 5.0)
        self.assertAlmostEqual(nxt[3], 19.0)
        self.assertEqual(mode, 0)

    def test_next_mode_is_advisory(self):
        outs = vcas_outcomes(self.model, [0, 0, 0, 5], [10, 1, 1, 6], 'COC', 'CL1500')
        self.assertTrue(all(o.mode == self.model.mode_index('CL1500') for o in outs))
        with self.assertRaises(UnknownActionError):
            vcas_outcomes(self.model, [0, 0, 0, 5], [10, 1, 1, 6], 'COC', 'CLIMB')
        with self.assertRaises(ModelError):
            vcas_outcomes(self.model, [0, 0, 0, 5], [10, 1, 1, 6], 'CLIMB', 'COC')

    def test_images_contain_point_successors(self):
        rng = np.random.default_rng(11)
        pairs = 0
        for _ in range(2500):
            lows = rng.uniform([-500, -50, -50, 2], [500, 50, 50, 30])
            highs = lows + rng.uniform([1, 0.5, 0.5, 0.5], [100, 10, 10, 2])
            mode = int(rng.integers(9))
            action = int(rng.integers(9))
            images = self.model.outcomes(lows, highs, mode, action)
            for out in images:
                expected = (highs[0] - lows[0]) + (highs[1] - lows[1]) + (highs[2] - lows[2])
                self.assertAlmostEqual(out.highs[0] - out.lows[0], expected, delta=1e-9)
                np.testing.assert_allclose(out.highs[1:] - out.lows[1:], (highs - lows)[1:], atol=1e-9)
            xs = rng.uniform(lows, highs, size=(40, 4))
            for out, (_, nxt, _, _) in zip(images, self.model.successors_batch(xs, mode, action)):
                inside = np.all((nxt >= out.lows) & (nxt <= out.highs), axis=1)
                self.assertTrue(inside.all(), f"successor outside image of {lows}..{highs}")
                pairs += nxt.shape[0]
        self.assertEqual(pairs, 2500 * 40 * 9)

    def test_fixed_rates_fold_into_offset(self):
        sliced = VcasModel(fixed={'vown': -5.0, 'vint': 5.0})
        self.assertEqual(sliced.state_labels, ('h', 'tau'))
        self.assertEqual((sliced.h_index, sliced.tau_index), (0, 1))
        full = self.model.point_outcomes([900.0, -5.0, 5.0, 20.0], 0, 0)
        part = sliced.point_outcomes([900.0, 20.0], 0, 0)
        for (p_full, x_full, _), (p_part, x_part, _) in zip(full, part):
            self.assertAlmostEqual(p_full, p_part)
            self.assertAlmostEqual(x_full[0], x_part[0])
            self.assertAlmostEqual(x_full[3], x_part[1])

    def test_only_rates_can_be_fixed(self):
        with self.assertRaises(ModelError):
            VcasModel(fixed={'tau': 3.0})

    def test_unknown_mode(self):
        with self.assertRaises(UnknownActionError):
            VcasModel(modes=['COC', 'HOVER'])

    def test_unsafe_predicates(self):
        model = VcasModel(fixed={'vown': 0.0, 'vint': 0.0})
        self.assertTrue(vcas_unsafe(model, [-50, 0], [50, 1]))
        self.assertTrue(vcas_unsafe(model, [90, 0.5], [300, 1.5]))
        self.assertFalse(vcas_unsafe(model, [-50, 1], [50, 2]))
        self.assertFalse(vcas_unsafe(model, [100, 0], [200, 1]))
        self.assertTrue(model.inside_unsafe(np.array([-50.0, 0.0]), np.array([50.0, 1.0])))
        self.assertTrue(model.absorbing_safe(np.array([200.0, 0.0]), np.array([300.0, 1.0])))
        self.assertFalse(model.absorbing_safe(np.array([-50.0, 0.0]), np.array([50.0, 1.0])))

    def test_flat_tau_layers(self):
        model = VcasModel(fixed={'vown': 0.0, 'vint': 0.0})
        self.assertTrue(model.absorbing_safe(np.array([200.0, 0.0]), np.array([300.0, 0.0])))
        self.assertFalse(model.absorbing_safe(np.array([200.0, 1.0]), np.array([300.0, 1.0])))
        self.assertFalse(model.inside_unsafe(np.array([-50.0, 1.0]), np.array([50.0, 1.0])))
        self.assertFalse(vcas_unsafe(model, [-50, 1], [50, 1]))
        self.assertTrue(model.inside_unsafe(np.array([-50.0, 0.0]), np.array([50.0, 0.0])))

    def test_domain_top_face_belongs_to_the_cell(self):
        fixed = {'vown': 0.0, 'vint': 0.0}
        model = VcasModel(fixed=fixed, ranges={'h': (-100.0, 100.0), 'tau': (0.0, 1.0)})
        self.assertFalse(model.inside_unsafe(np.array([-50.0, 0.0]), np.array([50.0, 1.0])))
        self.assertFalse(model.inside_unsafe(np.array([-50.0, 0.0]), np.array([100.0, 0.5])))
        self.assertTrue(model.inside_unsafe(np.array([-50.0, 0.0]), np.array([50.0, 0.5])))
        tall = VcasModel(fixed=fixed, ranges={'h': (-400.0, 400.0), 'tau': (0.0, 1.0)})
        self.assertFalse(tall.absorbing_safe(np.array([200.0, 0.0]), np.array([300.0, 1.0])))
        self.assertTrue(tall.absorbing_safe(np.array([200.0, 0.0]), np.array([300.0, 0.5])))
        self.assertTrue(tall.inside_unsafe(np.array([-50.0, 0.0]), np.array([100.0, 0.5])))

    def test_point_predicates(self):
        model = VcasModel(fixed={'vown': 0.0, 'vint': 0.0})
        self.assertTrue(model.point_unsafe([99.0, 0.5]))
        self.assertFalse(model.point_unsafe([100.0, 0.5]))
        self.assertFalse(model.point_unsafe([0.0, 1.0]))
        self.assertTrue(model.point_absorbing([150.0, 0.0]))
        states = np.array([[99.0, 0.5], [100.0, 0.5], [0.0, 1.0]])
        np.testing.assert_array_equal(model.point_unsafe_batch(states), [True, False, False])
        np.testing.assert_array_equal(model.point_absorbing_batch(states), [False, True, False])


class TestGetModel(unittest.TestCase):
    def test_by_name(self):
        self.assertIsInstance(get_model('continuum'), ContinuumWorld)
        self.assertIsInstance(get_model('VCAS', fixed={'vint': 0.0}), VcasModel)

    def test_unknown(self):
        with self.assertRaises(ValueError):
            get_model('pendulum')


if __name__ == '__main__':
    unittest.main()
