import io
import json
import os
import tempfile
import unittest

import numpy as np

from cellcheck import shipped_network
from cellcheck.baseline import MonteCarloEstimate, TabularPolicy, cell_centers, exact_check
from cellcheck.checker import CheckConfig, check, check_layered
from cellcheck.dynamics import ContinuumWorld, VcasModel
from cellcheck.exceptions import ExportFormatError
from cellcheck.exporters import (
    FORMAT_VERSION,
    FieldExporter,
    compare_frame,
    mc_frame,
    read_frame,
    read_header,
    read_partition,
    read_table,
    save_frame,
    tau_curve_frame,
    write_table,
)


class TestFieldExporter(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.net = shipped_network('continuum')
        cls.world = ContinuumWorld()
        cls.field = check(cls.net, cls.world,
                          CheckConfig(min_size=[1, 1], transition_threshold=0.1, convergence_eps=1e-8))
        cls.exporter = FieldExporter(cls.net.action_labels, cls.world.state_labels)

    def test_records(self):
        stream = io.StringIO()
        count = self.exporter.write(self.field, stream, extra={'net': 'continuum.net'})
        lines = stream.getvalue().splitlines()
        self.assertEqual(count, len(lines))
        self.assertEqual(count, self.field.num_leaves() + 2)
        header = json.loads(lines[0])
        self.assertEqual(header['format'], FORMAT_VERSION)
        self.assertEqual(header['kind'], 'field')
        self.assertEqual(header['net'], 'continuum.net')
        self.assertEqual(header['model']['pit'], [[8.0, 8.0], [12.0, 12.0]])
        cell = json.loads(lines[1])
        self.assertEqual(cell['type'], 'cell')
        self.assertTrue(set(cell['actions']) <= {'up', 'down', 'left', 'right'})
        stats = json.loads(lines[-1])
        self.assertEqual(stats['type'], 'stats')
        self.assertEqual(stats['leaves_final'], self.field.num_leaves())

    def test_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'field.jsonl')
            self.exporter.save(self.field, path)
            loaded = read_partition(path)
            header = read_header(path)
        self.assertIsNone(loaded.model)
        self.assertEqual(header['state_labels'], ['x', 'y'])
        self.assertEqual(loaded.converged, self.field.converged)
        self.assertEqual(loaded.stats.to_dict(), self.field.stats.to_dict())
        original = self.field.trees[0]
        rebuilt = loaded.trees[0]
        self.assertEqual(sorted(rebuilt.leaves), sorted(original.leaves))
        for cell_id, cell in original.leaves.items():
            other = rebuilt.leaves[cell_id]
            np.testing.assert_array_equal(other.lows, cell.lows)
            np.testing.assert_array_equal(other.highs, cell.highs)
            self.assertEqual(other.action_set, cell.action_set)
            self.assertEqual(other.prob, cell.prob)
            self.assertEqual(other.in_unsafe, cell.in_unsafe)
        rng = np.random.default_rng(0)
        for x in rng.uniform(0, 20, size=(100, 2)):
            self.assertEqual(loaded.prob_at(x), self.field.prob_at(x))

    def test_bad_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            empty = os.path.join(tmp, 'empty.jsonl')
            open(empty, 'w').close()
            with self.assertRaises(ExportFormatError):
                read_partition(empty)
            other = os.path.join(tmp, 'other.jsonl')
            with open(other, 'w') as f:
                f.write(json.dumps({'type': 'header', 'format': 'something-else'}) + '\n')
            with self.assertRaises(ExportFormatError):
                read_partition(other)
            with self.assertRaises(ExportFormatError):
                read_header(other)
            broken = os.path.join(tmp, 'broken.jsonl')
            with open(broken, 'w') as f:
                f.write('{not json\n')
            with self.assertRaises(ExportFormatError):
                read_partition(broken)


class TestLayeredExport(unittest.TestCase):
    def test_round_trip(self):
        net = shipped_network('vcas_slice')
        model = VcasModel(fixed={'vown': 0.0, 'vint': 0.0},
                          ranges={'h': (-400.0, 400.0), 'tau': (0.0, 4.0)})
        field = check_layered(net, model, CheckConfig(min_size=[50, 1]))
        exporter = FieldExporter(net.action_labels, model.state_labels, model.mode_labels)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'layered.jsonl')
            exporter.save(field, path)
            loaded = read_partition(path)
        self.assertTrue(loaded.layered)
        self.assertEqual(len(loaded.layers), 5)
        self.assertEqual(loaded.tau_index, 1)
        for h in (-350.0, -20.0, 0.0, 120.0, 390.0):
            for tau in range(5):
                for mode in (0, 3):
                    self.assertEqual(loaded.prob_at([h, tau], mode), field.prob_at([h, tau], mode))

        frame = tau_curve_frame(field)
        self.assertEqual(list(frame.columns), ['tau', 'max_prob'])
        self.assertEqual(len(frame), 5)


class TestTables(unittest.TestCase):
    def test_table_round_trip(self):
        world = ContinuumWorld(size=4.0, pit=((1, 1), (2, 2)), goal=((3, 3), (4, 4)))
        grid = cell_centers([0, 0], [4, 4], [4, 4])
        policy = TabularPolicy(grid, np.arange(16).reshape(4, 4) % 4, world.action_labels)
        exact = exact_check(policy, world)
        with tempfile.TemporaryDirectory() as tmp:
            plain = os.path.join(tmp, 'table.jsonl')
            write_table(policy, plain, world.state_labels)
            loaded, none, header = read_table(plain)
            self.assertIsNone(none)
            self.assertEqual(header['kind'], 'table')
            np.testing.assert_array_equal(loaded.actions, policy.actions)

            solved = os.path.join(tmp, 'exact.jsonl')
            write_table(policy, solved, world.state_labels, exact=exact)
            _, exact_loaded, header = read_table(solved)
        self.assertEqual(header['kind'], 'exact')
        self.assertEqual(exact_loaded.iterations, exact.iterations)
        np.testing.assert_array_equal(exact_loaded.values, exact.values)

    def test_field_is_not_a_table(self):
        net = shipped_network('continuum')
        field = check(net, ContinuumWorld(), CheckConfig(min_size=[5, 5]))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'field.jsonl')
            FieldExporter(net.action_labels).save(field, path)
            with self.assertRaises(ExportFormatError):
                read_table(path)


class TestFrames(unittest.TestCase):
    def setUp(self):
        self.states = np.array([[1.0, 2.0], [3.0, 4.0]])
        self.estimates = [MonteCarloEstimate(0.5, 0.05, 100, 50), MonteCarloEstimate(0.0, 0.0, 100, 0)]

    def test_mc_frame(self):
        df = mc_frame(self.states, [0, 0], self.estimates, ('x', 'y'), ('default',))
        self.assertEqual(list(df.columns), ['x', 'y', 'mode', 'p_mc', 'stderr', 'n'])
        self.assertEqual(df['mode'].tolist(), ['default', 'default'])

    def test_compare_flags_violations(self):
        with self.assertLogs('cellcheck.exporters.csv', level='WARNING'):
            df = compare_frame(self.states, [0, 0], [0.3, 0.0], self.estimates, ('x', 'y'),
                               p_exact=[0.4, 0.0])
        self.assertEqual(list(df.columns),
                         ['x', 'y', 'mode', 'p_check', 'p_mc', 'stderr', 'n', 'p_exact', 'bound_ok'])
        self.assertEqual(df['bound_ok'].tolist(), [False, True])

    def test_certain_hit_within_rounding(self):
        certain = [MonteCarloEstimate(1.0, 0.0, 100, 100), MonteCarloEstimate(1.0, 0.0, 100, 100)]
        df = compare_frame(self.states, [0, 0], [0.7 + 0.1 + 0.1 + 0.1, 0.999], certain)
        self.assertEqual(df['bound_ok'].tolist(), [True, False])

    def test_save_and_read(self):
        df = compare_frame(self.states, [0, 0], [0.7, 0.1], self.estimates)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'compare.csv')
            save_frame(df, path)
            loaded = read_frame(path)
        self.assertEqual(list(loaded.columns), list(df.columns))
        np.testing.assert_array_equal(loaded['p_check'].to_numpy(), [0.7, 0.1])
        self.assertTrue(loaded['bound_ok'].all())

    def test_tau_curve_needs_layers(self):
        field = check(shipped_network('continuum'), ContinuumWorld(), CheckConfig(min_size=[5, 5]))
        with self.assertRaises(ValueError):
            tau_curve_frame(field)


if __name__ == '__main__':
    unittest.main()
