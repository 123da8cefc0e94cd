import csv
import os
import random
import tempfile
import unittest
from unittest import mock

import numpy as np

from profgpr import bench
from profgpr.bench import (MethodSpec, FitSettings, RecordWriter, SweepRecord, directional_summary, drop_torn_tail,
                           method_seed, outlier_slope, read_records, read_sidecar, rmse, rmse_histograms, run_method,
                           run_sweep, summarize, summarize_runtime, worst_fits, write_runtime, write_worst_bundle)
from profgpr.inference import ChainConfig
from profgpr.profiles import Dataset, Regime, desk_space, sweep_space

CHAIN = ChainConfig(n_burn=100, n_samples=200, thin=2, adapt_interval=50)
SETTINGS = FitSettings(restarts=1, grid_size=30)


def _record(case=0, method='eb-cp', regime='hmode', rmse=0.1, n_outliers=0, sigma_frac=0.1, runtime_s=1.0):
    return SweepRecord(case=case, method=MethodSpec.parse(method), regime=Regime.parse(regime),
                       sigma_frac=sigma_frac, shift_frac=0.0, n_outliers=n_outliers, outlier_scale=2.0, n_edge=0.05,
                       w_ped=0.015, w_itb=None, n_itb=None, seed=case, rmse=rmse, runtime_s=runtime_s)


class TestBasics(unittest.TestCase):

    def test_rmse(self):
        """RMSE values and argument checks
        """
        self.assertEqual(rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), 0.0)
        self.assertAlmostEqual(rmse([0.0, 0.0], [3.0, 4.0]), np.sqrt(12.5), places=14)
        with self.assertRaises(ValueError):
            rmse([1.0], [1.0, 2.0])
        with self.assertRaises(ValueError):
            rmse([], [])

    def test_methods(self):
        """Method tags and seeds
        """
        self.assertIs(MethodSpec.parse('EB-CP'), MethodSpec.EB_CHANGEPOINT)
        self.assertEqual([m.is_full_bayes for m in MethodSpec], [False, False, True, True])
        with self.assertRaises(ValueError):
            MethodSpec.parse('fb-gibbs')
        seeds = {method_seed(12345, m) for m in MethodSpec}
        self.assertEqual(len(seeds), 4)
        self.assertEqual(method_seed(12345, 'fb-cp-t'), method_seed(12345, MethodSpec.FB_CHANGEPOINT_STUDENTT))
        self.assertNotEqual(method_seed(12345, 'eb-cp'), method_seed(12346, 'eb-cp'))

    def test_settings(self):
        """Fit settings validation
        """
        with self.assertRaises(ValueError):
            FitSettings(rmse_on='truth')
        with self.assertRaises(ValueError):
            FitSettings(restarts=0)


class TestRunMethod(unittest.TestCase):

    def test_external_data(self):
        """No RMSE without a truth column
        """
        psi = np.linspace(0, 1.1, 20)
        data = Dataset(psi, 1.0 + 0.1 * np.cos(psi), np.full(20, 0.05))
        result = run_method('eb-cp', data, CHAIN, SETTINGS)
        self.assertIsNone(result.rmse)
        self.assertEqual(len(result.predictive), 30)
        self.assertEqual(result.method, 'eb-cp')

    def test_rmse_modes(self):
        """RMSE against the truth at data points or on the grid
        """
        data = sweep_space()[0].dataset()
        on_data = run_method('eb-cp', data, CHAIN, SETTINGS)
        self.assertAlmostEqual(on_data.rmse, rmse(on_data.at_data.mean, data.truth), places=14)
        on_grid = run_method('eb-cp', data, CHAIN, FitSettings(restarts=1, grid_size=30, rmse_on='grid'))
        self.assertGreater(on_grid.rmse, 0.0)


class TestRecords(unittest.TestCase):

    def test_for_case(self):
        """Ignored profile fields are left empty
        """
        cases = sweep_space()
        lmode = SweepRecord.for_case(cases[0], 'eb-cp', rmse=0.2)
        self.assertIs(lmode.regime, Regime.LMODE)
        self.assertIsNone(lmode.w_ped)
        self.assertIsNone(lmode.n_itb)
        itb = SweepRecord.for_case(cases[-1], 'fb-cp-t')
        self.assertIsNotNone(itb.n_itb)
        self.assertTrue(itb.failed)

    def test_persistence(self):
        """Records survive the CSV database
        """
        records = [_record(0, rmse=0.25), _record(1, 'fb-cp-t', 'lmode', rmse=None)]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'db.csv')
            with RecordWriter(path) as writer:
                writer.append(records[0])
            with RecordWriter(path) as writer:
                writer.append(records[1])
            self.assertEqual(read_records(path), records)
            with open(path) as f:
                self.assertEqual(sum(1 for line in f if line.startswith('case')), 1)

    def test_bad_database(self):
        """Missing or foreign databases are rejected
        """
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(FileNotFoundError):
                read_records(os.path.join(tmp, 'missing.csv'))
            path = os.path.join(tmp, 'other.csv')
            with open(path, 'w') as f:
                f.write('a,b\n1,2\n')
            with self.assertRaises(ValueError):
                read_records(path)


class TestSummaries(unittest.TestCase):

    def test_single_record(self):
        """One record summarizes to itself
        """
        rows = summarize([_record(rmse=0.3)], 'regime')
        self.assertEqual(len(rows), 1)
        self.assertEqual((rows[0].group, rows[0].mean_rmse, rows[0].std_rmse, rows[0].count), ('hmode', 0.3, 0.0, 1))

    def test_grouping(self):
        """Groups, failed fits and order independence
        """
        records = [_record(i, m, rmse=0.1 * (i + 1), n_outliers=(0, 3, 10)[i % 3])
                   for i in range(9) for m in ('eb-cp', 'fb-cp-t')]
        records.append(_record(20, rmse=None, n_outliers=3))
        rows = summarize(records, 'n-outliers')
        self.assertEqual([r.group for r in rows], ['0', '0', '3', '3', '10', '10'])
        self.assertEqual([r.method.value for r in rows[:2]], ['eb-cp', 'fb-cp-t'])
        self.assertEqual(rows[2].count, 3)
        self.assertAlmostEqual(rows[0].mean_rmse, 0.4, places=14)
        self.assertAlmostEqual(rows[0].std_rmse, np.std([0.1, 0.4, 0.7]), places=14)
        shuffled = list(records)
        random.Random(0).shuffle(shuffled)
        self.assertEqual(summarize(shuffled, ['n_outliers']), rows)
        two = summarize(records, 'regime,sigma-frac')
        self.assertEqual(two[0].group, 'hmode|0.1')

    def test_bad_groups(self):
        """Unknown group keys and empty databases are rejected
        """
        with self.assertRaises(ValueError):
            summarize([_record()], 'colour')
        with self.assertRaises(ValueError):
            summarize([], 'regime')

    def test_worst_fits(self):
        """Highest RMSE per method, ties to the lower case index
        """
        records = [_record(5, rmse=0.9), _record(2, rmse=0.9), _record(3, rmse=0.1), _record(4, rmse=None),
                   _record(7, 'fb-cp-t', rmse=0.5)]
        worst = worst_fits(records)
        self.assertEqual([(r.case, r.method.value) for r in worst], [(2, 'eb-cp'), (7, 'fb-cp-t')])
        self.assertEqual([r.case for r in worst_fits(records, per_method=3)][:3], [2, 5, 3])
        with self.assertRaises(ValueError):
            worst_fits(records, per_method=0)

    def test_histograms(self):
        """RMSE histograms count every successful fit
        """
        records = [_record(i, rmse=0.01 * i) for i in range(10)] + [_record(10, rmse=None)]
        rows = rmse_histograms(records, bins=4)
        self.assertEqual(len(rows), 4)
        self.assertEqual(sum(row[-1] for row in rows), 10)
        self.assertEqual(rows[0][:2], ('eb-cp', 'hmode'))

    def test_runtime(self):
        """Runtime table per group and method, failures included
        """
        records = [_record(0, 'eb-cp', runtime_s=1.0), _record(1, 'eb-cp', runtime_s=3.0),
                   _record(2, 'eb-cp', rmse=None, runtime_s=2.0),
                   _record(0, 'fb-cp-t', runtime_s=40.0), _record(1, 'fb-cp-t', runtime_s=20.0)]
        rows = summarize_runtime(list(reversed(records)))
        self.assertEqual([(r.group, r.method.value) for r in rows], [('hmode', 'eb-cp'), ('hmode', 'fb-cp-t')])
        self.assertEqual((rows[0].mean_runtime_s, rows[0].std_runtime_s, rows[0].total_runtime_s, rows[0].count),
                         (2.0, float(np.std([1.0, 2.0, 3.0])), 6.0, 3))
        self.assertEqual((rows[1].mean_runtime_s, rows[1].std_runtime_s, rows[1].count), (30.0, 10.0, 2))
        self.assertGreater(rows[1].mean_runtime_s / rows[0].mean_runtime_s, 10)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'runtime.csv')
            write_runtime(rows, path)
            with open(path, newline='') as f:
                table = list(csv.reader(f))
        self.assertEqual(table[0], ['group', 'method', 'mean_runtime_s', 'std_runtime_s', 'total_runtime_s', 'count'])
        self.assertEqual(table[2][:3], ['hmode', 'fb-cp-t', '30.0'])
        with self.assertRaises(ValueError):
            summarize_runtime([])
        with self.assertRaises(ValueError):
            summarize_runtime(records, ['runtime_s'])

    def test_directional_summary(self):
        """Method ordering, outlier slopes and regime ratios from a database
        """
        records = []
        case = 0
        for n_outliers, t_rmse, g_rmse in ((0, 0.02, 0.02), (3, 0.02, 0.05), (5, 0.03, 0.07), (10, 0.03, 0.12)):
            for regime, eb_rmse in (('lmode', 0.10), ('hmode', 0.12)):
                records += [_record(case, 'fb-cp-t', regime, t_rmse, n_outliers),
                            _record(case, 'fb-cp-gauss', regime, g_rmse, n_outliers),
                            _record(case, 'eb-cp', regime, eb_rmse, n_outliers)]
                case += 1
        records.append(_record(case, 'eb-cp', 'hmode', None, 10))
        summary = directional_summary(list(reversed(records)))
        self.assertAlmostEqual(summary['ordering_ratio'], 0.025 / 0.11, places=12)
        counts, t_means, g_means = [0, 3, 5, 10], [0.02, 0.02, 0.03, 0.03], [0.02, 0.05, 0.07, 0.12]
        self.assertAlmostEqual(summary['outlier_slopes']['fb-cp-t'], np.polyfit(counts, t_means, 1)[0], places=12)
        self.assertAlmostEqual(summary['outlier_slopes']['fb-cp-gauss'], np.polyfit(counts, g_means, 1)[0], places=12)
        self.assertLess(summary['slope_ratio'], 0.5)
        self.assertEqual(summary['outlier_count'], 10)
        self.assertAlmostEqual(summary['outlier_accuracy_ratio'], 0.25, places=12)
        self.assertAlmostEqual(summary['regime_ratio']['eb-cp'], 1.2, places=12)
        self.assertAlmostEqual(summary['regime_ratio']['fb-cp-t'], 1.0, places=12)
        self.assertIsNone(outlier_slope(records[:3], 'fb-cp-t'))
        partial = directional_summary([r for r in records if r.method is MethodSpec.EB_CHANGEPOINT])
        self.assertIsNone(partial['ordering_ratio'])
        self.assertIsNone(partial['outlier_accuracy_ratio'])
        with self.assertRaises(ValueError):
            directional_summary([])


class TestSweep(unittest.TestCase):

    def test_resume(self):
        """Interrupted sweeps resume without duplicates
        """
        cases = sweep_space()[:2]
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, 'sweep.csv')
            first = run_sweep(cases[:1], ['eb-cp', 'fb-cp-t'], out=out, chain=CHAIN, settings=SETTINGS)
            self.assertEqual([r.key for r in first], [(0, MethodSpec.EB_CHANGEPOINT),
                                                      (0, MethodSpec.FB_CHANGEPOINT_STUDENTT)])
            records = run_sweep(cases, ['eb-cp', 'fb-cp-t'], out=out, chain=CHAIN, settings=SETTINGS)
            self.assertEqual(len(records), 4)
            self.assertEqual(len({r.key for r in records}), 4)
            self.assertEqual(records[:2], first)
            again = run_sweep(cases, ['eb-cp', 'fb-cp-t'], out=out, chain=CHAIN, settings=SETTINGS)
            self.assertEqual(again, records)
            sidecar = read_sidecar(out)
            self.assertEqual(len(sidecar['resumed']), 2)
            self.assertEqual(sidecar['chain'], CHAIN.to_dict())
            self.assertTrue(all(r.rmse is not None and r.rmse >= 0 for r in records))

    def test_torn_tail(self):
        """A record cut off mid-write is dropped and refitted on resume
        """
        cases = sweep_space()[:2]
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, 'sweep.csv')
            first = run_sweep(cases[:1], ['eb-cp'], out=out, settings=SETTINGS)
            self.assertEqual(drop_torn_tail(out), 0)
            with open(out, 'a') as f:
                f.write('1,eb-cp,hmo')
            with self.assertRaises(ValueError):
                read_records(out)
            records = run_sweep(cases, ['eb-cp'], out=out, settings=SETTINGS)
            self.assertEqual([r.key for r in records], [(0, MethodSpec.EB_CHANGEPOINT), (1, MethodSpec.EB_CHANGEPOINT)])
            self.assertEqual(records[0], first[0])
            self.assertFalse(records[1].failed)

    def test_unexpected_error(self):
        """An unexpected exception in one fit is flagged without aborting the sweep
        """
        real_run_method = bench.run_method

        def failing(method, *args, **kwargs):
            if MethodSpec.parse(method) is MethodSpec.FB_CHANGEPOINT_STUDENTT:
                raise RuntimeError('singular state')
            return real_run_method(method, *args, **kwargs)

        cases = sweep_space()[:2]
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, 'sweep.csv')
            with mock.patch.object(bench, 'run_method', side_effect=failing):
                records = run_sweep(cases, ['eb-cp', 'fb-cp-t'], out=out, chain=CHAIN, settings=SETTINGS)
            self.assertEqual(len(records), 4)
            for rec in records:
                if rec.method is MethodSpec.FB_CHANGEPOINT_STUDENTT:
                    self.assertTrue(rec.failed)
                    self.assertEqual(rec.flags, 'internal_error')
                else:
                    self.assertFalse(rec.failed)
            again = run_sweep(cases, ['eb-cp', 'fb-cp-t'], out=out, chain=CHAIN, settings=SETTINGS)
            self.assertEqual(again, records)

    def test_parallel_matches_serial(self):
        """Worker count does not change results
        """
        cases = sweep_space()[:3]
        with tempfile.TemporaryDirectory() as tmp:
            serial = run_sweep(cases, ['eb-cp'], out=os.path.join(tmp, 'a.csv'), settings=SETTINGS)
            parallel = run_sweep(cases, ['eb-cp'], parallelism=2, out=os.path.join(tmp, 'b.csv'), settings=SETTINGS)
        self.assertEqual([(r.key, r.rmse) for r in serial], [(r.key, r.rmse) for r in parallel])

    def test_invalid(self):
        """Empty case lists and zero workers are rejected
        """
        with self.assertRaises(ValueError):
            run_sweep([], out='unused.csv')
        with self.assertRaises(ValueError):
            run_sweep(sweep_space()[:1], parallelism=0, out='unused.csv')

    def test_worst_bundle(self):
        """Worst-fit bundle holds every method's curve and the dataset
        """
        cases = sweep_space()[:1]
        record = SweepRecord.for_case(cases[0], 'eb-cp', rmse=0.1)
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_worst_bundle(record, tmp, CHAIN, SETTINGS, methods=['eb-cp', 'fb-cp-gauss'], cases=cases)
            self.assertEqual([os.path.basename(p) for p in paths],
                             ['worst_eb-cp_case0.csv', 'worst_eb-cp_case0_data.csv'])
            with open(paths[0], newline='') as f:
                rows = list(csv.reader(f))
            data = Dataset.from_csv(paths[1])
        self.assertEqual(rows[0], ['psi', 'truth', 'eb-cp_mean', 'eb-cp_std', 'fb-cp-gauss_mean', 'fb-cp-gauss_std'])
        self.assertEqual(len(rows), 31)
        self.assertEqual(len(data), 88)
        with self.assertRaises(ValueError):
            write_worst_bundle(SweepRecord.for_case(sweep_space()[5], 'eb-cp'), '.', cases=cases)


@unittest.skipUnless(os.environ.get('PROFGPR_DESK_SWEEP'), 'set PROFGPR_DESK_SWEEP=1 to run the 120-case desk sweep')
class TestDeskSweep(unittest.TestCase):

    def test_directional_claims(self):
        """Method ordering, outlier flatness, outlier accuracy and regime gap on the desk sweep
        """
        with tempfile.TemporaryDirectory() as tmp:
            records = run_sweep(desk_space(), parallelism=os.cpu_count() or 1, out=os.path.join(tmp, 'desk.csv'))
        self.assertEqual(len(records), 480)
        summary = directional_summary(records)
        self.assertLessEqual(summary['ordering_ratio'], 0.5)
        self.assertLess(summary['slope_ratio'], 0.5)
        self.assertEqual(summary['outlier_count'], 10)
        self.assertLessEqual(summary['outlier_accuracy_ratio'], 0.75)
        for method in ('eb-gibbs', 'eb-cp'):
            self.assertGreaterEqual(summary['regime_ratio'][method], 1.0)
            self.assertLessEqual(summary['regime_ratio'][method], 1.5)
