import json
import unittest

import numpy as np
import numpy.testing as npt

from profgpr.kernels import (ChangePoint, ChangePointConfig, CholeskyError, GibbsTanh, GibbsTanhParams, KernelFamily,
                             Matern52, SquaredExponential, StationaryParams, changepoint_weights, get_kernel, gram,
                             jittered_cholesky, k_changepoint, k_gibbs_tanh, k_matern52, k_sek)


def _changepoint(va=1.0, la=0.5, vb=0.7, lb=0.05, width=0.01):
    return ChangePointConfig(StationaryParams(va, la), StationaryParams(vb, lb), transfer_width=width)


def _random_values(family, rng):
    if family.name == 'gibbs_tanh':
        return {'theta_v': rng.uniform(0.5, 2.0), 'l_core': rng.uniform(0.2, 0.8), 'l_edge': rng.uniform(0.02, 0.1),
                'psi_0': rng.uniform(0.9, 1.0), 'w_l': rng.uniform(0.01, 0.05)}
    if family.name == 'changepoint':
        return {'theta_v_a': rng.uniform(0.5, 2.0), 'theta_l_a': rng.uniform(0.1, 0.8),
                'theta_v_b': rng.uniform(0.5, 2.0), 'theta_l_b': rng.uniform(0.02, 0.2)}
    return {'theta_v': rng.uniform(0.5, 2.0), 'theta_l': rng.uniform(0.05, 0.5)}


class TestStationary(unittest.TestCase):

    def test_sek(self):
        """Squared-exponential values
        """
        p = StationaryParams(1.0, 0.5)
        self.assertEqual(k_sek(StationaryParams(2.5, 0.3), 0.4, 0.4), 2.5)
        self.assertAlmostEqual(k_sek(p, 0.2, 0.7), np.exp(-0.5), places=15)
        self.assertLess(k_sek(p, 0.0, 100.0), 1e-300)

    def test_matern52(self):
        """Matérn 5/2 values
        """
        p = StationaryParams(1.0, 0.3)
        self.assertEqual(k_matern52(StationaryParams(1.5, 0.3), 0.1, 0.1), 2.25)
        expected = (1 + np.sqrt(5) + 5 / 3) * np.exp(-np.sqrt(5))
        self.assertAlmostEqual(k_matern52(p, 0.1, 0.4), expected, places=14)
        self.assertAlmostEqual(expected, 0.5240, places=4)
        self.assertLess(k_matern52(p, 0.0, 1e3), 1e-300)

    def test_symmetry_stationarity(self):
        """Symmetric and shift-invariant stationary kernels
        """
        rng = np.random.default_rng(1)
        a, b = rng.uniform(0, 1.1, 50), rng.uniform(0, 1.1, 50)
        p = StationaryParams(1.3, 0.2)
        for k in (k_sek, k_matern52):
            npt.assert_array_equal(k(p, a, b), k(p, b, a))
            npt.assert_allclose(k(p, a + 0.37, b + 0.37), k(p, a, b), rtol=1e-12)

    def test_invalid(self):
        """Non-positive parameters are rejected
        """
        with self.assertRaises(ValueError):
            StationaryParams(0.0, 1.0)
        with self.assertRaises(ValueError):
            StationaryParams(1.0, -1.0)


class TestGibbs(unittest.TestCase):

    def test_equal_points(self):
        """Zero-distance value is theta_v squared
        """
        p = GibbsTanhParams(1.5, 0.5, 0.05, 0.95, 0.02)
        npt.assert_allclose(k_gibbs_tanh(p, np.array([0.2, 0.95, 1.05]), np.array([0.2, 0.95, 1.05])), 2.25)

    def test_reduction(self):
        """Constant length scale reduces to the squared exponential
        """
        rng = np.random.default_rng(2)
        a, b = rng.uniform(0, 1.1, 100), rng.uniform(0, 1.1, 100)
        p = GibbsTanhParams(1.2, 0.3, 0.3, 0.95, 0.02)
        npt.assert_allclose(k_gibbs_tanh(p, a, b), k_sek(StationaryParams(1.44, 0.3), a, b), rtol=1e-12)

    def test_value(self):
        """Direct evaluation with a stepped length scale
        """
        p = GibbsTanhParams(1.0, 0.5, 0.05, 0.95, 0.02)
        l1 = 0.275 - 0.225 * np.tanh((0.8 - 0.95) / 0.02)
        l2 = 0.275 - 0.225 * np.tanh((1.0 - 0.95) / 0.02)
        s = l1**2 + l2**2
        expected = np.sqrt(2 * l1 * l2 / s) * np.exp(-0.04 / s)
        self.assertAlmostEqual(float(k_gibbs_tanh(p, 0.8, 1.0)), expected, places=14)
        self.assertAlmostEqual(float(k_gibbs_tanh(p, 0.8, 1.0)), float(k_gibbs_tanh(p, 1.0, 0.8)), places=15)


class TestChangePoint(unittest.TestCase):

    def test_weight_partition(self):
        """Transfer weights sum to one
        """
        psi = np.linspace(0, 1.1, 1001)
        w_a, w_b = changepoint_weights(_changepoint(), psi)
        npt.assert_allclose(w_a + w_b, 1.0, rtol=0, atol=1e-15)
        self.assertTrue(np.all((w_b >= 0) & (w_b <= 1)))

    def test_weighted_formula(self):
        """Kernel equals the weighted sum of its sub-kernels
        """
        c = _changepoint()
        rng = np.random.default_rng(3)
        a, b = rng.uniform(0, 1.1, 200), rng.uniform(0, 1.1, 200)
        wa1, wb1 = changepoint_weights(c, a)
        wa2, wb2 = changepoint_weights(c, b)
        expected = wa1 * wa2 * k_matern52(c.kernel_a, a, b) + wb1 * wb2 * k_matern52(c.kernel_b, a, b)
        npt.assert_allclose(k_changepoint(c, a, b), expected, rtol=1e-14)

    def test_deep_region_a(self):
        """Far from the change points kernel A alone is seen
        """
        c = _changepoint(va=1.3, vb=0.7)
        self.assertAlmostEqual(k_changepoint(c, 0.5, 0.5) / 1.69, 1.0, delta=1e-6)
        psi = np.linspace(0, 0.75, 60)
        scale = 1.3**2 + 0.7**2
        diff = gram(lambda x, y: k_changepoint(c, x, y), psi) - gram(lambda x, y: k_matern52(c.kernel_a, x, y), psi)
        self.assertLess(np.max(np.abs(diff)), 1e-6 * scale)

    def test_locality_sharp_transfer(self):
        """Locality in all three regions with a sharp transfer
        """
        c = _changepoint(va=1.3, vb=0.7, width=0.003)
        scale = 1.3**2 + 0.7**2
        psi = np.concatenate([np.linspace(0, 0.85, 40), np.linspace(1.05, 1.1, 5)])
        diff = gram(lambda x, y: k_changepoint(c, x, y), psi) - gram(lambda x, y: k_matern52(c.kernel_a, x, y), psi)
        self.assertLess(np.max(np.abs(diff)), 1e-6 * scale)
        self.assertAlmostEqual(k_changepoint(c, 0.95, 0.95) / 0.49, 1.0, delta=1e-6)

    def test_region_b_default_width(self):
        """Pedestal centre with the default transfer width
        """
        c = _changepoint(va=1.3, vb=0.7)
        w_b = changepoint_weights(c, 0.95)[1]
        expected = (1 - w_b)**2 * 1.69 + w_b**2 * 0.49
        self.assertAlmostEqual(k_changepoint(c, 0.95, 0.95), expected, places=14)

    def test_shared_kernel(self):
        """Identical sub-kernels give a weight-scaled Matérn
        """
        p = StationaryParams(1.1, 0.2)
        c = ChangePointConfig(p, p)
        rng = np.random.default_rng(4)
        a, b = rng.uniform(0, 1.1, 200), rng.uniform(0, 1.1, 200)
        wa1, wb1 = changepoint_weights(c, a)
        wa2, wb2 = changepoint_weights(c, b)
        npt.assert_allclose(k_changepoint(c, a, b), (wa1 * wa2 + wb1 * wb2) * k_matern52(p, a, b), rtol=1e-13)
        deep = np.linspace(0, 0.7, 20)
        npt.assert_allclose(k_changepoint(c, deep, deep[::-1]), k_matern52(p, deep, deep[::-1]), rtol=1e-6)

    def test_config_validation(self):
        """Change-point configuration validation
        """
        p = StationaryParams(1.0, 0.1)
        with self.assertRaises(ValueError):
            ChangePointConfig(p, p, locations=(1.0, 0.9))
        with self.assertRaises(ValueError):
            ChangePointConfig(p, p, transfer_width=0.0)
        c = ChangePointConfig({'theta_v': 1.0, 'theta_l': 0.5}, p)
        self.assertEqual(c.kernel_a, StationaryParams(1.0, 0.5))


class TestGram(unittest.TestCase):

    def test_shape_symmetry(self):
        """Gram matrices are symmetric with the zero-distance diagonal
        """
        xs = np.linspace(0, 1.1, 30)
        p = StationaryParams(1.2, 0.1)
        mat = gram(lambda a, b: k_matern52(p, a, b), xs)
        self.assertEqual(mat.shape, (30, 30))
        npt.assert_array_equal(mat, mat.T)
        npt.assert_allclose(np.diag(mat), 1.44)
        one = gram(lambda a, b: k_matern52(p, a, b), [0.3])
        npt.assert_allclose(one, [[1.44]])
        self.assertEqual(gram(lambda a, b: k_sek(p, a, b), xs, xs[:4]).shape, (30, 4))
        with self.assertRaises(ValueError):
            gram(lambda a, b: k_sek(p, a, b), [])

    def test_psd_suite(self):
        """Random Gram matrices factorize with small jitter
        """
        rng = np.random.default_rng(5)
        for family in (SquaredExponential(), Matern52(), GibbsTanh(), ChangePoint()):
            for _ in range(100):
                xs = np.sort(rng.uniform(0, 1.1, 200))
                params = family.params(_random_values(family, rng))
                mat = family.matrix(params, xs)
                _, jitter = jittered_cholesky(mat)
                self.assertLessEqual(jitter, 1e-6 * np.mean(np.diag(mat)), family.name)


class TestJitter(unittest.TestCase):

    def test_no_jitter(self):
        """Well-conditioned matrices factorize exactly
        """
        mat = np.array([[2.0, 0.5], [0.5, 1.0]])
        chol, jitter = jittered_cholesky(mat)
        self.assertEqual(jitter, 0.0)
        npt.assert_allclose(chol @ chol.T, mat)

    def test_escalation(self):
        """Singular PSD matrix needs the first jitter step
        """
        _, jitter = jittered_cholesky(np.ones((5, 5)))
        self.assertEqual(jitter, 1e-8)

    def test_failure(self):
        """Indefinite and non-finite matrices raise with diagnostics
        """
        with self.assertRaises(CholeskyError) as ctx:
            jittered_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
        self.assertEqual(ctx.exception.diagnostics['n'], 2)
        self.assertEqual(ctx.exception.diagnostics['mean_diag'], 1.0)
        with self.assertRaises(CholeskyError):
            jittered_cholesky(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestFamilies(unittest.TestCase):

    def test_gradients(self):
        """Analytic dK/d(value) against central differences
        """
        rng = np.random.default_rng(6)
        xs = np.sort(rng.uniform(0, 1.1, 25))
        for family in (SquaredExponential(), Matern52(), GibbsTanh(), ChangePoint()):
            values = _random_values(family, rng)
            grads = family.gradients(family.params(values), xs)
            self.assertEqual(set(grads), set(family.param_names))
            for name in family.param_names:
                h = 1e-6 * abs(values[name])
                up = family.matrix(family.params({**values, name: values[name] + h}), xs)
                down = family.matrix(family.params({**values, name: values[name] - h}), xs)
                fd = (up - down) / (2 * h)
                scale = np.max(np.abs(fd)) + 1e-12
                npt.assert_allclose(grads[name], fd, rtol=1e-5, atol=1e-6 * scale + 1e-7,
                                    err_msg=f"{family.name}.{name}")

    def test_diag(self):
        """Diagonal matches the Gram matrix diagonal
        """
        xs = np.linspace(0, 1.1, 40)
        family = GibbsTanh()
        params = family.params({'theta_v': 1.1, 'l_core': 0.4, 'l_edge': 0.04, 'psi_0': 0.95, 'w_l': 0.02})
        npt.assert_allclose(family.diag(params, xs), np.diag(family.matrix(params, xs)), rtol=1e-14)

    def test_serialization(self):
        """JSON description keyed by kernel name
        """
        family = get_kernel('changepoint', transfer_width=0.02)
        params = family.params({'theta_v_a': 1.0, 'theta_l_a': 0.5, 'theta_v_b': 0.8, 'theta_l_b': 0.05})
        desc = json.loads(json.dumps(family.to_dict(params)))
        self.assertEqual(desc['kernel'], 'changepoint')
        self.assertEqual(desc['kernel_b'], {'theta_v': 0.8, 'theta_l': 0.05})
        self.assertEqual(desc['locations'], [0.9, 1.0])
        self.assertEqual(desc['transfer_width'], 0.02)
        self.assertEqual(family.values(params)['theta_l_b'], 0.05)
        with self.assertRaises(ValueError):
            get_kernel('periodic')

    def test_abstract_hooks(self):
        """A family missing prior_scale cannot be instantiated
        """
        class NoScale(KernelFamily):
            name = 'noscale'

            def params(self, values):
                return values

            def values(self, params):
                return params

            def function(self, params):
                return k_sek

            def gradients(self, params, xs):
                return {}

        self.assertIn('prior_scale', KernelFamily.__abstractmethods__)
        with self.assertRaises(TypeError):
            NoScale()
        for family in (SquaredExponential(), Matern52(), GibbsTanh(), ChangePoint()):
            self.assertGreater(family.prior_scale(family.params(_random_values(family, np.random.default_rng(0)))), 0)
