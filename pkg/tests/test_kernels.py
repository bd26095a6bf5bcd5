from unittest.mock import patch

from scipy import integrate, special

from tests.base import *
from privex.rosenblatt import kernels, settings
from privex.rosenblatt.exceptions import HurstError, BetaError, GammaError, DomainError, IntensityError, \
    MeshTooCoarse, ParamError, SingularKernel, DiagonalKernel, QuadBudgetExceeded
from privex.rosenblatt.kernels import validate_params, beta_range, epsilon_n, alpha_n, fbm_covariance, kernel_f, \
    pow_diff, segment_integral_f, segment_integral_weighted, rosenblatt_kernel_g, rosenblatt_kernel_g_closed, \
    kernel_norm_sq, normalizing_constant, norm_tail_bound


class ParamsTest(RosenBase):
    def test_beta_range(self):
        """The lower bound of beta is the larger of the two constraints"""
        lo, hi = beta_range(0.75)
        self.assertAlmostEqual(lo, 0.41667, places=5)
        self.assertEqual(hi, 0.5)
        self.assertAlmostEqual(beta_range(0.6)[0], 0.4375, places=12)

    def test_defaults(self):
        p = params()
        self.assertEqual((p.a, p.T, p.n, p.bm_mesh, p.seed), (-1.0, 1.0, 64, 2048, 0))
        self.assertEqual(p.output_grid_size, 16)
        self.assertEqual(len(p.t_grid), 17)

    def test_epsilon(self):
        self.assertAlmostEqual(params(n=64).epsilon, 0.05351, places=5)
        self.assertAlmostEqual(validate_params(H=0.6, beta=0.45, gamma=0.03, n=64).epsilon, 0.06901, places=5)
        self.assertEqual(epsilon_n(1, params()), 1.0)

    def test_alpha(self):
        p = params(beta=0.42)
        self.assertRelClose(alpha_n(100, p), 31.486, 1e-4)
        self.assertGreater(p.alpha_hat, p.alpha)
        with self.assertRaises(IntensityError):
            alpha_n(1, p)
        self.assertIsNone(params(n=1).alpha)

    def test_invalid_hurst(self):
        for H in (0.5, 1.0, 0.2):
            with self.assertRaises(HurstError):
                validate_params(H=H, beta=0.45, gamma=0.01)

    def test_invalid_beta_names_bound(self):
        """The message for beta=0.3 at H=0.75 names the lower bound 0.41667"""
        with self.assertRaises(BetaError) as cm:
            params(beta=0.3)
        self.assertIn('0.41667', str(cm.exception))
        with self.assertRaises(BetaError):
            params(beta=0.5)

    def test_invalid_gamma(self):
        with self.assertRaises(GammaError):
            params(gamma=0.0)
        with self.assertRaises(GammaError):
            params(gamma=0.07)

    def test_invalid_other(self):
        with self.assertRaises(DomainError):
            params(a=0.5)
        with self.assertRaises(DomainError):
            params(T=0)
        with self.assertRaises(IntensityError):
            params(n=0)
        with self.assertRaises(MeshTooCoarse):
            params(bm_mesh=8)
        with self.assertRaises(ParamError):
            validate_params(H=0.75, beta=0.44)
        with self.assertRaises(ParamError):
            params(n='many')

    def test_replace_revalidates(self):
        p = params()
        self.assertEqual(p.replace(n=32).n, 32)
        self.assertEqual(p.n, 64)
        with self.assertRaises(BetaError):
            p.replace(beta=0.3)

    def test_unknown_keys_kept(self):
        p = validate_params(dict(P75, note='desk'))
        self.assertEqual(p.raw_data['note'], 'desk')


class KernelTest(RosenBase):
    def test_fbm_covariance(self):
        self.assertAlmostEqual(fbm_covariance(1.0, 0.5, 0.75), 0.5, places=14)
        self.assertAlmostEqual(fbm_covariance(2.0, 2.0, 0.75), 2 ** 1.5, places=12)
        self.assertEqual(list(fbm_covariance(np.array([0.0, 1.0]), 1.0, 0.75)), [0.0, 1.0])
        with self.assertRaises(DomainError):
            fbm_covariance(-1.0, 1.0, 0.75)

    def test_kernel_f(self):
        self.assertEqual(kernel_f(1.0, 0.0, 0.75), 1.0)
        self.assertAlmostEqual(kernel_f(2.0, 1.0, 0.75, deriv=True), 0.625, places=14)
        with self.assertRaises(SingularKernel):
            kernel_f(1.0, 1.0, 0.75)

    def test_pow_diff(self):
        self.assertAlmostEqual(float(pow_diff(1.0, 1.0, 0.5)), math.sqrt(2) - 1, places=14)
        self.assertAlmostEqual(float(pow_diff(0.0, 4.0, 0.5)), 2.0, places=14)
        self.assertEqual(float(pow_diff(0.0, 0.0, 0.5)), 0.0)
        # no cancellation for tiny widths
        self.assertRelClose(float(pow_diff(1.0, 1e-13, 0.375)), 0.375e-13, 1e-9)

    def test_segment_integral_f_vs_quad(self):
        gen = np.random.default_rng(5)
        H = 0.75
        for _ in range(60):
            s, shift = gen.uniform(0.1, 2.0), gen.uniform(0.0, 0.2)
            x0, x1 = np.sort(gen.uniform(-3.0, s + shift - 1e-3, 2))
            exact = segment_integral_f(s, shift, x0, x1, H)
            ref, _ = integrate.quad(lambda x: (s + shift - x) ** (H / 2 - 1), x0, x1, epsabs=0, epsrel=1e-13)
            self.assertRelClose(exact, ref, 1e-8)

    def test_segment_integral_f_singular_end(self):
        """The upper limit may sit on the singularity"""
        self.assertAlmostEqual(segment_integral_f(1.0, 0.0, 0.0, 1.0, 0.75), 2 / 0.75, places=12)
        with self.assertRaises(DomainError):
            segment_integral_f(1.0, 0.0, 0.0, 1.5, 0.75)
        with self.assertRaises(DomainError):
            segment_integral_f(1.0, 0.0, 0.5, 0.2, 0.75)

    def test_segment_integral_weighted_vs_quad(self):
        gen = np.random.default_rng(9)
        H = 0.6
        for _ in range(60):
            s = gen.uniform(0.05, 2.0)
            u0, u1 = np.sort(gen.uniform(-2.0, -0.01, 2))
            c, m = gen.normal(size=2)

            def fn(u):
                return (1 - H / 2) * (s - 1 / u) ** (H / 2 - 2) * u ** -3 * (c + m * u)

            exact = segment_integral_weighted(s, u0, u1, c, m, H)
            ref, _ = integrate.quad(fn, u0, u1, epsabs=0, epsrel=1e-13, limit=200)
            scale, _ = integrate.quad(lambda u: abs(fn(u)), u0, u1, epsabs=0, epsrel=1e-10, limit=200)
            self.assertLessEqual(abs(exact - ref), 1e-8 * max(scale, 1e-300))

    def test_segment_integral_weighted_domain(self):
        with self.assertRaises(DomainError):
            segment_integral_weighted(1.0, -1.0, 0.0, 1.0, 0.0, 0.75)
        with self.assertRaises(DomainError):
            segment_integral_weighted(0.0, -1.0, -0.5, 1.0, 0.0, 0.75)


class RosenblattKernelTest(RosenBase):
    POINTS = [
        (1.0, 0.3, -0.4), (1.0, 0.2, 0.7), (1.0, -2.0, -0.5), (0.5, -0.01, 0.02), (2.0, -30.0, 1.5),
        (1.0, 0.999, 0.2), (1.0, -0.05, -0.1),
    ]

    def test_schemes_agree(self):
        """The adaptive and closed-form kernels agree to 1e-6 relative"""
        for H in (0.6, 0.75, 0.9):
            for t, y1, y2 in self.POINTS:
                adaptive = rosenblatt_kernel_g(t, y1, y2, H)
                closed = rosenblatt_kernel_g_closed(t, y1, y2, H)
                self.assertRelClose(closed, adaptive, 1e-6)

    def test_symmetric(self):
        self.assertEqual(rosenblatt_kernel_g_closed(1.0, 0.3, -0.2, 0.75),
                         rosenblatt_kernel_g_closed(1.0, -0.2, 0.3, 0.75))

    def test_vanishes_after_t(self):
        self.assertEqual(rosenblatt_kernel_g(1.0, 1.2, 0.1, 0.75), 0.0)
        self.assertEqual(rosenblatt_kernel_g_closed(1.0, 1.0, 0.1, 0.75), 0.0)

    def test_diagonal(self):
        with self.assertRaises(DiagonalKernel):
            rosenblatt_kernel_g(1.0, 0.4, 0.4, 0.75)
        with self.assertRaises(DiagonalKernel):
            rosenblatt_kernel_g_closed(1.0, np.array([0.1, 0.4]), np.array([0.2, 0.4]), 0.75)

    def test_scaling(self):
        """g_{ct}(c y1, c y2) = c^{H-1} g_t(y1, y2)"""
        H, c = 0.75, 3.0
        for t, y1, y2 in self.POINTS:
            self.assertRelClose(rosenblatt_kernel_g_closed(c * t, c * y1, c * y2, H),
                                c ** (H - 1) * rosenblatt_kernel_g_closed(t, y1, y2, H), 1e-10)

    def test_reduced_kernel_at_diagonal_start(self):
        """With L0 = 0 the reduced kernel tends to B(H/2, 1-H) as d -> 0, also for plain floats"""
        H = 0.75
        self.assertRelClose(float(kernels._kernel_reduced(0.0, 0.5, 0.0, H)), special.beta(H / 2, 1 - H), 1e-14)
        self.assertRelClose(float(kernels._kernel_reduced(0.0, 0.5, 1e-12, H)), special.beta(H / 2, 1 - H), 1e-6)


class NormTest(RosenBase):
    @staticmethod
    def exact_norm_sq(H, t=1.0):
        return special.beta(H / 2, 1 - H) ** 2 / (H * (2 * H - 1)) * t ** (2 * H)

    def test_norm_matches_closed_form(self):
        for H in (0.6, 0.75, 0.9):
            v, err = kernel_norm_sq(H)
            self.assertRelClose(v, self.exact_norm_sq(H), 1e-5)
            self.assertLessEqual(err, 1e-5 * v)

    def test_normalizing_constant_cold_cache(self):
        with patch.object(settings, 'CACHE', False):
            kc = normalizing_constant(0.75)
        self.assertLessEqual(kc.cH_rel_err, 1e-4)
        self.assertRelClose(kc.norm_sq, self.exact_norm_sq(0.75), 1e-5)
        self.assertRelClose(2 * kc.cH ** 2 * kc.norm_sq, 1.0, 1e-12)

    def test_normalizing_constant(self):
        """2 cH^2 ||g_t||^2 = t^{2H}, at t=1 and (by self-similarity of the norm) at t=2"""
        for H in (0.6, 0.75, 0.9):
            kc = normalizing_constant(H)
            self.assertLessEqual(kc.cH_rel_err, 1e-4)
            self.assertRelClose(2 * kc.cH ** 2 * kc.norm_sq, 1.0, 1e-12)
            norm2, _ = kernel_norm_sq(H, 2.0)
            self.assertRelClose(2 * kc.cH ** 2 * norm2, 2 ** (2 * H), 1e-6)

    def test_nan_norm_raises(self):
        with patch.object(settings, 'CACHE', False), \
                patch.object(kernels, 'kernel_norm_sq', return_value=(float('nan'), float('nan'))):
            with self.assertRaises(QuadBudgetExceeded):
                normalizing_constant(0.75)
        with patch.object(settings, 'CACHE', False), \
                patch.object(kernels, 'kernel_norm_sq', return_value=(95.7, float('nan'))):
            with self.assertRaises(QuadBudgetExceeded):
                normalizing_constant(0.75)

    def test_loose_norm_raises(self):
        with patch.object(settings, 'CACHE', False), \
                patch.object(kernels, 'kernel_norm_sq', return_value=(95.7, 0.1)):
            with self.assertRaises(QuadBudgetExceeded):
                normalizing_constant(0.75)

    def test_truncated_norm(self):
        full, _ = kernel_norm_sq(0.75, 1.0)
        cut, _ = kernel_norm_sq(0.75, 1.0, lower=-50.0)
        far, _ = kernel_norm_sq(0.75, 1.0, lower=-1e4)
        self.assertLess(cut, far)
        self.assertLess(far, full)
        self.assertGreater(cut, 0.5 * full)
        self.assertGreater(norm_tail_bound(0.75, 50.0), full - cut)

    def test_truncated_norm_vs_direct(self):
        """The retained norm against a plain 2D quadrature of the kernel on [lower, 1]^2"""
        H, lower = 0.75, -2.0

        def g_sq(y2, y1):
            return rosenblatt_kernel_g_closed(1.0, y1, y2, H) ** 2 if y1 != y2 else 0.0

        # twice the half plane y2 < y1, split where the kernel changes form
        direct = 0.0
        for a, b in ((lower, 0.0), (0.0, 1.0)):
            v, _ = integrate.dblquad(g_sq, a, b, lambda y1: lower, lambda y1: y1, epsabs=0, epsrel=1e-6)
            direct += 2 * v
        cut, _ = kernel_norm_sq(H, 1.0, lower=lower)
        self.assertRelClose(cut, direct, 1e-3)


class InvariantTest(RosenBase):
    def test_segment_integral_additive(self):
        gen = np.random.default_rng(21)
        H = 0.75
        for _ in range(200):
            s, shift = gen.uniform(0.1, 2.0), gen.uniform(0.0, 0.2)
            x0, x1, x2 = np.sort(gen.uniform(-5.0, s + shift - 1e-3, 3))
            whole = segment_integral_f(s, shift, x0, x2, H)
            parts = segment_integral_f(s, shift, x0, x1, H) + segment_integral_f(s, shift, x1, x2, H)
            self.assertRelClose(parts, whole, 1e-12)

    def test_antiderivative_finite_difference(self):
        """Central differences of the segment integral in its upper limit reproduce kernel_f at 1000 points"""
        gen = np.random.default_rng(22)
        H, h = 0.6, 1e-5
        s = gen.uniform(0.1, 2.0, 1000)
        shift = gen.uniform(0.0, 0.2, 1000)
        x = s + shift - gen.uniform(0.05, 3.0, 1000)
        fd = segment_integral_f(s, shift, x - h, x + h, H) / (2 * h)
        exact = kernel_f(s + shift, x, H)
        self.assertLessEqual(float(np.max(np.abs(fd - exact) / exact)), 1e-6)

    def test_fbm_self_similar(self):
        gen = np.random.default_rng(23)
        for H in (0.6, 0.75, 0.9):
            t, s, c = gen.uniform(0.0, 3.0, 50), gen.uniform(0.0, 3.0, 50), gen.uniform(0.1, 10.0, 50)
            left = fbm_covariance(c * t, c * s, H)
            right = c ** (2 * H) * fbm_covariance(t, s, H)
            self.assertLessEqual(float(np.max(np.abs(left - right) / np.maximum(np.abs(right), 1e-12))), 1e-12)

    def test_fbm_stationary_increments(self):
        gen = np.random.default_rng(24)
        for H in (0.6, 0.75, 0.9):
            t, s = gen.uniform(0.0, 3.0, 50), gen.uniform(0.0, 3.0, 50)
            var = fbm_covariance(t, t, H) + fbm_covariance(s, s, H) - 2 * fbm_covariance(t, s, H)
            self.assertLessEqual(float(np.max(np.abs(var - np.abs(t - s) ** (2 * H)))), 1e-12)
