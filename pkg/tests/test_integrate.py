from scipy import integrate

from tests.base import *
from privex.rosenblatt import streams
from privex.rosenblatt.exceptions import DomainError, NoConvergence, InvalidInput
from privex.rosenblatt.integrate import stieltjes_pl, wiener_grid_integral, riemann_weighted_pl, graded_mesh, \
    graded_nodes, graded_time_quadrature
from privex.rosenblatt.objects import QuadSpec
from privex.rosenblatt.experiments import fit_loglog
from privex.rosenblatt.paths import PiecewiseLinearPath, GridPath

H = 0.75


class StieltjesTest(RosenBase):
    def setUp(self):
        self.Z = PiecewiseLinearPath([0.0, 0.3, 0.7, 1.0], [0.0, 0.5, -0.2, 0.4], 'Z')

    def _quad(self, s, shift, x0, x1):
        def fn(x):
            return (s + shift - x) ** (H / 2 - 1) * self.Z.slopes[min(np.searchsorted(self.Z.times, x) - 1, 2)]
        pts = [t for t in self.Z.times if x0 < t < x1]
        val, _ = integrate.quad(fn, x0, x1, points=pts or None, epsabs=0, epsrel=1e-11, limit=200)
        return val

    def test_vs_quad(self):
        for s, shift, x0, x1 in ((1.0, 0.1, 0.0, 1.0), (0.8, 0.05, 0.1, 0.8), (1.0, 0.2, 0.25, 0.9)):
            self.assertAlmostEqual(stieltjes_pl(s, shift, self.Z, x0, x1, H), self._quad(s, shift, x0, x1), places=7)

    def test_singular_end(self):
        """The upper limit may sit on the singularity"""
        L = PiecewiseLinearPath([0.0, 1.0], [0.0, 0.7])
        self.assertAlmostEqual(stieltjes_pl(1.0, 0.0, L, 0.0, 1.0, H), 0.7 * 2 / H, places=12)

    def test_empty_interval(self):
        self.assertEqual(stieltjes_pl(1.0, 0.0, self.Z, 0.5, 0.5, H), 0.0)
        self.assertEqual(stieltjes_pl(1.0, 0.0, self.Z, 0.6, 0.5, H), 0.0)

    def test_domain(self):
        with self.assertRaises(DomainError):
            stieltjes_pl(0.5, 0.0, self.Z, 0.0, 1.0, H)
        with self.assertRaises(DomainError):
            stieltjes_pl(2.0, 0.0, self.Z, -1.0, 1.0, H)

    def test_vector_matches_scalar(self):
        s = np.array([0.4, 0.8, 1.0])
        vec = stieltjes_pl(s, 0.05, self.Z, 0.0, s, H)
        self.assertEqual(vec.shape, (3,))
        for i, si in enumerate(s):
            self.assertAlmostEqual(vec[i], stieltjes_pl(float(si), 0.05, self.Z, 0.0, float(si), H), places=12)
        self.assertIsInstance(stieltjes_pl(1.0, 0.05, self.Z, 0.0, 1.0, H), float)


    def test_linear_in_path(self):
        gen = np.random.default_rng(31)
        other = PiecewiseLinearPath([0.0, 0.2, 0.5, 0.9, 1.0], gen.normal(size=5), 'W')
        for _ in range(20):
            a, b = gen.normal(size=2)
            s, shift = gen.uniform(0.5, 1.0), gen.uniform(0.0, 0.2)
            x0, x1 = np.sort(gen.uniform(0.0, s, 2))
            mixed = self.Z.scaled(a).plus(other.scaled(b))
            left = stieltjes_pl(s, shift, mixed, x0, x1, H)
            right = a * stieltjes_pl(s, shift, self.Z, x0, x1, H) + b * stieltjes_pl(s, shift, other, x0, x1, H)
            self.assertAlmostEqual(left, right, places=11)

    def test_interval_additive(self):
        gen = np.random.default_rng(32)
        for _ in range(50):
            s, shift = gen.uniform(0.5, 1.0), gen.uniform(0.0, 0.2)
            x0, x1, x2 = np.sort(gen.uniform(0.0, s, 3))
            whole = stieltjes_pl(s, shift, self.Z, x0, x2, H)
            parts = stieltjes_pl(s, shift, self.Z, x0, x1, H) + stieltjes_pl(s, shift, self.Z, x1, x2, H)
            self.assertLessEqual(abs(parts - whole), 1e-12 * max(1.0, abs(whole)))


class WienerGridTest(RosenBase):
    def test_linear_path(self):
        """On a straight line the midpoint rule agrees with the exact integral"""
        t = np.linspace(0.0, 1.0, 1025)
        B = PiecewiseLinearPath(t, 0.7 * t, 'B')
        for shift in (0.0, 0.1):
            mid = wiener_grid_integral(1.0, shift, B, 0.0, 1.0, H)
            exact = wiener_grid_integral(1.0, shift, B, 0.0, 1.0, H, rule='exact')
            self.assertRelClose(mid, exact, 5e-3)

    def test_unknown_rule(self):
        B = PiecewiseLinearPath([0.0, 1.0], [0.0, 1.0])
        with self.assertRaises(ValueError):
            wiener_grid_integral(1.0, 0.0, B, 0.0, 1.0, H, rule='trapezoid')

    def test_isometry(self):
        """E[(int_0^1 (1.1 - x)^{H/2-1} dB)^2] = int_0^1 (1.1 - x)^{H-2} dx = 3.20730"""
        reps = 1000
        vals = np.array([
            wiener_grid_integral(1.0, 0.1, brownian_grid(0.0, 1.0, 512, 3, streams.COUPLING_B, r), 0.0, 1.0, H)
            for r in range(reps)
        ])
        target = 4 * (0.1 ** -0.25 - 1.1 ** -0.25)
        self.assertAlmostEqual(target, 3.20730, places=5)
        se = math.sqrt(np.var(vals ** 2) / reps)
        self.assertWithinSE(float(np.mean(vals ** 2)), target, se)


    def test_mesh_halving_rate(self):
        """The midpoint rule converges in L2 at a rate of at least 0.4 as the grid of the same path is refined"""
        reps, fine = 200, 4096
        cells = [16, 32, 64, 128, 256]
        sq = np.zeros(len(cells))
        for r in range(reps):
            B = brownian_grid(0.0, 1.0, fine, 6, streams.COUPLING_B, r)
            ref = wiener_grid_integral(1.0, 0.1, B, 0.0, 1.0, H)
            for k, c in enumerate(cells):
                step = fine // c
                coarse = GridPath(B.times[::step], B.values[::step], 'B')
                sq[k] += (wiener_grid_integral(1.0, 0.1, coarse, 0.0, 1.0, H) - ref) ** 2
        fit = fit_loglog(cells, np.sqrt(sq / reps))
        self.assertLessEqual(fit.slope, -0.4)


class RiemannWeightedTest(RosenBase):
    def setUp(self):
        self.P = PiecewiseLinearPath([-3.0, -2.0, -0.5, -0.1], [0.3, -0.2, 0.5, 0.1], 'P')

    def test_vs_quad(self):
        s, u0, u1 = 0.7, -2.5, -0.2

        def fn(u):
            return (1 - H / 2) * (s - 1 / u) ** (H / 2 - 2) * u ** -3 * self.P(u)

        ref, _ = integrate.quad(fn, u0, u1, points=[-2.0, -0.5], epsabs=0, epsrel=1e-12, limit=200)
        self.assertAlmostEqual(riemann_weighted_pl(s, self.P, u0, u1, H), ref, places=7)

    def test_vector(self):
        s = np.array([0.3, 0.7])
        vec = riemann_weighted_pl(s, self.P, -2.5, np.array([-0.2, -0.3]), H)
        self.assertAlmostEqual(vec[1], riemann_weighted_pl(0.7, self.P, -2.5, -0.3, H), places=12)
        self.assertEqual(riemann_weighted_pl(0.7, self.P, -1.0, -1.0, H), 0.0)

    def test_domain(self):
        with self.assertRaises(DomainError):
            riemann_weighted_pl(0.7, self.P, -1.0, 0.0, H)
        with self.assertRaises(DomainError):
            riemann_weighted_pl(0.0, self.P, -1.0, -0.5, H)
        with self.assertRaises(DomainError):
            riemann_weighted_pl(0.7, self.P, -4.0, -0.5, H)


    def test_linear_in_path(self):
        gen = np.random.default_rng(33)
        other = PiecewiseLinearPath([-3.0, -1.2, -0.7, -0.1], gen.normal(size=4), 'Q')
        for _ in range(20):
            a, b = gen.normal(size=2)
            s = gen.uniform(0.1, 1.5)
            u0, u1 = np.sort(gen.uniform(-3.0, -0.1, 2))
            mixed = self.P.scaled(a).plus(other.scaled(b))
            left = riemann_weighted_pl(s, mixed, u0, u1, H)
            right = a * riemann_weighted_pl(s, self.P, u0, u1, H) + b * riemann_weighted_pl(s, other, u0, u1, H)
            self.assertLessEqual(abs(left - right), 1e-10 * max(1.0, abs(left)))


class GradedQuadratureTest(RosenBase):
    def test_graded_mesh(self):
        self.assertEqual(graded_mesh(0.0, 1.0, 2, 2.0).tolist(), [0.0, 0.25, 1.0])
        nodes, weights = graded_nodes(1.0, 3.0, 8, 1.0)
        self.assertAlmostEqual(float(weights.sum()), 2.0, places=14)
        self.assertTrue(np.all((nodes > 1.0) & (nodes < 3.0)))

    def test_singular(self):
        val = graded_time_quadrature(lambda s: s ** -0.25, 1.0, singular_exponent=-0.25)
        self.assertRelClose(val, 4 / 3, 1e-6)

    def test_vector_valued(self):
        val = graded_time_quadrature(lambda s: np.column_stack((s ** -0.25, 2 * s ** -0.25)), 1.0,
                                     singular_exponent=-0.25)
        self.assertEqual(val.shape, (2,))
        self.assertRelClose(val[1], 8 / 3, 1e-6)

    def test_smooth_ungraded(self):
        self.assertRelClose(graded_time_quadrature(lambda s: s ** 2, 2.0), 8 / 3, 1e-3)
        self.assertRelClose(graded_time_quadrature(lambda s: s, 2.0, t0=1.0), 1.5, 1e-9)

    def test_edges(self):
        self.assertEqual(graded_time_quadrature(lambda s: s, 1.0, t0=1.0), 0.0)
        with self.assertRaises(DomainError):
            graded_time_quadrature(lambda s: s, 0.5, t0=1.0)
        with self.assertRaises(DomainError):
            graded_time_quadrature(lambda s: 1 / s, 1.0, singular_exponent=-1.0)

    def test_no_convergence(self):
        spec = QuadSpec(target_rel_err=1e-6, max_points=64)
        with self.assertRaises(NoConvergence):
            graded_time_quadrature(lambda s: s ** -0.9, 1.0, spec=spec)

    def test_spec_validation(self):
        with self.assertRaises(InvalidInput):
            QuadSpec(points=8)
        with self.assertRaises(InvalidInput):
            QuadSpec(target_rel_err=0.1)

    def test_monotone_under_domination(self):
        """0 <= F <= G pointwise gives a smaller integral, on shared nodes and run separately"""
        def F(s):
            return s ** -0.25 * np.cos(3 * s) ** 2

        def G(s):
            return s ** -0.25

        both = graded_time_quadrature(lambda s: np.column_stack((F(s), G(s))), 1.0, singular_exponent=-0.25)
        self.assertLessEqual(both[0], both[1])
        self.assertLessEqual(graded_time_quadrature(F, 1.0, singular_exponent=-0.25),
                             graded_time_quadrature(G, 1.0, singular_exponent=-0.25))
        self.assertGreaterEqual(graded_time_quadrature(F, 1.0, singular_exponent=-0.25), 0.0)
