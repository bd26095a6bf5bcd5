from scipy import integrate, stats

from tests.base import *
from privex.rosenblatt import streams
from privex.rosenblatt.exceptions import IntensityError, DomainError, MeshTooCoarse
from privex.rosenblatt.paths import TransportPath, sup_distance
from privex.rosenblatt.transport import simulate_transport, couple_transport, extract_gaps, block_anchor_errors, \
    default_block, increment_table, transport_variance


class SimulateTransportTest(RosenBase):
    def test_variance_formula(self):
        self.assertAlmostEqual(transport_variance(1, 1.0), 0.56767, places=5)
        self.assertAlmostEqual(transport_variance(64, 1.0), 1.0, places=3)
        self.assertEqual(transport_variance(4, 0.0), 0.0)

    def test_slopes(self):
        Z = simulate_transport(8, (0.0, 2.0), seed=1, key=(streams.Z1, 0))
        self.assertIsInstance(Z, TransportPath)
        self.assertEqual(Z(0.0), 0.0)
        self.assertTrue(np.allclose(np.abs(Z.slopes), 8.0))
        # consecutive segments move in opposite directions
        self.assertTrue(np.all(Z.slopes[1:] * Z.slopes[:-1] < 0))
        self.assertAlmostEqual(Z.slopes[0], 8.0 * Z.sigma0, places=8)
        self.assertEqual(list(Z.switch_times), list(Z.times[1:-1]))

    def test_reverse(self):
        Z = simulate_transport(8, (-1.0, 0.0), seed=1, reverse=True, key=(streams.Z2, 0))
        self.assertEqual((Z.direction, Z.origin), (-1, 0.0))
        self.assertEqual(Z(0.0), 0.0)
        self.assertTrue(np.allclose(np.abs(Z.slopes), 8.0))
        # in reversed time the path starts moving in direction sigma0
        self.assertAlmostEqual(-Z.slopes[-1], 8.0 * Z.sigma0, places=8)

    def test_deterministic(self):
        a = simulate_transport(16, (0.0, 1.0), seed=3, key=(streams.Z1, 5))
        b = simulate_transport(16, (0.0, 1.0), seed=3, key=(streams.Z1, 5))
        c = simulate_transport(16, (0.0, 1.0), seed=3, key=(streams.Z1, 6))
        self.assertTrue(np.array_equal(a.times, b.times))
        self.assertFalse(np.array_equal(a.times, c.times))

    def test_gaps_exponential(self):
        """Gaps between switches are Exp(n^2), forwards and backwards"""
        n = 4
        for reverse in (False, True):
            Z = simulate_transport(n, (0.0, 60.0), seed=2, reverse=reverse, key=(streams.INDEPENDENT, 0))
            gaps = extract_gaps(Z)
            self.assertEqual(len(gaps), len(Z.switch_times))
            self.assertTrue(np.all(gaps > 0))
            res = stats.kstest(gaps, 'expon', args=(0.0, 1.0 / n ** 2))
            self.assertGreater(res.pvalue, 1e-3)

    def test_no_switch_gaps(self):
        Z = TransportPath([0.0, 1.0], [0.0, 1.0], 'Z', n=1)
        self.assertEqual(len(extract_gaps(Z)), 0)

    def test_variance_at_one(self):
        reps = 2000
        z = np.array([simulate_transport(1, (0.0, 1.0), seed=9, key=(streams.Z1, r))(1.0) for r in range(reps)])
        se = math.sqrt(np.var(z ** 2) / reps)
        self.assertWithinSE(float(np.mean(z ** 2)), transport_variance(1, 1.0), se)
        self.assertWithinSE(float(np.mean(z)), 0.0, float(np.std(z)) / math.sqrt(reps))

    def test_variance_grid(self):
        """Var Z(t) against the closed form for n in {1, 4} and t in {1/2, 1}"""
        reps = 2000
        for n in (1, 4):
            z = np.array([simulate_transport(n, (0.0, 1.0), seed=11, key=(streams.Z3, n, r))([0.5, 1.0])
                          for r in range(reps)])
            for k, t in enumerate((0.5, 1.0)):
                sq = z[:, k] ** 2
                self.assertWithinSE(float(sq.mean()), transport_variance(n, t), math.sqrt(float(sq.var()) / reps))
        self.assertAlmostEqual(transport_variance(1, 0.5), 0.5 + math.expm1(-1.0) / 2, places=14)
        self.assertAlmostEqual(transport_variance(4, 0.5), 0.46875, places=7)

    def test_invalid(self):
        with self.assertRaises(IntensityError):
            simulate_transport(0, (0.0, 1.0))
        with self.assertRaises(DomainError):
            simulate_transport(4, (1.0, 1.0))


class IncrementTableTest(RosenBase):
    def setUp(self):
        self.table = increment_table(4, 0.5)

    def test_mass(self):
        t = self.table
        self.assertAlmostEqual(t.lam, 8.0)
        self.assertAlmostEqual(t.atom, math.exp(-8.0), places=15)
        self.assertAlmostEqual(t.cdf[-1] + t.atom, 1.0, places=8)
        self.assertTrue(np.all(np.diff(t.cdf) >= 0))

    def test_mean_fraction(self):
        """E[F] = 1/2 + (1 - exp(-2 lam)) / (4 lam)"""
        t = self.table
        mean = integrate.trapezoid(1.0 - t.cdf, t.grid)
        self.assertAlmostEqual(mean, 0.5 + (1 - math.exp(-2 * t.lam)) / (4 * t.lam), places=5)

    def test_quantile(self):
        t = self.table
        self.assertEqual(t.quantile(0.0), 0.0)
        self.assertEqual(t.quantile(1.0 - t.atom / 2), 1.0)
        q = t.quantile(np.linspace(0.01, 0.99, 50))
        self.assertTrue(np.all(np.diff(q) >= 0))
        self.assertTrue(np.all((q >= 0) & (q <= 1)))

    def test_switch_posterior(self):
        k, post = self.table.switch_posterior(0.3)
        self.assertEqual(k[0], 1)
        self.assertAlmostEqual(float(post.sum()), 1.0, places=12)
        self.assertTrue(np.all(post >= 0))

    def test_repeatable(self):
        self.assertTrue(np.array_equal(increment_table(4, 0.5).cdf, increment_table(4, 0.5, size=8193).cdf))


class CouplingTest(RosenBase):
    def test_default_block(self):
        self.assertEqual(default_block(16), 1 / 16)
        self.assertEqual(default_block(2), 2.0)

    def test_coupled_path(self):
        B = brownian_grid(0.0, 1.0, 1024, 0, streams.COUPLING_B, 0)
        Z = couple_transport(B, 32, seed=0, key=(streams.Z1, 0))
        self.assertEqual((Z.start, Z.end, Z(0.0)), (0.0, 1.0, 0.0))
        self.assertTrue(np.allclose(np.abs(Z.slopes), 32.0))
        self.assertTrue(np.all(Z.slopes[1:] * Z.slopes[:-1] < 0))
        self.assertEqual(len(block_anchor_errors(Z, B)), 31)

    def test_coupled_reverse(self):
        B = brownian_grid(-1.0, 0.0, 1024, 0, streams.COUPLING_B, 1)
        Z = couple_transport(B, 32, seed=0, reverse=True, key=(streams.Z2, 0))
        self.assertEqual(Z(0.0), 0.0)
        self.assertEqual(Z.direction, -1)

    def test_error_shrinks(self):
        """The coupled path follows B more closely as n grows"""
        errs = {}
        for n in (16, 128):
            vals = []
            for r in range(20):
                B = brownian_grid(0.0, 1.0, 4096, 1, streams.COUPLING_B, r)
                vals.append(sup_distance(couple_transport(B, n, seed=1, key=(streams.Z1, r)), B))
            errs[n] = float(np.median(vals))
        self.assertLess(errs[128], 0.75 * errs[16])

    def test_marginal_law(self):
        """Coupled paths are transport processes in law: Var Z(1) matches the closed form"""
        reps, n = 400, 4
        z = []
        for r in range(reps):
            B = brownian_grid(0.0, 1.0, 256, 2, streams.COUPLING_B, r)
            z.append(couple_transport(B, n, seed=2, key=(streams.Z1, r))(1.0))
        z = np.asarray(z)
        se = math.sqrt(np.var(z ** 2) / reps)
        self.assertWithinSE(float(np.mean(z ** 2)), transport_variance(n, 1.0), se)

    def test_block_too_short(self):
        B = brownian_grid(0.0, 1.0, 64, 0, streams.COUPLING_B, 0)
        with self.assertRaises(MeshTooCoarse):
            couple_transport(B, 16, block_mesh=0.01)
        with self.assertRaises(IntensityError):
            couple_transport(B, 0)

    def test_beats_independent_at_anchors(self):
        """At the block boundaries the coupled path is much closer to B than an independent transport"""
        n, reps = 16, 200
        coupled, independent = [], []
        for r in range(reps):
            B = brownian_grid(0.0, 1.0, 1024, 4, streams.COUPLING_B, r)
            Z = couple_transport(B, n, seed=4, key=(streams.Z1, r))
            Zi = simulate_transport(n, (0.0, 1.0), seed=4, key=(streams.INDEPENDENT, r))
            coupled.append(float(np.mean(block_anchor_errors(Z, B))))
            independent.append(float(np.mean(block_anchor_errors(Zi, B))))
        self.assertLess(np.median(coupled), 0.5 * np.median(independent))
