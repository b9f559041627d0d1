import math

import numpy as np
import pytest

from toruslab.basin import SampleGrid
from toruslab.markov import (ADEQUACY_FACTOR, CylinderTable,
                             InsufficientSamples, OrbitSource,
                             cylinder_count_rate, cylinder_frequencies,
                             entropy_count_bound_check, entropy_rate_estimate,
                             entropy_tables, itinerary, locate,
                             partition_entropy, weighted_merge)
from toruslab.weakstar import DiscreteMeasure

PHI = (1.0 + math.sqrt(5.0)) / 2.0
LAMBDA = (3.0 + math.sqrt(5.0)) / 2.0
LOG_LAMBDA = math.log(LAMBDA)
SEED_POINT = (0.2137214321, 0.5721347123)


def fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


class TestConstruction:
    def test_areas_sum_to_one(self, partition):
        assert abs(sum(partition.areas) - 1.0) < 1e-9

    def test_golden_areas(self, partition):
        # side lengths are q and gq with g = 1/phi; areas in golden ratios
        g = 1.0 / PHI
        q2 = g * g / (2.0 - g)
        expected = sorted([q2, q2, g * q2, g * q2, g * g * q2])
        assert np.allclose(sorted(partition.areas), expected, atol=1e-12)

    def test_diameter_below_gate(self, partition):
        assert partition.max_diameter < 0.6

    def test_spectral_radius(self, partition):
        rho = max(abs(np.linalg.eigvals(partition.transition.astype(float))))
        assert abs(rho - LAMBDA) < 1e-6

    def test_boundary_invariance_resample(self, partition):
        # re-assert the Markov boundary conditions at 10^4 samples
        defect = partition.validate_markov_boundary(1250)
        assert defect <= 1e-9

    def test_fragments_tile(self, partition):
        def area(poly):
            x, y = poly[:, 0], poly[:, 1]
            return 0.5 * abs(float(np.dot(x, np.roll(y, -1))
                                   - np.dot(y, np.roll(x, -1))))
        frags = partition.piece_fragments()
        total = sum(area(f) for fs in frags for f in fs)
        assert abs(total - 1.0) < 1e-9
        for fs in frags:
            for f in fs:
                assert np.all(f >= -1e-12) and np.all(f <= 1 + 1e-12)

    def test_alphabet_matches_pieces(self, partition):
        assert partition.k == len(partition.boxes) == 5
        assert partition.transition.shape == (5, 5)


class TestLocate:
    def test_origin_lowest_index(self, partition):
        # the origin is a corner of several pieces; tie-break gives piece 0
        assert locate(partition, (0.0, 0.0)) == 0

    def test_centroids(self, partition):
        for idx, poly in enumerate(partition.pieces):
            c = poly.mean(axis=0) % 1.0
            assert locate(partition, c) == idx

    def test_million_random_points(self, partition, cat):
        pts = np.random.default_rng(42).random((1_000_000, 2))
        syms = locate(partition, pts)
        fractions = np.bincount(syms, minlength=5) / len(pts)
        assert np.all(np.abs(fractions - np.array(partition.areas)) < 3e-3)

    def test_vectorized_matches_scalar(self, partition, rng):
        pts = rng.random((200, 2))
        vec = locate(partition, pts)
        scal = [locate(partition, p) for p in pts]
        assert list(vec) == scal


class TestItinerary:
    def test_fixed_point_constant(self, cat, partition):
        assert itinerary(cat, partition, (0.0, 0.0), 6) == (0,) * 6

    def test_depth_one(self, cat, partition, rng):
        p = rng.random(2)
        assert itinerary(cat, partition, p, 1) == (locate(partition, p),)

    def test_shift_property(self, cat, partition, rng):
        for _ in range(20):
            p = rng.random(2)
            full = itinerary(cat, partition, p, 7)
            tail = itinerary(cat, partition, cat.step(p), 6)
            assert full[1:] == tail


class TestCylinderTables:
    def test_dirac_single_cylinder(self, cat, partition):
        t = cylinder_frequencies(cat, partition,
                                 DiscreteMeasure.dirac((0.0, 0.0)), 6)
        assert t.counts == {(0,) * 6: 1}
        assert partition_entropy(t) == 0.0

    def test_grid_depth1_matches_areas(self, cat, partition):
        g = 256
        t = cylinder_frequencies(cat, partition, SampleGrid(resolution=g), 1)
        for i, a in enumerate(partition.areas):
            assert abs(t.counts[(i,)] / t.total - a) < 2.0 / g

    def test_observed_at_most_admissible(self, cat, partition):
        tables = entropy_tables(cat, partition,
                                OrbitSource(SEED_POINT, 100_000),
                                [1, 2, 3, 4, 5, 6])
        counts = dict(cylinder_count_rate(partition, range(1, 7)).counts)
        for d, t in tables.items():
            assert len(t.counts) <= counts[d]

    def test_shift_consistency_exact(self, cat, partition):
        tables = entropy_tables(cat, partition,
                                OrbitSource(SEED_POINT, 50_000), [7, 8])
        assert tables[8].marginal().counts == tables[7].counts

    def test_shift_consistency_grid_source(self, cat, partition):
        tables = entropy_tables(cat, partition, SampleGrid(resolution=64),
                                [3, 4])
        assert tables[4].marginal().counts == tables[3].counts

    def test_nonuniform_weights_rejected(self, cat, partition):
        mu = DiscreteMeasure(np.array([[0.1, 0.1], [0.6, 0.7]]),
                             np.array([0.25, 0.75]))
        with pytest.raises(ValueError, match="uniform"):
            cylinder_frequencies(cat, partition, mu, 3)


class TestEntropy:
    def test_single_cylinder_zero(self):
        t = CylinderTable(depth=3, counts={(0, 0, 0): 17}, total=17)
        assert partition_entropy(t) == 0.0

    def test_uniform_log_m(self):
        t = CylinderTable(depth=2, counts={(0, 0): 5, (0, 1): 5, (1, 0): 5},
                          total=15)
        assert abs(partition_entropy(t) - math.log(3)) < 1e-15

    def test_entropy_le_log_observed(self, cat, partition):
        t = cylinder_frequencies(cat, partition,
                                 OrbitSource(SEED_POINT, 30_000), 6)
        assert partition_entropy(t) <= math.log(len(t.counts)) + 1e-12

    def test_grid_depth1_entropy_matches_areas(self, cat, partition):
        t = cylinder_frequencies(cat, partition, SampleGrid(resolution=512), 1)
        exact = -sum(a * math.log(a) for a in partition.areas)
        assert abs(partition_entropy(t) - exact) < 1e-3

    def test_rate_estimate_dirac_zero(self, cat, partition):
        est = entropy_rate_estimate(cat, partition,
                                    OrbitSource((0.0, 0.0), 2000),
                                    range(1, 9))
        assert est.h_est == 0.0

    def test_rate_estimate_leb_short(self, cat, partition):
        est = entropy_rate_estimate(cat, partition,
                                    OrbitSource(SEED_POINT, 300_000),
                                    range(4, 9))
        assert est.depth_used == 8
        assert abs(est.h_est - LOG_LAMBDA) < 0.15

    def test_adjacent_depths_stable(self, cat, partition):
        est = entropy_rate_estimate(cat, partition,
                                    OrbitSource(SEED_POINT, 300_000),
                                    range(4, 9))
        rates = [h for _, h, _, ok in est.sequence if ok]
        assert max(abs(a - b) for a, b in zip(rates, rates[1:])) < 0.05

    def test_inadequate_raises(self, cat, partition):
        with pytest.raises(InsufficientSamples):
            entropy_rate_estimate(cat, partition,
                                  OrbitSource(SEED_POINT, 120), [10])

    def test_weighted_merge_halves(self, cat, partition):
        leb = cylinder_frequencies(cat, partition,
                                   OrbitSource(SEED_POINT, 20_000), 4)
        dirac = cylinder_frequencies(cat, partition,
                                     DiscreteMeasure.dirac((0.0, 0.0)), 4)
        mix = weighted_merge([leb, dirac], [0.5, 0.5])
        share = mix.counts[(0, 0, 0, 0)] / mix.total
        assert abs(share - (0.5 + 0.5 * leb.counts.get((0, 0, 0, 0), 0)
                            / leb.total)) < 1e-3


class TestCountRates:
    def test_depth_one_log_k(self, partition):
        rates = cylinder_count_rate(partition, [1])
        assert abs(rates.rates[0][1] - math.log(5)) < 1e-15

    def test_counts_are_fibonacci(self, partition):
        # admissible words at depth n number F(2n+3), an independent
        # recurrence check of the transition structure
        counts = dict(cylinder_count_rate(partition, range(1, 11)).counts)
        for n in range(1, 11):
            assert counts[n] == fib(2 * n + 3)

    def test_rate14_near_log_lambda(self, partition):
        rates = cylinder_count_rate(partition, range(1, 15))
        r14 = dict(rates.rates)[14]
        assert abs(r14 - LOG_LAMBDA) <= 0.1 * LOG_LAMBDA

    def test_k0_is_supremum(self, partition):
        rates = cylinder_count_rate(partition, range(1, 15))
        assert all(rates.k0_est >= r for _, r in rates.rates)
        assert rates.k0_est == rates.rates[0][1]


class TestCountBound:
    def test_fixed_point_nonnegative(self, cat, partition):
        m = entropy_count_bound_check(cat, partition,
                                      DiscreteMeasure.dirac((0.0, 0.0)),
                                      0.1, 8)
        assert m >= 0.0

    def test_full_cover_case(self, cat, partition):
        # tiny epsilon forces A to cover nearly everything observed:
        # log #A >= H always
        m = entropy_count_bound_check(cat, partition,
                                      OrbitSource(SEED_POINT, 50_000),
                                      0.01, 5)
        assert m >= 0.0

    def test_lebesgue_margin(self, cat, partition):
        m = entropy_count_bound_check(cat, partition,
                                      OrbitSource(SEED_POINT, 500_000),
                                      0.1, 8)
        assert m >= -0.05

    def test_epsilon_domain(self, cat, partition):
        with pytest.raises(ValueError):
            entropy_count_bound_check(cat, partition,
                                      DiscreteMeasure.dirac((0.0, 0.0)),
                                      0.3, 5)
