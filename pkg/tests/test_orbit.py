import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rovella import map_core as mc
from rovella import noise, orbit
from rovella.errors import CapExceeded, DomainError, EmptyIntersection, SingularHit

SQRT_005 = 0.22360679774997896
SQRT_01 = 0.31622776601683794
INV_SQRT2 = 0.7071067811865476


class TestIterate:
    def test_fixed_point_orbit(self, fam, quiet_stream):
        tr = orbit.iterate(fam, quiet_stream, 1.0, 5, 0.1)
        assert np.all(tr.points == 1.0)
        assert tr.log_der[5] == pytest.approx(5 * math.log(4.0), rel=1e-14)

    def test_one_step(self, fam, quiet_stream):
        tr = orbit.iterate(fam, quiet_stream, 0.5, 1, 0.1)
        assert tr.points[1] == pytest.approx(-0.5, abs=1e-15)

    def test_empty_product(self, fam, noisy_stream):
        tr = orbit.iterate(fam, noisy_stream, 0.3, 1, 0.1)
        assert tr.log_der[0] == 0.0

    def test_points_stay_in_interval(self, fam, noisy_stream):
        tr = orbit.iterate(fam, noisy_stream, 0.77, 500, 0.05)
        assert np.all(np.abs(tr.points) <= 1.0)
        assert np.all(tr.points != 0.0)

    def test_visits_flags(self, fam, noisy_stream):
        tr = orbit.iterate(fam, noisy_stream, 0.77, 200, 0.1)
        hood = mc.critical_neighborhoods(fam, 0.0, 0.1)
        assert np.array_equal(tr.visits, hood.contains(tr.points))

    def test_singular_hit(self, quiet_stream):
        # piecewise-linear map sending 0.75 -> 0.5 -> exactly 0
        pos = mc.Branch(
            value=lambda t, x: 2.0 * np.asarray(x, dtype=float) - 1.0,
            deriv=lambda t, x: np.full_like(np.asarray(x, dtype=float), 2.0),
            second=lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
        )
        neg = mc.Branch(
            value=lambda t, x: 2.0 * np.asarray(x, dtype=float) + 1.0,
            deriv=lambda t, x: np.full_like(np.asarray(x, dtype=float), 2.0),
            second=lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
        )
        fam_lin = mc.MapFamily(
            s=1.5, eps_max=0.1, branch_pos=pos, branch_neg=neg, k1=1.0, k2=4.0
        )
        with pytest.raises(SingularHit):
            orbit.iterate(fam_lin, quiet_stream, 0.75, 3, 0.1)

    def test_domain_error_at_zero(self, fam, quiet_stream):
        with pytest.raises(DomainError):
            orbit.iterate(fam, quiet_stream, 0.0, 3, 0.1)


class TestExpansionSum:
    def test_single_term(self, fam, noisy_stream):
        tr = orbit.iterate(fam, noisy_stream, 0.3, 5, 0.1)
        assert orbit.expansion_sum(tr, 1) == 1.0 / 0.3

    def test_fixed_point_geometric(self, fam, quiet_stream):
        tr = orbit.iterate(fam, quiet_stream, 1.0, 3, 0.1)
        assert orbit.expansion_sum(tr, 3) == pytest.approx(21.0, rel=1e-13)

    def test_two_terms(self, fam, quiet_stream):
        tr = orbit.iterate(fam, quiet_stream, 0.5, 2, 0.1)
        assert orbit.expansion_sum(tr, 2) == pytest.approx(6.0, rel=1e-13)

    def test_monotone_in_n(self, fam, noisy_stream):
        tr = orbit.iterate(fam, noisy_stream, 0.62, 40, 0.1)
        sums = [orbit.expansion_sum(tr, n) for n in range(1, 41)]
        assert all(b >= a for a, b in zip(sums, sums[1:]))


class TestReturnDepth:
    def test_zero_case(self, fam):
        assert orbit.return_depth(fam, 0.0, 0.5, 0.1) == 0

    def test_scan_example(self, fam):
        # DT * |x| = 0.04; first r with e^{-r} * 0.5 <= 0.04 is 3
        assert orbit.return_depth(fam, 0.0, 0.1, 0.5) == 3

    def test_boundary_of_definition(self, fam):
        # DT * |x| exactly delta gives r = 0
        x = 0.5
        delta = mc.derivative(fam, 0.0, x) * x
        assert orbit.return_depth(fam, 0.0, x, delta) == 0

    @given(
        x=st.floats(min_value=1e-4, max_value=0.999),
        delta=st.floats(min_value=1e-3, max_value=0.5),
    )
    @settings(max_examples=120, deadline=None)
    def test_matches_brute_scan(self, fam, x, delta):
        prod = mc.derivative(fam, 0.0, x) * x
        r_scan = 0
        while prod < math.exp(-r_scan) * delta:
            r_scan += 1
        assert orbit.return_depth(fam, 0.0, x, delta) == r_scan

    def test_vectorized_matches_scalar(self, fam):
        rng = np.random.default_rng(3)
        xs = rng.uniform(-1, 1, 500)
        xs = xs[xs != 0]
        ts = rng.uniform(-0.1, 0.1, xs.size)
        vec = orbit.return_depths_array(fam, ts, xs, 0.02)
        scal = [orbit.return_depth(fam, t, x, 0.02) for t, x in zip(ts, xs)]
        assert np.array_equal(vec, scal)


class TestCocycle:
    def test_additivity_random_splits(self, fam, noisy_stream):
        tr = orbit.iterate(fam, noisy_stream, 0.37, 200, 0.05)
        rng = np.random.default_rng(11)
        for _ in range(200):
            k, m = sorted(rng.integers(0, 201, size=2))
            if k == m:
                continue
            via_logs = tr.log_der[m] - tr.log_der[k]
            direct = 0.0
            for j in range(k, m):
                direct += math.log(
                    mc.derivative(fam, noisy_stream.get(j), tr.points[j])
                )
            assert via_logs == pytest.approx(direct, rel=1e-9, abs=1e-12)


class TestBranchPartition:
    def test_one_step(self, fam, quiet_stream):
        bp = orbit.branch_partition(fam, quiet_stream, 1)
        assert [(b.left, b.right) for b in bp.branches] == [(-1.0, 0.0), (0.0, 1.0)]

    def test_two_step_cuts(self, fam, quiet_stream):
        bp = orbit.branch_partition(fam, quiet_stream, 2)
        assert len(bp.branches) == 4
        # bisection oracle: T(x) = 0 at |x| = 1/sqrt(2)
        assert bp.cut_points[1] == pytest.approx(-INV_SQRT2, abs=1e-12)
        assert bp.cut_points[3] == pytest.approx(INV_SQRT2, abs=1e-12)

    def test_three_step_count(self, fam, quiet_stream):
        bp = orbit.branch_partition(fam, quiet_stream, 3)
        assert len(bp.branches) == 8

    def test_sign_scan_oracle(self, fam, noisy_stream):
        # uniform grid scan: monotone inside every branch, a cut between
        # consecutive branches
        n = 5
        bp = orbit.branch_partition(fam, noisy_stream, n)
        xs = np.linspace(-1 + 1e-9, 1 - 1e-9, 200_001)
        vals = xs.copy()
        for k in range(n):
            vals = mc.evaluate(fam, noisy_stream.get(k), np.where(vals == 0, 1e-300, vals))
        inside = np.searchsorted(bp.cut_points, xs) - 1
        diffs = np.diff(vals)
        same_branch = inside[:-1] == inside[1:]
        assert np.all(diffs[same_branch] > 0)

    def test_images_match_orbit_limits(self, fam, noisy_stream):
        # probe 1e-11 inside the branch: past the cut's own bisection
        # uncertainty (~1e-14 in x), and DT^4 <= 256 keeps the image within
        # ~3e-9 of the one-sided limit
        bp = orbit.branch_partition(fam, noisy_stream, 4)
        for br in bp.branches:
            val_l = orbit.orbit_value(fam, noisy_stream, br.left + 1e-11, 4)
            val_r = orbit.orbit_value(fam, noisy_stream, br.right - 1e-11, 4)
            assert val_l == pytest.approx(br.image_left, abs=1e-8)
            assert val_r == pytest.approx(br.image_right, abs=1e-8)

    def test_cap(self, fam, quiet_stream):
        with pytest.raises(CapExceeded):
            orbit.branch_partition(fam, quiet_stream, 50)

    def test_locate_rejects_cuts(self, fam, quiet_stream):
        bp = orbit.branch_partition(fam, quiet_stream, 2)
        with pytest.raises(DomainError):
            bp.locate(INV_SQRT2 + 1e-14)
        assert bp.locate(0.3).left == 0.0


class TestPreimageInBranch:
    def test_full_image_returns_branch(self, fam, quiet_stream):
        bp = orbit.branch_partition(fam, quiet_stream, 1)
        br = bp.branches[1]
        a, b = orbit.preimage_in_branch(bp, br, (br.image_left, br.image_right))
        assert (a, b) == (br.left, br.right)

    def test_invert_quadratic(self, fam, quiet_stream):
        bp = orbit.branch_partition(fam, quiet_stream, 1)
        a, b = orbit.preimage_in_branch(bp, bp.branches[1], (-0.9, -0.8))
        assert a == pytest.approx(SQRT_005, abs=1e-9)
        assert b == pytest.approx(SQRT_01, abs=1e-9)

    def test_nested_targets_nested_preimages(self, fam, noisy_stream):
        bp = orbit.branch_partition(fam, noisy_stream, 3)
        br = bp.branches[5]
        mid = 0.5 * (br.image_left + br.image_right)
        w = br.image_right - br.image_left
        outer = orbit.preimage_in_branch(bp, br, (mid - 0.3 * w, mid + 0.3 * w))
        inner = orbit.preimage_in_branch(bp, br, (mid - 0.1 * w, mid + 0.1 * w))
        assert outer[0] <= inner[0] <= inner[1] <= outer[1]

    def test_roundtrip_endpoints(self, fam, noisy_stream):
        bp = orbit.branch_partition(fam, noisy_stream, 3)
        br = bp.branches[2]
        mid = 0.5 * (br.image_left + br.image_right)
        w = br.image_right - br.image_left
        target = (mid - 0.2 * w, mid + 0.25 * w)
        a, b = orbit.preimage_in_branch(bp, br, target)
        assert orbit.orbit_value(fam, noisy_stream, a, 3) == pytest.approx(target[0], abs=1e-9)
        assert orbit.orbit_value(fam, noisy_stream, b, 3) == pytest.approx(target[1], abs=1e-9)

    def test_empty_intersection(self, fam, quiet_stream):
        bp = orbit.branch_partition(fam, quiet_stream, 1)
        br = bp.branches[1]  # image (-1, 1]
        with pytest.raises(EmptyIntersection):
            orbit.preimage_in_branch(bp, bp.branches[0], (br.image_left - 3, br.image_left - 2))


class TestEnsembleOrbits:
    def test_matches_scalar_path(self, fam):
        ens = orbit.ensemble_orbits(fam, 1, 0.01, 30, 8, 0.05)
        for i in range(8):
            strm = noise.stream(noise.derive_seed(1, i), 0.01)
            tr = orbit.iterate(fam, strm, float(ens.x0[i]), 30, 0.05)
            assert np.allclose(ens.points[i], tr.points, rtol=0, atol=0)
            assert np.allclose(ens.log_der[i], tr.log_der, rtol=1e-12, atol=1e-12)
            assert np.array_equal(ens.depths[i], tr.depths[:30])

    def test_explicit_starts(self, fam):
        x0 = np.array([0.3, -0.4, 0.9])
        ens = orbit.ensemble_orbits(fam, 1, 0.0, 5, 3, 0.05, x0=x0)
        assert np.array_equal(ens.points[:, 0], x0)
