import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from borncount import (Ket, MacrostatePartition, branch_vector,
                       build_refinement, consistency_index, convergence_study,
                       counting_probability, inner_product, max_safe_depth,
                       mu_prime, random_ket, random_partition, reconstruct,
                       support, uniform_grid)
from borncount.errors import (BornCountError, DepthGuardError,
                              NormalizationError, UnknownLabelError)
from borncount.measure import integrate

from conftest import GAUSS_TAIL_1


def two_block_state(p_left, cells=1024):
    g = uniform_grid(0, 1, cells)
    left = g.coordinates < 0.5
    amps = np.where(left, math.sqrt(p_left), math.sqrt(1 - p_left)) * math.sqrt(2)
    part = MacrostatePartition.from_mask(g, left, "A", "B")
    return Ket(g, amps).normalized(), part


class TestSupport:
    def test_exact_zeros(self):
        g = uniform_grid(0, 1, 100)
        psi = Ket(g, np.where(g.coordinates < 0.5, 1.0, 0.0)).normalized()
        assert support(psi).members.tolist() == list(range(50))

    def test_full_support_threshold_zero(self, gauss_psi, gauss_grid):
        assert len(support(gauss_psi, 0.0)) == gauss_grid.size

    def test_gaussian_default_threshold(self):
        g = uniform_grid(-40, 40, 2**16)
        x = g.coordinates
        psi = Ket(g, (2 * math.pi) ** -0.25 * np.exp(-x**2 / 4)).normalized()
        d = support(psi).members
        assert len(d) < g.size
        assert np.all(np.diff(d) == 1)  # contiguous
        outside = np.setdiff1d(np.arange(g.size), d)
        assert float(np.sum(psi.cell_masses[outside])) <= 1e-12

    def test_negative_threshold(self, gauss_psi):
        with pytest.raises(BornCountError):
            support(gauss_psi, -1.0)


class TestMuPrime:
    def test_total_mass(self, gauss_psi):
        d = mu_prime(gauss_psi)
        assert integrate(d, support(gauss_psi, 0.0)) == pytest.approx(1.0, abs=1e-10)

    def test_uniform(self):
        g = uniform_grid(0, 1, 64)
        psi = Ket(g, np.ones(64)).normalized()
        assert np.allclose(mu_prime(psi).masses, 1 / 64, rtol=1e-12)

    def test_left_block_mass(self):
        psi, part = two_block_state(0.3)
        assert integrate(mu_prime(psi), part.subset("A")) == pytest.approx(0.3, abs=1e-12)

    def test_non_unit(self):
        g = uniform_grid(0, 1, 4)
        with pytest.raises(NormalizationError):
            mu_prime(Ket(g, 2 * np.ones(4)))


class TestBuildRefinement:
    def test_level_zero(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 0)
        assert seq.member_masses(0) == pytest.approx([1.0], abs=1e-12)
        assert np.array_equal(np.sort(seq.member_cells(0, 1)), support(gauss_psi).members)

    def test_uniform_quarters(self):
        g = uniform_grid(0, 1, 1024)
        psi = Ket(g, np.ones(g.size)).normalized()
        seq = build_refinement(psi, MacrostatePartition.single(g), 2)
        h = 1 / 1024
        for k, (lo, hi) in enumerate([(0, .25), (.25, .5), (.5, .75), (.75, 1)], start=1):
            x = g.coordinates[seq.member_cells(2, k)]
            assert x.min() - h / 2 == pytest.approx(lo, abs=h)
            assert x.max() + h / 2 == pytest.approx(hi, abs=h)

    def test_triangular_cuts(self):
        # analytic inverse CDF of density 2u: sqrt(k / 4)
        g = uniform_grid(0, 1, 4096)
        psi = Ket(g, np.sqrt(2 * g.coordinates)).normalized()
        seq = build_refinement(psi, MacrostatePartition.single(g), 2)
        expected = [math.sqrt(k / 4) for k in (1, 2, 3)]
        assert seq.coordinate_cuts(2) == pytest.approx(expected, abs=1 / 4096)

    def test_depth_guard(self):
        g = uniform_grid(0, 1, 64)
        psi = Ket(g, np.ones(64)).normalized()
        with pytest.raises(DepthGuardError, match="maximum safe n is 5"):
            build_refinement(psi, MacrostatePartition.single(g), 6)
        build_refinement(psi, MacrostatePartition.single(g), 5)

    def test_max_safe_depth_exact_powers(self):
        assert max_safe_depth(1 / 64) == 5
        assert max_safe_depth(0.5) == 0
        assert max_safe_depth(0.3) == 0

    def test_unknown_ordering(self, gauss_psi, halfline):
        with pytest.raises(BornCountError):
            build_refinement(gauss_psi, halfline, 2, ordering="random")

    def test_macro_ordering_groups_labels(self):
        g = uniform_grid(0, 1, 256)
        psi = random_ket(0, g)
        part = random_partition(1, g, 3, mode="cells")
        seq = build_refinement(psi, part, 3)
        assert all(seq.label_blocks(a) == 1 for a in part.label_set)
        assert np.all(np.diff(seq.ordered_codes) >= 0)

    def test_parents(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 3)
        assert seq.parents(2).tolist() == [1, 1, 2, 2]
        with pytest.raises(BornCountError):
            seq.parents(0)


def check_structure(seq):
    """The four structural invariants, at every level."""
    psi = seq.psi
    eps = seq.eps_grid
    d = np.sort(seq.order)
    for n in range(seq.n_max + 1):
        cells = [seq.member_cells(n, k) for k in range(1, 2**n + 1)]
        # disjoint, covering D
        joined = np.concatenate(cells)
        assert len(joined) == len(np.unique(joined))
        assert np.array_equal(np.sort(joined), d)
        # equal mass
        assert np.max(np.abs(seq.member_masses(n) - 2.0**-n)) <= eps
        # refinement
        if n > 0:
            for k, par in zip(range(1, 2**n + 1), seq.parents(n)):
                assert np.all(np.isin(cells[k - 1], seq.member_cells(n - 1, int(par))))
        # orthogonality
        vecs = [branch_vector(seq, n, k).ket for k in range(1, 2**n + 1)]
        for i in range(min(len(vecs), 8)):
            for j in range(len(vecs)):
                if i != j:
                    assert inner_product(vecs[i], vecs[j]) == 0
        # reconstruction on D
        rec = reconstruct(seq, n).amplitudes
        assert np.max(np.abs(rec[d] - psi.amplitudes[d])) <= 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_structure_random_states(seed):
    g = uniform_grid(0, 1, 2048)
    psi = random_ket(seed, g, smoothness=4)
    part = random_partition(seed, g, 3)
    seq = build_refinement(psi, part, 0)
    seq = build_refinement(psi, part, max_safe_depth(seq.eps_grid))
    check_structure(seq)


class TestBranchVectors:
    def test_uniform_half(self):
        g = uniform_grid(0, 1, 1024)
        psi = Ket(g, np.ones(g.size)).normalized()
        seq = build_refinement(psi, MacrostatePartition.single(g), 1)
        bv = branch_vector(seq, 1, 1)
        left = g.coordinates < 0.5
        assert np.allclose(bv.ket.amplitudes[left], math.sqrt(2) * psi.amplitudes[left], rtol=1e-15)
        assert np.all(bv.ket.amplitudes[~left] == 0)
        assert bv.ket.norm_squared() == pytest.approx(1.0, abs=seq.eps_grid * 2)

    def test_distinct_k_orthogonal(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 4)
        for k in range(2, 17):
            assert inner_product(branch_vector(seq, 4, 1).ket, branch_vector(seq, 4, k).ket) == 0

    def test_gaussian_level6_epsilon_accounting(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 6)
        bound = 2**6 * seq.eps_grid
        for k in range(1, 65):
            bv = branch_vector(seq, 6, k)
            assert math.sqrt(1 - bound) <= math.sqrt(bv.ket.norm_squared()) <= math.sqrt(1 + bound)
            assert set(np.flatnonzero(bv.ket.amplitudes).tolist()) <= set(bv.cells.tolist())

    @pytest.mark.xfail(strict=True, reason="cut-cell imbalance on this grid reaches 2.5e-3 in norm, "
                                           "inside the epsilon accounting bound of 3.1e-3")
    def test_gaussian_level6_norms_within_1e3(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 6)
        norms = [math.sqrt(branch_vector(seq, 6, k).ket.norm_squared()) for k in range(1, 65)]
        assert max(abs(v - 1) for v in norms) <= 1e-3

    @pytest.mark.parametrize("n,k", [(3, 0), (3, 9), (5, 1)])
    def test_out_of_range(self, gauss_psi, halfline, n, k):
        seq = build_refinement(gauss_psi, halfline, 3)
        with pytest.raises(BornCountError):
            branch_vector(seq, n, k)


class TestReconstruct:
    def test_level_zero_exact(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 0)
        d = seq.order
        assert np.array_equal(reconstruct(seq, 0).amplitudes[d], gauss_psi.amplitudes[d])

    def test_random_level8(self):
        g = uniform_grid(0, 1, 2**14)
        psi = random_ket(7, g, smoothness=8)
        seq = build_refinement(psi, random_partition(7, g, 2), 8)
        diff = reconstruct(seq, 8) - psi
        assert math.sqrt(diff.norm_squared()) <= 1e-12


class TestConsistency:
    def test_single_label(self, gauss_psi, gauss_grid):
        seq = build_refinement(gauss_psi, MacrostatePartition.single(gauss_grid), 5)
        assert consistency_index(seq, 5, "all").members == frozenset(range(1, 33))

    def test_infinite_tau(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 5)
        assert consistency_index(seq, 5, "gt", math.inf).members == frozenset(range(1, 33))

    def test_straddle_at_03(self):
        psi, part = two_block_state(0.3)
        seq = build_refinement(psi, part, 4)
        # cumulative-mass cut at 0.3 falls inside member floor(0.3 * 16) + 1
        straddle = math.floor(0.3 * 16) + 1
        a = consistency_index(seq, 4, "A").members
        b = consistency_index(seq, 4, "B").members
        assert a == frozenset(range(1, straddle))
        assert b == frozenset(range(straddle + 1, 17))
        assert len(a) + len(b) == 15

    def test_unknown_label(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 2)
        with pytest.raises(UnknownLabelError):
            consistency_index(seq, 2, "x")

    def test_disjoint_for_small_tau(self):
        g = uniform_grid(0, 1, 4096)
        psi = random_ket(2, g, smoothness=3)
        part = random_partition(3, g, 4, mode="cells")
        seq = build_refinement(psi, part, 4, ordering="coordinate")
        sets = [consistency_index(seq, 4, a, tau=0.49).members for a in part.label_set]
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                assert not sets[i] & sets[j]


class TestCounting:
    def test_single_label_is_one(self, gauss_psi, gauss_grid):
        seq = build_refinement(gauss_psi, MacrostatePartition.single(gauss_grid), 8)
        assert all(counting_probability(seq, n, "all") == 1.0 for n in range(9))

    def test_uniform_four_components(self):
        # four equal-amplitude orthogonal components, each a block of 256 cells
        g = uniform_grid(0, 4, 1024)
        psi = Ket(g, np.ones(g.size)).normalized()
        comp = np.floor(g.coordinates).astype(int)
        part = MacrostatePartition.from_codes(g, np.where(comp == 0, 0, 1), ["A", "B"])
        seq = build_refinement(psi, part, 2)
        assert counting_probability(seq, 2, "A") == 0.25
        assert counting_probability(seq, 2, "B") == 0.75

    def test_gaussian_level12(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 12)
        assert counting_probability(seq, 12, "le") == pytest.approx(1 - GAUSS_TAIL_1, abs=1e-3)
        assert counting_probability(seq, 12, "gt") == pytest.approx(GAUSS_TAIL_1, abs=1e-3)


class TestConvergenceStudy:
    def test_report_fields_and_bounds(self, gauss_psi, halfline):
        seq = build_refinement(gauss_psi, halfline, 12)
        report = convergence_study(seq)
        assert len(report.rows) == 13 * 2
        assert report.all_within_bound
        for row in report.rows:
            assert row.abs_error >= 0 and 0 <= row.deficit <= 1
            assert row.deficit <= (2 - 1) * 2.0**-row.n
        final = report.level(12)
        assert all(r.abs_error <= 1e-3 for r in final)

    def test_csv_columns(self, gauss_psi, halfline):
        report = convergence_study(build_refinement(gauss_psi, halfline, 2))
        lines = report.to_csv().splitlines()
        assert lines[0] == "n,alpha,count_prob,born_prob,abs_error,deficit"
        assert len(lines) == 1 + 3 * 2

    def test_error_halves_until_floor(self, gauss_psi, halfline):
        report = convergence_study(build_refinement(gauss_psi, halfline, 12))
        errs = [max(r.abs_error for r in report.level(n)) for n in range(13)]
        # the worst error at level n stays within 2 * 2**-n (one straddle per side)
        assert all(e <= 2 * 2.0**-n + report.eps_grid for n, e in enumerate(errs))

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10**6), labels=st.integers(1, 5))
    def test_deficit_bound_macro(self, seed, labels):
        g = uniform_grid(0, 1, 4096)
        psi = random_ket(seed, g, smoothness=6)
        part = random_partition(seed, g, labels, mode="cells")
        seq = build_refinement(psi, part, 0)
        seq = build_refinement(psi, part, max_safe_depth(seq.eps_grid))
        report = convergence_study(seq)
        n_labels = sum(1 for a in part.label_set if seq.label_blocks(a) > 0)
        for row in report.rows:
            assert 0 <= row.deficit <= (n_labels - 1) * 2.0**-row.n + 1e-15
            assert row.within_bound

    def test_coordinate_ordering_converges(self):
        g = uniform_grid(-8, 8, 2**16)
        x = g.coordinates
        psi = Ket(g, (2 * math.pi) ** -0.25 * np.exp(-x**2 / 4)).normalized()
        # label alternates over four bands, so C_alpha is not contiguous
        part = MacrostatePartition.from_mask(g, (np.abs(x) < 0.5) | (np.abs(x) > 1.5), "in", "out")
        seq = build_refinement(psi, part, 12, ordering="coordinate")
        report = convergence_study(seq)
        assert report.blocks["in"] == 3 and report.blocks["out"] == 2
        assert report.all_within_bound
        for r in report.level(12):
            assert r.abs_error <= 2 * report.blocks[r.alpha] * 2.0**-12 + 3 * seq.eps_grid

    def test_multi_block_needs_two_members_per_block(self):
        # with two blocks, (B + 1) 2**-n is too tight; 2 B 2**-n holds
        g = uniform_grid(-8, 8, 2**16)
        x = g.coordinates
        psi = Ket(g, (2 * math.pi) ** -0.25 * np.exp(-x**2 / 4)).normalized()
        part = MacrostatePartition.from_mask(g, (np.abs(x) < 0.5) | (np.abs(x) > 1.5), "in", "out")
        seq = build_refinement(psi, part, 4, ordering="coordinate")
        row = convergence_study(seq).row(4, "out")
        slack = 2**4 * seq.eps_grid
        assert row.abs_error > 3 * 2.0**-4 + slack
        assert row.abs_error <= row.bound == 4 * 2.0**-4 + slack
