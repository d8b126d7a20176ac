import itertools
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import activation_count_max, max_regions_1d_formula
from relux.bounds import (C, bottleneck_normalize, brute_force_activation_max, depth_efficiency_bound, f_jd,
                          one_hidden_layer_count, optimal_design, optimal_design_formula, r_exact_1d,
                          upper_bound_general, zaslavsky_count)


class TestExact1D:
    @pytest.mark.parametrize("design, R", [((1, 3, 3, 1), 16), ((1, 2, 2, 1), 7), ((1, 5, 1), 6)])
    def test_values(self, design, R):
        assert r_exact_1d(design)[0] == R

    def test_r_tilde(self):
        assert r_exact_1d((1, 3, 2, 5, 1))[1] == 4 * 2 * 6

    @given(st.lists(st.integers(2, 9), min_size=1, max_size=6))
    def test_matches_written_out_formula(self, widths):
        assert r_exact_1d((1, *widths, 1))[0] == max_regions_1d_formula(widths)

    def test_width_one_rejected(self):
        with pytest.raises(ValueError):
            r_exact_1d((1, 3, 1, 1))

    @given(st.lists(st.integers(3, 7), min_size=1, max_size=4), st.integers(0, 3))
    def test_wide_layers_commute(self, wide, twos):
        base = r_exact_1d((1, *wide, *([2] * twos), 1))[0]
        for perm in itertools.permutations(wide):
            assert r_exact_1d((1, *perm, *([2] * twos), 1))[0] == base


class TestCounts:
    @pytest.mark.parametrize("m, d, want", [(3, 2, 7), (1, 5, 2), (4, 1, 5), (0, 3, 1)])
    def test_zaslavsky(self, m, d, want):
        assert zaslavsky_count(m, d) == want

    @pytest.mark.parametrize("n0, n1, want", [(2, 3, 7), (1, 4, 5), (3, 3, 8)])
    def test_one_hidden_layer(self, n0, n1, want):
        assert one_hidden_layer_count(n0, n1) == want

    def test_binomial_conventions(self):
        assert C(0, 0) == 1
        assert C(-1, 0) == 0 and C(3, -1) == 0 and C(2, 3) == 0

    @pytest.mark.parametrize("j, d, n, want", [(1, 2, 4, 4), (2, 1, 5, 2), (4, 1, 5, 0)])
    def test_f_jd(self, j, d, n, want):
        assert f_jd(j, d, n) == want

    def test_f_jd_vanishes_past_threshold(self):
        for n in range(12):
            for d in range(1, 6):
                for j in range(n + 4):
                    if 2 * j > n + min(d, n):
                        assert f_jd(j, d, n) == 0

    def test_hockey_stick(self):
        for n in range(1, 31):
            for d in range(1, n + 1):
                s = sum(f_jd(j, d, n) for j in range(d, (n + d) // 2 + 1))
                assert s == comb(n, d), (n, d)

    @pytest.mark.parametrize("n", range(1, 6))
    def test_activation_sets_brute_force(self, n):
        for m in range(n + 1):
            want = sum(f_jd(j, 1, n) for j in range(m + 1))
            assert brute_force_activation_max(n, m) == want
            assert activation_count_max(n, m) == want


class TestUpperBound:
    def test_one_layer(self):
        assert upper_bound_general((1, 3, 1)).value == 4
        assert upper_bound_general((1, 3, 1), "verbatim").value == 3

    def test_two_by_two(self):
        br = upper_bound_general((1, 2, 2, 1))
        assert br.value == 9
        assert sorted(t[0] for t in br.terms) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    @pytest.mark.parametrize("variant", ["corrected", "verbatim", "previous"])
    def test_single_width_two(self, variant):
        assert upper_bound_general((1, 2, 1), variant).value == 3

    def test_value_is_sum_of_terms(self):
        br = upper_bound_general((2, 4, 3, 5, 1))
        assert br.value == sum(t[3] for t in br.terms)
        for j, d, fac, prod in br.terms:
            p = 1
            for v in fac:
                p *= v
            assert p == prod

    def test_csv(self):
        text = upper_bound_general((1, 3, 3, 1)).to_csv()
        assert text.splitlines()[0] == "j-tuple,d-tuple,factor,product"

    def test_matches_one_hidden_layer(self):
        for n0 in range(1, 4):
            for n1 in range(1, 7):
                assert upper_bound_general((n0, n1, 1)).value == one_hidden_layer_count(n0, n1)

    def test_corrected_at_least_exact(self):
        for widths in itertools.product((2, 3, 4), repeat=2):
            d = (1, *widths, 1)
            assert upper_bound_general(d).value >= r_exact_1d(d)[0]

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            upper_bound_general((1, 2, 1), "other")


class TestDesigns:
    @pytest.mark.parametrize("design, want", [((1, 2, 3, 1), (1, 3, 2, 1)), ((1, 3, 3, 1), (1, 3, 3, 1)),
                                              ((1, 2, 2, 1), (1, 2, 2, 1))])
    def test_bottleneck(self, design, want):
        assert bottleneck_normalize(design) == want

    @given(st.lists(st.integers(2, 6), min_size=1, max_size=5))
    def test_bottleneck_never_hurts(self, widths):
        d = (1, *widths, 1)
        assert r_exact_1d(bottleneck_normalize(d))[0] >= r_exact_1d(d)[0]

    @pytest.mark.parametrize("budget, design, R", [(6, (1, 3, 3, 1), 16), (8, (1, 3, 3, 2, 1), 48),
                                                   (2, (1, 2, 1), 3)])
    def test_optimal(self, budget, design, R):
        assert optimal_design(budget) == (design, R)

    @pytest.mark.parametrize("budget", range(2, 30))
    def test_optimal_closed_form(self, budget):
        design, R = optimal_design(budget)
        assert optimal_design_formula(budget) == R
        assert sum(design[1:-1]) == budget

    def test_optimal_too_small(self):
        with pytest.raises(ValueError):
            optimal_design(1)

    @pytest.mark.parametrize("args, want", [((4, 2, 2), 289), ((1, 3, 1), 8), ((2, 1, 3), 9)])
    def test_depth_efficiency(self, args, want):
        assert depth_efficiency_bound(*args) == want
