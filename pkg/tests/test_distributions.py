import numpy as np
import pytest

from onion_anon import (
    DistributionSpec,
    ParseError,
    ScenarioError,
    build_common_scenario,
    build_worst_case_scenario,
    least_alternative_destination,
    make_distribution,
)


class TestMakeDistribution:
    def test_zipf_three_destinations(self):
        row = make_distribution(DistributionSpec.zipf(1.0, 3))
        assert np.allclose(row, [6 / 11, 3 / 11, 2 / 11], rtol=1e-14)

    def test_zipf_ranks_never_increase(self):
        for s in (0.4, 1.0, 2.5):
            row = make_distribution(DistributionSpec.zipf(s, 50))
            assert np.all(np.diff(row) <= 0)
            assert abs(float(row.sum()) - 1.0) < 1e-12

    def test_point(self):
        row = make_distribution(DistributionSpec.point(2, 3))
        assert row.tolist() == [0.0, 0.0, 1.0]

    def test_uniform(self):
        row = make_distribution(DistributionSpec.uniform(4))
        assert row.tolist() == [0.25] * 4

    def test_explicit(self):
        row = make_distribution(DistributionSpec.explicit([0.7, 0.3]))
        assert np.allclose(row, [0.7, 0.3])

    def test_zipf_requires_positive_exponent(self):
        with pytest.raises(ScenarioError):
            make_distribution(DistributionSpec.zipf(0.0, 3))

    def test_explicit_must_be_stochastic(self):
        with pytest.raises(ScenarioError):
            make_distribution(DistributionSpec.explicit([0.7, 0.2]))


class TestParse:
    def test_forms(self):
        assert DistributionSpec.parse("zipf:1.5", 4) == DistributionSpec.zipf(1.5, 4)
        assert DistributionSpec.parse("uniform", 3) == DistributionSpec.uniform(3)
        assert DistributionSpec.parse("point:2", 3) == DistributionSpec.point(2, 3)
        assert DistributionSpec.parse("explicit:0.7,0.3") == DistributionSpec.explicit([0.7, 0.3])

    def test_explicit_infers_size(self):
        spec = DistributionSpec.parse("explicit:0.2,0.3,0.5")
        assert spec.dest_count == 3

    def test_unknown_kind(self):
        with pytest.raises(ParseError):
            DistributionSpec.parse("gauss:1.0", 3)

    def test_bad_parameter(self):
        with pytest.raises(ParseError):
            DistributionSpec.parse("zipf:abc", 3)

    def test_needs_dest_count(self):
        with pytest.raises(ParseError):
            DistributionSpec.parse("uniform")


class TestLeastAlternative:
    def test_ignores_the_target_index(self):
        assert least_alternative_destination([0.1, 0.6, 0.3]) == 2

    def test_target_may_be_globally_smallest(self):
        assert least_alternative_destination([0.05, 0.8, 0.15]) == 2

    def test_ties_break_to_highest_index(self):
        assert least_alternative_destination([0.5, 0.25, 0.25]) == 2

    def test_single_destination(self):
        assert least_alternative_destination([1.0]) == 0


class TestBuilders:
    def test_worst_case_single_user(self):
        s = build_worst_case_scenario(1, 0.5, 0.3, [0.6, 0.4])
        assert s.n == 1 and np.allclose(s.p[0], [0.6, 0.4])

    def test_worst_case_alpha_one(self):
        s = build_worst_case_scenario(3, 1.0, 0.3, [0.5, 0.25, 0.25])
        assert np.allclose(s.p[1], [1, 0, 0]) and np.allclose(s.p[2], [1, 0, 0])

    def test_worst_case_rounding(self):
        s = build_worst_case_scenario(4, 0.5, 0.3, [0.5, 0.25, 0.25])
        on_target = sum(1 for i in range(1, 4) if s.p[i, 0] == 1.0)
        assert on_target == 2
        assert s.p[3, 2] == 1.0  # ties break to the highest index

    def test_worst_case_alpha_zero(self):
        s = build_worst_case_scenario(4, 0.0, 0.3, [0.2, 0.5, 0.3])
        for i in (1, 2, 3):
            assert s.p[i, 2] == 1.0

    def test_common_rows_identical(self):
        s = build_common_scenario(5, 0.2, DistributionSpec.explicit([0.7, 0.3]))
        assert s.n == 5
        for i in range(5):
            assert np.allclose(s.p[i], [0.7, 0.3])

    def test_common_zipf_rows(self):
        s = build_common_scenario(3, 0.2, DistributionSpec.zipf(1.0, 3))
        assert np.allclose(s.p, np.tile([6 / 11, 3 / 11, 2 / 11], (3, 1)))

    def test_rows_stochastic(self):
        s = build_worst_case_scenario(6, 0.4, 0.5, [0.5, 0.3, 0.2])
        assert np.allclose(s.p.sum(axis=1), 1.0, atol=1e-12)
