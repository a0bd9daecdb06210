import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naive_eval import brute_force_katetov, brute_force_violation_count
from urysohn.generate import random_extension, sequential_random_space
from urysohn.rng import substream
from urysohn.spaces import (
    DIAGONAL_NONZERO,
    OUT_OF_RANGE,
    TRIANGLE_VIOLATION,
    ZERO_DISTANCE_DISTINCT,
    DuplicateIndexError,
    InconsistentPartialError,
    Interval,
    InvalidSpaceError,
    NotKatetovError,
    admissible_interval,
    dumps_fms,
    extend_space,
    extract_substructure,
    find_violations,
    is_katetov,
    katetov_violation,
    loads_fms,
    validate_space,
)


class TestValidate:
    def test_minimal_symmetric_case(self):
        space = validate_space([[0.0, 0.3], [0.3, 0.0]])
        assert space.size == 2
        assert space.dist[0, 1] == 0.3

    def test_triangle_violation_reported_with_indices(self):
        m = [[0.0, 0.9, 0.1], [0.9, 0.0, 0.1], [0.1, 0.1, 0.0]]
        violations = find_violations(m)
        assert any(
            v.kind == TRIANGLE_VIOLATION and set(v.indices[:2]) == {0, 1} and v.indices[2] == 2
            for v in violations
        )
        magnitudes = [v.magnitude for v in violations if v.kind == TRIANGLE_VIOLATION]
        assert max(magnitudes) == pytest.approx(0.7)
        with pytest.raises(InvalidSpaceError):
            validate_space(m)

    def test_generated_space_matches_brute_force(self):
        space = sequential_random_space(5, seed=1)
        assert brute_force_violation_count(space.dist.tolist(), pseudometric=False) == 0

    def test_non_square(self):
        violations = find_violations([[0.0, 0.1]])
        assert violations[0].kind == "non-square"

    def test_all_violations_reported_not_just_first(self):
        m = [[0.1, 0.5], [0.2, 0.0]]
        kinds = {v.kind for v in find_violations(m)}
        assert "asymmetric-entry" in kinds
        assert DIAGONAL_NONZERO in kinds

    def test_out_of_range_and_nan(self):
        m = [[0.0, 1.5], [1.5, 0.0]]
        assert any(v.kind == OUT_OF_RANGE for v in find_violations(m))
        m = [[0.0, float("nan")], [float("nan"), 0.0]]
        assert any(v.kind == OUT_OF_RANGE for v in find_violations(m))

    def test_zero_distance_modes(self):
        m = [[0.0, 0.0, 0.4], [0.0, 0.0, 0.4], [0.4, 0.4, 0.0]]
        assert any(v.kind == ZERO_DISTANCE_DISTINCT for v in find_violations(m))
        assert find_violations(m, pseudometric=True) == []

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            find_violations(np.zeros((0, 0)))

    def test_tolerance_on_triangle(self):
        # Violation by 5e-13 stays within the 1e-12 comparison slack.
        m = [[0.0, 0.6 + 5e-13, 0.3], [0.6 + 5e-13, 0.0, 0.3], [0.3, 0.3, 0.0]]
        assert find_violations(m) == []


class TestKatetov:
    def test_admissible_pair(self, two_point_04):
        assert is_katetov(two_point_04, [0.3, 0.5])

    def test_violating_pair_reported(self, two_point_04):
        assert not is_katetov(two_point_04, [0.1, 0.9])
        assert katetov_violation(two_point_04, [0.1, 0.9]) == (0, 1)

    def test_duplicating_existing_point(self):
        space = sequential_random_space(6, seed=9)
        for p in range(space.size):
            assert is_katetov(space, space.dist[p])

    def test_out_of_range_entry(self, two_point_04):
        assert katetov_violation(two_point_04, [1.2, 0.5]) == (0, 0)

    def test_length_mismatch(self, two_point_04):
        with pytest.raises(ValueError):
            is_katetov(two_point_04, [0.3])

    def test_matches_brute_force(self):
        space = sequential_random_space(7, seed=12)
        rng = substream(99)
        for _ in range(50):
            r = rng.uniform(0, 1, size=7)
            assert is_katetov(space, r) == brute_force_katetov(space.dist.tolist(), r.tolist())


class TestAdmissibleInterval:
    def test_no_constraints(self, two_point_04):
        assert admissible_interval(two_point_04, {}, 1) == Interval(0.0, 1.0)

    def test_single_constraint_against_grid_scan(self, two_point_04):
        itv = admissible_interval(two_point_04, {0: 0.3}, 1)
        assert itv.lo == pytest.approx(0.1)
        assert itv.hi == pytest.approx(0.7)
        # Oracle: scan candidate values and check the Katetov condition.
        valid = [
            v
            for v in np.linspace(0.0, 1.0, 10_001)
            if brute_force_katetov(two_point_04.dist.tolist(), [0.3, v])
        ]
        assert min(valid) == pytest.approx(itv.lo, abs=1e-4)
        assert max(valid) == pytest.approx(itv.hi, abs=1e-4)

    def test_upper_bound_clamped_to_diameter(self):
        space = validate_space([[0.0, 1.0], [1.0, 0.0]])
        assert admissible_interval(space, {0: 1.0}, 1) == Interval(0.0, 1.0)

    def test_inconsistent_partial(self):
        space = sequential_random_space(4, seed=5)
        d01 = float(space.dist[0, 1])
        with pytest.raises(InconsistentPartialError):
            admissible_interval(space, {0: min(1.0, d01 + 0.9), 1: 0.0}, 2)

    def test_membership_matches_katetov_on_grid(self):
        space = sequential_random_space(6, seed=21)
        rng = substream(77)
        assigned = {}
        for t in (0, 3, 4):
            itv = admissible_interval(space, assigned, t)
            assigned[t] = float(rng.uniform(itv.lo, itv.hi))
        target = 1
        itv = admissible_interval(space, assigned, target)
        for v in np.linspace(0.0, 1.0, 2_001):
            inside = itv.lo - 1e-9 <= v <= itv.hi + 1e-9
            rows = space.dist[np.ix_(sorted(assigned) + [target], sorted(assigned) + [target])]
            vec = [assigned[i] for i in sorted(assigned)] + [v]
            assert brute_force_katetov(rows.tolist(), vec) == inside or abs(v - itv.lo) < 1e-9 or abs(v - itv.hi) < 1e-9

    def test_empty_interval_is_representable(self):
        assert Interval(0.6, 0.4).is_empty
        assert not Interval(0.4, 0.6).is_empty


class TestExtend:
    def test_one_point_base(self):
        space = validate_space([[0.0]])
        out = extend_space(space, [0.5])
        assert out.size == 2
        assert out.dist[0, 1] == 0.5

    def test_three_point_result_valid(self, two_point_04):
        out = extend_space(two_point_04, [0.3, 0.5])
        assert brute_force_violation_count(out.dist.tolist(), pseudometric=False) == 0
        assert np.array_equal(out.dist[:2, :2], two_point_04.dist)

    def test_rejects_non_katetov(self, two_point_04):
        with pytest.raises(NotKatetovError) as err:
            extend_space(two_point_04, [0.1, 0.9])
        assert err.value.pair == (0, 1)

    def test_duplicate_row_needs_pseudometric_mode(self, two_point_04):
        row = two_point_04.dist[0]
        with pytest.raises(InvalidSpaceError):
            extend_space(two_point_04, row)
        out = extend_space(two_point_04.as_pseudometric(), row)
        assert out.size == 3
        assert out.dist[0, 2] == 0.0

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(seed=st.integers(min_value=0, max_value=10_000), size=st.integers(min_value=1, max_value=9))
    def test_katetov_extension_always_validates(self, seed, size):
        space = sequential_random_space(size, seed=seed)
        r = random_extension(space, substream(seed, 1234))
        assert is_katetov(space, r)
        extended = extend_space(space.as_pseudometric(), r)
        assert extended.size == size + 1


class TestExtract:
    def test_identity(self):
        space = sequential_random_space(5, seed=2)
        again = extract_substructure(space, range(5))
        assert np.array_equal(again.dist, space.dist)

    def test_single_point(self):
        space = sequential_random_space(5, seed=2)
        assert extract_substructure(space, [3]).size == 1

    def test_reorder_pair(self):
        space = sequential_random_space(3, seed=2)
        sub = extract_substructure(space, [2, 0])
        assert sub.dist[0, 1] == space.dist[2, 0]
        assert sub.dist[1, 0] == sub.dist[0, 1]

    def test_commutes_with_permutation(self):
        space = sequential_random_space(6, seed=8)
        rng = substream(5)
        for _ in range(20):
            pick = rng.choice(6, size=4, replace=False)
            perm = rng.permutation(4)
            one = extract_substructure(extract_substructure(space, pick), perm)
            other = extract_substructure(space, [pick[i] for i in perm])
            assert np.array_equal(one.dist, other.dist)

    def test_duplicates_only_in_pseudometric_mode(self):
        space = sequential_random_space(4, seed=3)
        with pytest.raises(DuplicateIndexError):
            extract_substructure(space, [1, 1, 2])
        sub = extract_substructure(space.as_pseudometric(), [1, 1, 2])
        assert sub.dist[0, 1] == 0.0

    def test_index_out_of_range(self):
        space = sequential_random_space(4, seed=3)
        with pytest.raises(IndexError):
            extract_substructure(space, [0, 7])


class TestFmsFormat:
    def test_round_trip_bitwise(self):
        space = sequential_random_space(7, seed=31)
        text = dumps_fms(space)
        again = loads_fms(text)
        assert np.array_equal(again.dist, space.dist)

    def test_comments_and_layout(self):
        text = "# a comment\n3\n0.5 0.25  # trailing\n0.5\n"
        space = loads_fms(text)
        assert space.size == 3
        assert space.dist[0, 2] == 0.25

    def test_single_point(self):
        assert loads_fms(dumps_fms(validate_space([[0.0]]))).size == 1

    def test_malformed_counts(self):
        with pytest.raises(ValueError):
            loads_fms("3\n0.5 0.25\n")
        with pytest.raises(ValueError):
            loads_fms("2\n0.5 0.7\n")
        with pytest.raises(ValueError):
            loads_fms("")

    def test_invalid_space_raises_with_violations(self):
        with pytest.raises(InvalidSpaceError):
            loads_fms("3\n0.9 0.1\n0.1\n")

    def test_writer_emits_17_significant_digits(self):
        space = validate_space([[0.0, 1 / 3], [1 / 3, 0.0]])
        line = dumps_fms(space).splitlines()[1]
        assert line == format(1 / 3, ".17g")


def test_immutability():
    space = sequential_random_space(4, seed=1)
    with pytest.raises(ValueError):
        space.dist[0, 1] = 0.5
