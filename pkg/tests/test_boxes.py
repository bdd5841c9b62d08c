from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cttriage.boxes import (
    BoundingBox,
    Detection,
    area,
    containment_suppress,
    contains,
    intersection_area,
    top_k_by_score,
    union_area,
)
from oracles import suppress_oracle, union_area_raster


def box(x0, y0, x1, y1) -> BoundingBox:
    return BoundingBox(x0, y0, x1, y1)


@st.composite
def boxes_st(draw, max_coord=40):
    x0 = draw(st.integers(0, max_coord - 1))
    y0 = draw(st.integers(0, max_coord - 1))
    x1 = draw(st.integers(x0 + 1, max_coord))
    y1 = draw(st.integers(y0 + 1, max_coord))
    return BoundingBox(x0, y0, x1, y1)


@st.composite
def detections_st(draw, max_len=12):
    n = draw(st.integers(0, max_len))
    out = []
    for _ in range(n):
        b = draw(boxes_st())
        s = draw(st.floats(0.0, 1.0, allow_nan=False))
        out.append(Detection(b, s))
    return out


class TestBoxBasics:
    def test_area_cases(self):
        assert area(box(0, 0, 10, 10)) == 100
        assert area(box(5, 5, 6, 6)) == 1
        assert area(box(3, 7, 103, 57)) == 5000

    def test_rejects_empty_extent(self):
        with pytest.raises(ValueError):
            box(5, 5, 5, 6)
        with pytest.raises(ValueError):
            box(5, 6, 6, 6)
        with pytest.raises(ValueError):
            box(7, 0, 3, 5)

    def test_rejects_negative_coords(self):
        with pytest.raises(ValueError):
            box(-1, 0, 4, 4)

    def test_detection_score_range(self):
        Detection(box(0, 0, 1, 1), 0.0)
        Detection(box(0, 0, 1, 1), 1.0)
        with pytest.raises(ValueError):
            Detection(box(0, 0, 1, 1), 1.01)
        with pytest.raises(ValueError):
            Detection(box(0, 0, 1, 1), -0.01)


class TestIntersection:
    def test_identical_is_self_area(self):
        b = box(2, 3, 9, 11)
        assert intersection_area(b, b) == area(b)

    def test_disjoint_is_zero(self):
        assert intersection_area(box(0, 0, 5, 5), box(10, 10, 20, 20)) == 0

    def test_partial_overlap(self):
        assert intersection_area(box(0, 0, 10, 10), box(5, 5, 15, 15)) == 25

    def test_touching_edges_do_not_overlap(self):
        assert intersection_area(box(0, 0, 5, 5), box(5, 0, 10, 5)) == 0

    @settings(max_examples=100, deadline=None)
    @given(a=boxes_st(), b=boxes_st())
    def test_symmetric_and_bounded(self, a, b):
        ab = intersection_area(a, b)
        assert ab == intersection_area(b, a)
        assert 0 <= ab <= min(area(a), area(b))

    @settings(max_examples=50, deadline=None)
    @given(a=boxes_st(), b=boxes_st())
    def test_containment_iff_intersection_fills_inner(self, a, b):
        assert contains(a, b) == (intersection_area(a, b) == area(b))


class TestUnionArea:
    def test_empty(self):
        assert union_area([]) == 0

    def test_single(self):
        assert union_area([box(0, 0, 10, 10)]) == 100

    def test_idempotent_union(self):
        b = box(3, 3, 8, 9)
        assert union_area([b, b]) == area(b)

    def test_overlapping_pair(self):
        assert union_area([box(0, 0, 10, 10), box(5, 0, 15, 10)]) == 150

    @settings(max_examples=60, deadline=None)
    @given(bs=st.lists(boxes_st(), max_size=8))
    def test_matches_raster_oracle(self, bs):
        assert union_area(bs) == union_area_raster(bs)

    @settings(max_examples=60, deadline=None)
    @given(bs=st.lists(boxes_st(), max_size=8))
    def test_upper_bound_and_disjoint_equality(self, bs):
        total = sum(area(b) for b in bs)
        u = union_area(bs)
        assert u <= total
        pairwise_disjoint = all(
            intersection_area(bs[i], bs[j]) == 0
            for i in range(len(bs)) for j in range(i + 1, len(bs)))
        assert (u == total) == pairwise_disjoint


class TestContainmentSuppress:
    def test_nested_pair_keeps_outer(self):
        big = Detection(box(0, 0, 100, 100), 0.9)
        small = Detection(box(10, 10, 50, 50), 0.8)
        assert containment_suppress([small, big]) == [big]

    def test_disjoint_pair_untouched(self):
        a = Detection(box(0, 0, 5, 5), 0.4)
        b = Detection(box(10, 10, 20, 20), 0.6)
        assert containment_suppress([a, b]) == [a, b]

    def test_triple_nesting_keeps_outermost(self):
        a = Detection(box(0, 0, 60, 60), 0.1)
        b = Detection(box(5, 5, 50, 50), 0.9)
        c = Detection(box(10, 10, 20, 20), 0.99)
        assert containment_suppress([c, b, a]) == [a]

    def test_partial_overlap_survives(self):
        a = Detection(box(0, 0, 10, 10), 0.5)
        b = Detection(box(5, 5, 15, 15), 0.5)
        assert containment_suppress([a, b]) == [a, b]

    def test_identical_boxes_keep_higher_score(self):
        lo = Detection(box(2, 2, 8, 8), 0.3)
        hi = Detection(box(2, 2, 8, 8), 0.7)
        assert containment_suppress([lo, hi]) == [hi]

    def test_identical_boxes_same_score_keep_earlier(self):
        first = Detection(box(2, 2, 8, 8), 0.5, label="lesion")
        second = Detection(box(2, 2, 8, 8), 0.5, label="lesion")
        out = containment_suppress([first, second])
        assert len(out) == 1
        assert out[0] is first

    def test_empty_input(self):
        assert containment_suppress([]) == []

    def test_survivor_order_preserved(self):
        ds = [Detection(box(0, 0, 5, 5), 0.2),
              Detection(box(20, 0, 30, 5), 0.9),
              Detection(box(6, 6, 12, 12), 0.5)]
        assert containment_suppress(ds) == ds

    @settings(max_examples=120, deadline=None)
    @given(ds=detections_st())
    def test_matches_iterative_removal_oracle(self, ds):
        assert containment_suppress(ds) == suppress_oracle(ds)

    @settings(max_examples=80, deadline=None)
    @given(ds=detections_st())
    def test_subset_idempotent_no_contained_survivor(self, ds):
        out = containment_suppress(ds)
        assert all(d in ds for d in out)
        assert containment_suppress(out) == out
        for i, di in enumerate(out):
            for j, dj in enumerate(out):
                if i != j:
                    assert not (contains(dj.box, di.box)
                                and dj.box != di.box)


class TestTopK:
    def test_k_zero(self):
        assert top_k_by_score([Detection(box(0, 0, 1, 1), 0.5)], 0) == []

    def test_k_exceeds_length(self):
        ds = [Detection(box(0, 0, 1, 1), 0.2),
              Detection(box(1, 1, 2, 2), 0.8)]
        assert top_k_by_score(ds, 10) == [ds[1], ds[0]]

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            top_k_by_score([], -1)

    def test_ties_by_input_order(self):
        ds = [Detection(box(i, 0, i + 1, 1), 0.5) for i in range(4)]
        assert top_k_by_score(ds, 2) == ds[:2]

    def test_thousand_random_matches_sort_oracle(self):
        rng = np.random.default_rng(7)
        ds = [Detection(box(int(x), int(y), int(x) + 3, int(y) + 3),
                        float(s))
              for x, y, s in zip(rng.integers(0, 900, 1000),
                                 rng.integers(0, 900, 1000),
                                 rng.random(1000))]
        expected = [d for _, _, d in
                    sorted(((-d.score, i, d) for i, d in enumerate(ds)),
                           key=lambda t: (t[0], t[1]))][:50]
        assert top_k_by_score(ds, 50) == expected
