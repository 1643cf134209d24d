import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qpplab import predictors, trec_io
from qpplab.predictors import (
    PredictorConfig,
    PredictorSpec,
    aggregate_feature,
    build_feature_matrix,
    nqc,
    qf,
    uqc,
    wig,
)


class TestNqc:
    def test_hand_computed(self):
        # population std of [3,2,1] is sqrt(2/3); divided by |corpus| = 2
        assert nqc([3.0, 2.0, 1.0], 2.0, k=3) == pytest.approx(
            math.sqrt(2.0 / 3.0) / 2.0, abs=1e-12
        )
        assert nqc([3.0, 2.0, 1.0], 2.0, k=3) == pytest.approx(0.408248290463863, abs=1e-12)

    def test_constant_scores(self):
        assert nqc([4.0, 4.0, 4.0], 1.5, k=3) == 0.0

    def test_scale_invariance_with_list_mean_corpus(self):
        scores = [3.0, 2.0, 1.0]
        base = nqc(scores, sum(scores) / 3, k=3)
        for c in (0.1, 7.0, 1e4):
            scaled = [c * s for s in scores]
            assert nqc(scaled, sum(scaled) / 3, k=3) == pytest.approx(base, rel=1e-12)

    def test_zero_corpus_score_rejected(self):
        with pytest.raises(ValueError):
            nqc([1.0, 2.0], 0.0, k=2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            nqc([], 1.0, k=5)


class TestUqc:
    def test_hand_computed(self):
        assert uqc([3.0, 2.0, 1.0], k=3) == pytest.approx(0.816496580927726, abs=1e-12)

    def test_constant(self):
        assert uqc([2.0, 2.0], k=2) == 0.0

    def test_k_larger_than_list_uses_whole_list(self):
        assert uqc([3.0, 2.0, 1.0], k=50) == uqc([3.0, 2.0, 1.0], k=3)

    def test_linear_scaling(self):
        base = uqc([5.0, 1.0, 2.0], k=3)
        assert uqc([15.0, 3.0, 6.0], k=3) == pytest.approx(3 * base, rel=1e-12)


class TestWig:
    def test_hand_computed(self):
        # ((4-1) + (2-1)) / 2 / sqrt(4)
        assert wig([4.0, 2.0], corpus_score=1.0, term_count=4, k=2) == pytest.approx(1.0)

    def test_scores_equal_corpus_give_zero(self):
        assert wig([2.5, 2.5], corpus_score=2.5, term_count=3, k=2) == 0.0

    def test_linearity_in_common_scale(self):
        base = wig([4.0, 2.0], 1.0, term_count=4, k=2)
        assert wig([12.0, 6.0], 3.0, term_count=4, k=2) == pytest.approx(3 * base)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            wig([], 1.0, 2, 5)


class TestQf:
    def test_identical_lists(self):
        assert qf(["a", "b", "c"], ["a", "b", "c"], k=3) == 1.0

    def test_disjoint_lists(self):
        assert qf(["a", "b"], ["c", "d"], k=2) == 0.0

    def test_partial_overlap_counting(self):
        primary = [f"p{i}" for i in range(50)]
        feedback = [f"p{i}" for i in range(10)] + [f"x{i}" for i in range(40)]
        assert qf(primary, feedback, k=50) == pytest.approx(0.2)

    def test_in_unit_interval(self):
        assert 0.0 <= qf(["a"], ["b", "a"], k=5) <= 1.0

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            qf(["a"], ["a"], k=0)

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            qf(["a", "a"], ["b"], k=2)


@pytest.fixture
def small_run():
    return trec_io.parse_run(
        "\n".join(
            [
                "351 Q0 d1 1 9.0 r",
                "351 Q0 d2 2 7.0 r",
                "351 Q0 d3 3 5.0 r",
                "352 Q0 d4 1 4.0 r",
                "352 Q0 d5 2 2.0 r",
            ]
        )
    )


@pytest.fixture
def small_table():
    return trec_io.parse_feature_file(
        "\n".join(
            [
                "0 qid:351 1:0.2 2:1.0 # d1",
                "0 qid:351 1:0.9 2:2.0 # d2",
                "0 qid:351 1:0.4 2:3.0 # d3",
                "0 qid:352 1:0.5 2:0.5 # d4",
            ]
        )
    )


class TestAggregateFeature:
    def test_max(self, small_table, small_run):
        value = aggregate_feature(small_table, small_run, "351", "f1", "max", 10)
        assert value == pytest.approx(0.9)

    def test_single_document_same_for_every_agg(self, small_table, small_run):
        for agg in predictors.AGGREGATIONS:
            value = aggregate_feature(small_table, small_run, "352", "f1", agg, 10)
            expected = 0.0 if agg == "std" else 0.5
            assert value == pytest.approx(expected)

    def test_no_coverage_is_missing(self, small_table, small_run):
        run = trec_io.parse_run("999 Q0 nope 1 1.0 r")
        assert aggregate_feature(small_table, run, "999", "f1", "max", 10) is None

    def test_depth_restricts_documents(self, small_table, small_run):
        value = aggregate_feature(small_table, small_run, "351", "f1", "max", depth=1)
        assert value == pytest.approx(0.2)

    def test_unknown_feature_rejected(self, small_table, small_run):
        with pytest.raises(KeyError):
            aggregate_feature(small_table, small_run, "351", "nope", "max", 10)

    def test_aggregation_ordering(self, small_table, small_run):
        values = {
            agg: aggregate_feature(small_table, small_run, "351", "f2", agg, 10)
            for agg in ("max", "mean", "min")
        }
        assert values["max"] >= values["mean"] >= values["min"]


class TestBuildFeatureMatrix:
    def _specs(self):
        return [
            PredictorSpec(name="nqc", kind="nqc", k=10),
            PredictorSpec(name="uqc", kind="uqc", k=10),
            PredictorSpec(name="wig", kind="wig", k=2),
            PredictorSpec(name="letor_f1", kind="letor", feature="f1"),
        ]

    def test_shape_and_column_order(self, small_run, small_table):
        topics = trec_io.parse_topics("351\toil spill\n352\tsolar power plant")
        matrix = build_feature_matrix(
            PredictorConfig(),
            small_run,
            self._specs(),
            topics=topics,
            tables={"letor": small_table},
        )
        assert matrix.query_ids == ["351", "352"]
        assert matrix.predictor_names == ["nqc", "uqc", "wig", "letor_f1"]
        assert not matrix.missing_mask.any()
        assert matrix.column("letor_f1")[0] == pytest.approx(0.9)

    def test_missing_topic_masks_wig_cell(self, small_run, small_table):
        topics = trec_io.parse_topics("351\toil spill")
        matrix = build_feature_matrix(
            PredictorConfig(),
            small_run,
            self._specs(),
            topics=topics,
            tables={"letor": small_table},
        )
        row = matrix.query_ids.index("352")
        assert matrix.missing_mask[row, matrix.predictor_names.index("wig")]

    def test_qf_uses_feedback_run(self, small_run):
        feedback = trec_io.parse_run(
            "351 Q0 d1 1 3.0 f\n351 Q0 dX 2 2.0 f\n352 Q0 d4 1 1.0 f\n352 Q0 d5 2 0.5 f"
        )
        matrix = build_feature_matrix(
            PredictorConfig(),
            small_run,
            [PredictorSpec(name="qf", kind="qf", k=2)],
            feedback_run=feedback,
        )
        assert matrix.column("qf").tolist() == [0.5, 1.0]

    def test_provided_corpus_scores(self, small_run):
        matrix = build_feature_matrix(
            PredictorConfig(corpus_score_mode="provided"),
            small_run,
            [PredictorSpec(name="nqc", kind="nqc", k=10)],
            corpus_scores={"351": 2.0},
        )
        # 352 has no provided corpus score: masked
        assert not matrix.missing_mask[0, 0]
        assert matrix.missing_mask[1, 0]

    def test_deterministic_rebuild(self, small_run, small_table):
        topics = trec_io.parse_topics("351\toil spill\n352\tsolar power plant")
        kwargs = dict(topics=topics, tables={"letor": small_table})
        one = build_feature_matrix(PredictorConfig(), small_run, self._specs(), **kwargs)
        two = build_feature_matrix(PredictorConfig(), small_run, self._specs(), **kwargs)
        assert trec_io.write_matrix(one) == trec_io.write_matrix(two)

    def test_zero_specs_rejected(self, small_run):
        with pytest.raises(ValueError):
            build_feature_matrix(PredictorConfig(), small_run, [])

    def test_empty_run_rejected(self):
        with pytest.raises(ValueError):
            build_feature_matrix(
                PredictorConfig(), trec_io.RunSet(), [PredictorSpec("u", "uqc")]
            )

    def test_duplicate_names_rejected(self, small_run):
        with pytest.raises(ValueError):
            build_feature_matrix(
                PredictorConfig(),
                small_run,
                [PredictorSpec("u", "uqc"), PredictorSpec("u", "nqc")],
            )

    def test_missing_inputs_rejected(self, small_run):
        with pytest.raises(ValueError):
            build_feature_matrix(
                PredictorConfig(), small_run, [PredictorSpec("qf", "qf")]
            )
        with pytest.raises(ValueError):
            build_feature_matrix(
                PredictorConfig(), small_run, [PredictorSpec("wig", "wig")]
            )
        with pytest.raises(ValueError):
            build_feature_matrix(
                PredictorConfig(),
                small_run,
                [PredictorSpec("f", "letor", feature="f9")],
                tables={"t": trec_io.parse_feature_file("0 qid:1 1:0.5 # d")},
            )

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError) as err:
            PredictorSpec(name="x", kind="bogus")
        assert "bogus" in str(err.value)


@given(st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=20))
def test_uqc_never_negative(scores):
    assert uqc(scores, k=10) >= 0.0
