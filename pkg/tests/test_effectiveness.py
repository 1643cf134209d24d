import math

import pytest
from hypothesis import given, strategies as st

from qpplab import effectiveness, trec_io
from qpplab.effectiveness import average_precision, evaluate_run, ndcg


class TestAveragePrecision:
    def test_relevant_at_ranks_one_and_three(self):
        # (1/1 + 2/3) / 2
        ap = average_precision(["a", "b", "c"], {"a": 1, "c": 1}, cutoff=1000)
        assert ap == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_perfect_ranking(self):
        rels = {"a": 1, "b": 2, "c": 1}
        assert average_precision(["a", "b", "c", "d"], rels, cutoff=10) == 1.0

    def test_no_relevant_documents(self):
        assert average_precision(["a", "b"], {"a": 0}, cutoff=10) == 0.0

    def test_empty_ranking(self):
        assert average_precision([], {"a": 1}, cutoff=10) == 0.0

    def test_denominator_not_capped_by_cutoff(self):
        # two relevant docs, only one inside the cutoff
        ap = average_precision(["a", "x", "b"], {"a": 1, "b": 1}, cutoff=1)
        assert ap == pytest.approx(0.5)

    def test_swapping_relevant_upward_never_decreases(self):
        rels = {"r1": 1, "r2": 1}
        ranking = ["x", "r1", "y", "r2", "z"]
        base = average_precision(ranking, rels, cutoff=10)
        for i in range(len(ranking) - 1):
            if rels.get(ranking[i], 0) == 0 and rels.get(ranking[i + 1], 0) >= 1:
                swapped = list(ranking)
                swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
                assert average_precision(swapped, rels, cutoff=10) >= base


class TestNdcg:
    def test_ideal_ordering_is_one(self):
        rels = {"a": 3, "b": 2, "c": 1, "d": 0}
        assert ndcg(["a", "b", "c", "d"], rels, cutoff=10) == pytest.approx(1.0)

    def test_single_relevant_at_rank_two(self):
        # DCG = 1/log2(3), IDCG = 1/log2(2)
        value = ndcg(["x", "r"], {"r": 1}, cutoff=2)
        assert value == pytest.approx(1.0 / math.log2(3.0), abs=1e-12)
        assert value == pytest.approx(0.6309297535714574, abs=1e-12)

    def test_no_relevant_documents(self):
        assert ndcg(["a", "b"], {}, cutoff=5) == 0.0

    def test_exponential_gain_switch(self):
        rels = {"a": 1, "b": 3}
        linear = ndcg(["a", "b"], rels, cutoff=2)
        exponential = ndcg(["a", "b"], rels, cutoff=2, exponential_gain=True)
        # the misranked high-grade doc hurts more under exponential gain
        assert exponential < linear

    def test_cutoff_limits_both_sides(self):
        rels = {"a": 1, "b": 1}
        assert ndcg(["a", "b"], rels, cutoff=1) == pytest.approx(1.0)


def _run_from(lines):
    return trec_io.parse_run("\n".join(lines))


class TestEvaluateRun:
    def test_two_query_fixture_mean(self):
        run = _run_from(
            [
                "351 Q0 d1 1 9.0 r",
                "351 Q0 d2 2 8.0 r",
                "351 Q0 d3 3 7.0 r",
                "352 Q0 d4 1 5.0 r",
                "352 Q0 d5 2 4.0 r",
            ]
        )
        qrels = trec_io.parse_qrels(
            "\n".join(["351 0 d1 1", "351 0 d3 1", "352 0 d4 1", "352 0 d9 1"])
        )
        result = evaluate_run(run, qrels, "ap", 1000)
        assert result.scores["351"] == pytest.approx(5.0 / 6.0, abs=1e-12)
        assert result.scores["352"] == pytest.approx(0.5)
        assert result.mean == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_query_missing_from_run_scores_zero(self):
        run = _run_from(["1 Q0 d 1 1.0 r"])
        qrels = trec_io.parse_qrels("1 0 d 1\n2 0 e 1")
        result = evaluate_run(run, qrels, "ap", 10)
        assert result.scores["2"] == 0.0

    def test_run_only_queries_counted_not_scored(self):
        run = _run_from(["1 Q0 d 1 1.0 r", "9 Q0 z 1 1.0 r"])
        qrels = trec_io.parse_qrels("1 0 d 1")
        result = evaluate_run(run, qrels, "ndcg", 20)
        assert "9" not in result.scores
        assert result.run_only_queries == 1

    def test_perfect_run_means_one(self):
        run = _run_from(["1 Q0 a 1 2.0 r", "1 Q0 b 2 1.0 r", "2 Q0 c 1 1.0 r"])
        qrels = trec_io.parse_qrels("1 0 a 1\n2 0 c 2")
        for metric in ("ap", "ndcg"):
            assert evaluate_run(run, qrels, metric, 1000).mean == pytest.approx(1.0)

    def test_rank_only_dependence(self):
        # metric values must survive any positive rescaling of the scores
        lines = ["1 Q0 a 1 40.0 r", "1 Q0 b 2 30.0 r", "1 Q0 c 3 20.0 r"]
        scaled = ["1 Q0 a 1 4.0 r", "1 Q0 b 2 3.0 r", "1 Q0 c 3 2.0 r"]
        qrels = trec_io.parse_qrels("1 0 b 1\n1 0 c 2")
        for metric in ("ap", "ndcg"):
            one = evaluate_run(_run_from(lines), qrels, metric, 10)
            two = evaluate_run(_run_from(scaled), qrels, metric, 10)
            assert one.scores == two.scores

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            evaluate_run(trec_io.RunSet(), trec_io.QrelsSet(), "p@10", 10)

    @given(
        st.lists(
            st.tuples(st.integers(0, 20), st.integers(0, 3)),
            min_size=1,
            max_size=30,
        ),
        st.integers(1, 10),
    )
    def test_scores_always_in_unit_interval(self, judged, cutoff):
        rels = {f"d{doc}": grade for doc, grade in judged}
        ranking = [f"d{doc}" for doc, _ in dict(judged).items()]
        ap = average_precision(ranking, rels, cutoff)
        nd = ndcg(ranking, rels, cutoff)
        assert 0.0 <= ap <= 1.0
        assert 0.0 <= nd <= 1.0

    def test_csv_round_trip(self):
        vec = effectiveness.EffectivenessVector(
            "AP", 1000, {"1": 0.5, "2": 1.0 / 3.0}, mean=(0.5 + 1.0 / 3.0) / 2
        )
        again = effectiveness.EffectivenessVector.from_csv(vec.to_csv())
        assert again.metric_name == "AP"
        assert again.cutoff == 1000
        assert again.scores == vec.scores
        assert again.mean == pytest.approx(vec.mean)
