"""Scoring semantics: sum/mean collapse, end-token handling, degenerate
captions, max-softmax, thresholding, and POS profiles with hand-computed
expected values."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from capood.errors import DegenerateCaptionError, ValidationError
from capood.records import (
    ClassProbRecord,
    PosLexicon,
    SampleScore,
    ScoredCaption,
    TokenRecord,
    Vocabulary,
)
from capood.score import (
    PosProfile,
    ScoreConfig,
    apply_threshold,
    caption_score,
    msp_score,
    msp_scores,
    pos_profile,
    score_captions,
)

VOCAB = Vocabulary(("<s>", "</s>", "<unk>", "a", "red", "circle"), 0, 1, 2)


def make_caption(lps, terminated=True, sample_id="s", pos=None):
    # Body tokens cycle through ids 3..5; terminated captions get the end
    # token as the final record carrying the last logprob.
    recs = []
    body_lps = lps[:-1] if terminated else lps
    for i, lp in enumerate(body_lps):
        recs.append(TokenRecord(3 + (i % 3), lp, pos[i] if pos else None))
    if terminated:
        recs.append(TokenRecord(1, lps[-1]))
    return ScoredCaption(sample_id, "set", tuple(recs), terminated)


class TestCaptionScore:
    def test_sum_includes_end_token_by_default(self):
        cap = make_caption([-1.0, -2.0, -0.5])
        assert caption_score(cap) == pytest.approx(-3.5, abs=1e-15)

    def test_exclude_end_token(self):
        cap = make_caption([-1.0, -2.0, -0.5])
        cfg = ScoreConfig(include_eos=False)
        assert caption_score(cap, cfg) == pytest.approx(-3.0, abs=1e-15)

    def test_mean_divides_by_included_count(self):
        cap = make_caption([-1.0, -2.0, -0.5])
        assert caption_score(cap, ScoreConfig("mean")) == pytest.approx(-3.5 / 3, abs=1e-15)
        assert caption_score(cap, ScoreConfig("mean", include_eos=False)) == pytest.approx(
            -1.5, abs=1e-15
        )

    def test_unterminated_caption_ignores_include_eos(self):
        cap = make_caption([-1.0, -2.0], terminated=False)
        assert caption_score(cap, ScoreConfig(include_eos=False)) == caption_score(cap)

    def test_bare_end_token_scores_with_eos(self):
        cap = ScoredCaption("s", "set", (TokenRecord(1, -0.25),), True)
        assert caption_score(cap) == -0.25

    def test_degenerate_caption_raises(self):
        bare_eos = ScoredCaption("s", "set", (TokenRecord(1, -0.25),), True)
        with pytest.raises(DegenerateCaptionError):
            caption_score(bare_eos, ScoreConfig(include_eos=False))
        empty = ScoredCaption("s", "set", (), False)
        with pytest.raises(DegenerateCaptionError):
            caption_score(empty)

    def test_bad_normalization_rejected(self):
        with pytest.raises(ValidationError):
            ScoreConfig("median")

    def test_score_captions_labels(self):
        caps = [make_caption([-1.0, -0.5], sample_id=f"s{i}") for i in range(3)]
        scores = score_captions(caps, "OUT")
        assert [s.label for s in scores] == ["OUT"] * 3
        assert scores[0].score == pytest.approx(-1.5)


@settings(max_examples=60, deadline=None)
@given(
    lps=st.lists(st.floats(min_value=-30, max_value=0, allow_nan=False), min_size=2, max_size=9),
    terminated=st.booleans(),
)
def test_sum_equals_mean_times_count(lps, terminated):
    cap = make_caption(lps, terminated=terminated)
    n = len(cap.tokens)
    s = caption_score(cap, ScoreConfig("sum"))
    m = caption_score(cap, ScoreConfig("mean"))
    assert s == pytest.approx(m * n, rel=1e-12, abs=1e-12)
    assert s <= 0.0


class TestMsp:
    def test_max_posterior(self):
        assert msp_score(ClassProbRecord("a", (0.2, 0.5, 0.3))) == 0.5

    def test_msp_scores_wraps(self):
        out = msp_scores([ClassProbRecord("a", (0.9, 0.1))], "cls_test", "IN")
        assert out == [SampleScore("a", "cls_test", 0.9, "IN")]


class TestApplyThreshold:
    SCORES = [
        SampleScore("i1", "in", -1.0, "IN"),
        SampleScore("i2", "in", -3.0, "IN"),
        SampleScore("o1", "out", -2.0, "OUT"),
    ]

    def test_decision_rule_is_geq(self):
        report = apply_threshold(self.SCORES, -2.0)
        assert dict(report.decisions) == {"i1": "IN", "i2": "OUT", "o1": "IN"}
        assert (report.tp, report.fn, report.fp, report.tn) == (1, 1, 1, 0)
        assert report.tpr == 0.5
        assert report.fpr == 1.0
        assert report.fnr == 0.5
        assert report.tnr == 0.0

    def test_all_in_when_threshold_below_everything(self):
        report = apply_threshold(self.SCORES, -10.0)
        assert report.tp == 2 and report.fp == 1 and report.tn == 0

    def test_missing_group_rates_are_nan(self):
        report = apply_threshold([SampleScore("a", "s", 1.0, "IN")], 0.0)
        assert math.isnan(report.fpr) and math.isnan(report.tnr)
        assert report.tpr == 1.0

    def test_nonfinite_threshold_rejected(self):
        with pytest.raises(ValidationError):
            apply_threshold(self.SCORES, float("inf"))

    def test_json_fields(self):
        obj = apply_threshold(self.SCORES, -2.0).to_json()
        assert obj["tp"] == 1 and obj["threshold"] == -2.0


class TestPosProfile:
    LEX = PosLexicon({"a": "DET", "red": "ADJ", "circle": "NOUN"})

    def test_pooled_means(self):
        # ids 3,4,5 = a,red,circle; probs e^lp: 0.5, 0.25, 0.125
        caps = [
            ScoredCaption(
                "s1",
                "set",
                (
                    TokenRecord(3, math.log(0.5)),
                    TokenRecord(4, math.log(0.25)),
                    TokenRecord(5, math.log(0.125)),
                    TokenRecord(1, math.log(0.9)),
                ),
                True,
            ),
            ScoredCaption("s2", "set", (TokenRecord(4, math.log(0.75)),), False),
        ]
        profile = pos_profile(caps, VOCAB, self.LEX)
        assert profile.means["DET"] == pytest.approx(0.5)
        assert profile.means["ADJ"] == pytest.approx((0.25 + 0.75) / 2)
        assert profile.means["NOUN"] == pytest.approx(0.125)
        assert profile.counts["ADJ"] == 2
        # End token excluded entirely.
        assert profile.counts["OTHER"] == 0
        assert math.isnan(profile.means["VERB"])

    def test_inline_pos_wins_over_lexicon(self):
        caps = [
            ScoredCaption("s", "set", (TokenRecord(4, math.log(0.5), pos="VERB"),), False)
        ]
        profile = pos_profile(caps, VOCAB, self.LEX)
        assert profile.counts["VERB"] == 1
        assert profile.counts["ADJ"] == 0

    def test_no_lexicon_untagged_is_other(self):
        caps = [ScoredCaption("s", "set", (TokenRecord(4, math.log(0.5)),), False)]
        profile = pos_profile(caps, VOCAB, None)
        assert profile.counts["OTHER"] == 1

    def test_per_caption_averaging(self):
        # Caption 1 has two ADJ tokens (0.2, 0.4 -> mean 0.3); caption 2 has
        # one (0.9). Pooled mean 0.5, per-caption mean 0.6.
        caps = [
            ScoredCaption(
                "s1",
                "set",
                (TokenRecord(4, math.log(0.2)), TokenRecord(4, math.log(0.4))),
                False,
            ),
            ScoredCaption("s2", "set", (TokenRecord(4, math.log(0.9)),), False),
        ]
        pooled = pos_profile(caps, VOCAB, self.LEX)
        per_cap = pos_profile(caps, VOCAB, self.LEX, per_caption=True)
        assert pooled.means["ADJ"] == pytest.approx(0.5)
        assert per_cap.means["ADJ"] == pytest.approx(0.6)

    def test_profile_is_dataclass_with_all_tags(self):
        profile = pos_profile([], VOCAB, self.LEX)
        assert isinstance(profile, PosProfile)
        assert set(profile.counts) == {"NOUN", "VERB", "ADJ", "DET", "ADV", "ADP", "OTHER"}
