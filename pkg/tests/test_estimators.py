import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pldisagree import BannerRecord, ConditionalRankTransformer, DisagreementEstimator, ScoringModel
from pldisagree.metrics import rank_distribution

RECORDS = [
    BannerRecord("a", ["A", "B"], [1.0, 2.0], 10.0, clicked_rank=1),
    BannerRecord("b", ["A", "B", "C"], [1.0, 1.0, 4.0], 6.0, clicked_rank=3, shuffled=True),
    BannerRecord("c", ["C", "A", "B"], [4.0, 1.0, 1.0], 6.0),
]
MODEL = ScoringModel("m", {"A": 1.0, "B": 2.0, "C": 3.0})


def test_params_and_clone():
    est = DisagreementEstimator(metric="pd", subset="shuffled", resamples=3, random_state=7)
    assert est.get_params() == {"metric": "pd", "subset": "shuffled", "resamples": 3, "random_state": 7}
    copy = clone(est)
    assert copy.get_params() == est.get_params()
    assert not hasattr(copy, "arrays_")


def test_not_fitted():
    with pytest.raises(NotFittedError):
        DisagreementEstimator().estimate(MODEL)


def test_subset_filter_and_score():
    est = DisagreementEstimator(metric="cd_exact").fit(RECORDS)
    assert est.n_banners_ == 3
    assert est.estimate(MODEL).n_banners == 3
    est.set_params(subset="shuffled")
    r = est.estimate(MODEL)
    assert r.n_banners == 1
    # clicked C has the top model score: no disagreement possible
    assert r.value == 0.0
    assert est.score(MODEL) == -0.0
    est.set_params(subset="non-shuffled")
    assert est.estimate(MODEL).n_banners == 2


def test_metric_and_subset_aliases():
    a = DisagreementEstimator(metric="cd-exact", subset="non_shuffled").fit(RECORDS).estimate(MODEL)
    b = DisagreementEstimator(metric="cd_exact", subset="non-shuffled").fit(RECORDS).estimate(MODEL)
    assert a == b
    with pytest.raises(ValueError):
        DisagreementEstimator(metric="ndcg").fit(RECORDS).estimate(MODEL)
    with pytest.raises(ValueError):
        DisagreementEstimator(subset="odd").fit(RECORDS).estimate(MODEL)
    with pytest.raises(ValueError):
        DisagreementEstimator(resamples=0).fit(RECORDS).estimate(MODEL)


def test_undefined_score_raises():
    est = DisagreementEstimator(metric="pd").fit(RECORDS[2:])
    assert not est.estimate(MODEL).defined
    with pytest.raises(ValueError):
        est.score(MODEL)


def test_missing_products_reported():
    with pytest.raises(KeyError, match="C"):
        DisagreementEstimator().fit(RECORDS).estimate(ScoringModel("m", {"A": 1.0, "B": 2.0}))


def test_transformer_clicked_rank():
    out = ConditionalRankTransformer().fit_transform(RECORDS)
    assert out.shape == (3, 3)
    np.testing.assert_allclose(out[0, :2], rank_distribution(RECORDS[0]).probs)
    assert out[0, 2] == 0
    np.testing.assert_allclose(out[1], rank_distribution(RECORDS[1]).probs)
    assert np.all(np.isnan(out[2]))


def test_transformer_fixed_rank():
    out = ConditionalRankTransformer(rank=2).transform(RECORDS)
    np.testing.assert_allclose(out[2], rank_distribution(RECORDS[2], rank=2).probs)
    with pytest.raises(ValueError):
        ConditionalRankTransformer(rank=3).transform(RECORDS)
