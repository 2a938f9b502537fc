import numpy as np
import pytest

from conftest import weighted_graph
from trust_siot.credibility import solve_credibility
from trust_siot.features import (
    FEATURE_NAMES,
    build_features,
    pair_features,
    read_features,
    to_arrays,
    write_features,
)
from trust_siot.ingest import TrustLabel
from trust_siot.kge import empty_table


@pytest.fixture
def setup():
    g = weighted_graph({(1, 2): 0.8, (2, 3): 0.9, (1, 3): 0.3, (3, 1): 0.6})
    return g, solve_credibility(g), empty_table(4)


class TestPairFeatures:
    def test_columns(self, setup):
        g, s, t = setup
        x = pair_features(g, s, t, 1, 3)
        r, b, _ = s.of(3)
        assert x.shape == (len(FEATURE_NAMES),)
        assert x[0] == pytest.approx(0.3)
        assert (x[1], x[2]) == (r, b)
        assert x[4] == 0.0  # no embeddings

    def test_pair_without_edge_gets_prior(self, setup):
        g, s, t = setup
        assert pair_features(g, s, t, 3, 2)[0] == 0.5

    def test_unknown_object(self, setup):
        g, s, t = setup
        with pytest.raises(ValueError):
            pair_features(g, s, t, 1, 42)

    def test_bounded(self, setup):
        g, s, t = setup
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                if i != j:
                    x = pair_features(g, s, t, i, j)
                    assert np.all(x[:4] >= 0) and np.all(x[:4] <= 1)


def test_build_and_round_trip(setup, tmp_path):
    g, s, t = setup
    labels = {(1, 2): TrustLabel.TRUSTWORTHY, (3, 1): TrustLabel.NEUTRAL}
    samples = build_features(g, s, t, labels)
    assert [(x.trustor, x.trustee) for x in samples] == [(1, 2), (3, 1)]
    X, y = to_arrays(samples)
    assert X.shape == (2, 5) and y.tolist() == [2, 1]
    write_features(tmp_path / "f.tsv", samples)
    back = read_features(tmp_path / "f.tsv")
    assert np.array_equal(to_arrays(back)[0], X)
    assert [x.label for x in back] == [TrustLabel.TRUSTWORTHY, TrustLabel.NEUTRAL]


def test_unlabelled_pairs(setup):
    g, s, t = setup
    samples = build_features(g, s, t, [(1, 2)])
    assert samples[0].label is None and to_arrays(samples)[1].tolist() == [-1]


def test_bad_header(tmp_path):
    (tmp_path / "f.tsv").write_text("a\tb\n")
    with pytest.raises(ValueError, match="header"):
        read_features(tmp_path / "f.tsv")
