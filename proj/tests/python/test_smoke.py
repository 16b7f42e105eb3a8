import math

import numpy as np
import pytest

import dlev


def test_overlap_metrics():
    assert dlev.bleu("a b c d", ["a b c d"], n=4, smoothing="none") == 1.0
    assert dlev.bleu("the cat sat on the mat", ["the cat is on the mat"], n=2, smoothing="none") == pytest.approx(
        math.sqrt(5 / 6 * 3 / 5), abs=1e-12
    )
    assert dlev.rouge_l("a b", ["a b"]) == 1.0
    assert 0.0 <= dlev.meteor("the cats sat", "the cat sat") <= 1.0
    with pytest.raises(dlev.UsageError):
        dlev.bleu("a", ["a"], smoothing="laplace")


def test_correlations():
    r, p = dlev.pearson([1, 2, 3], [6, 4, 5])
    assert r == -0.5
    assert dlev.spearman([1, 2, 3], [6, 4, 5])[0] == -0.5
    assert 0.0 <= p <= 1.0
    with pytest.raises(dlev.NumericalError):
        dlev.pearson([1, 2, 3], [2, 2, 2])


def test_normalization_and_system_level():
    norm, pre = dlev.normalize_scores([0.0, 0.2, 0.5, 0.9], [1, 2, 4, 5])
    assert norm[0] == 1.0
    assert np.mean(pre) == pytest.approx(3.0)
    human = [1.0, 1.5, 3.0, 3.5, 4.0, 4.5]
    r, _ = dlev.system_level_correlation(human, [h + 0.5 for h in human], ["tfidf", "tfidf", "de", "de", "hred", "hred"])
    assert r == pytest.approx(1.0)


def test_kl_and_anneal():
    q_mean, q_var = np.array([1.0]), np.array([1.0])
    assert dlev.kl_diag_gaussian(q_mean, q_var, np.zeros(1), np.ones(1)) == 0.5
    assert dlev.kl_diag_gaussian(q_mean, q_var, q_mean, q_var) == 0.0
    assert dlev.anneal_weight(30000, 60000) == 0.5


def test_adem_score():
    e1 = np.eye(3)[0]
    assert dlev.adem_score(np.eye(3), np.eye(3), 0.0, 1.0, e1, e1, e1) == 2.0


def test_cli_round_trip(tmp_path):
    code, out, err = dlev.run_command(
        ["synth", "--out", str(tmp_path / "s"), "--variant", "length-biased", "--contexts", "5"]
    )
    assert code == 0, err
    assert (tmp_path / "s" / "dataset.jsonl").is_file()
    assert "config hash: fnv1a64:" in out
    assert dlev.run_command(["nonsense"])[0] == 1
