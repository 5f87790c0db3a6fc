import math
import numpy as np
import pytest
from projhead_lab.errors import NumericalError, ShapeError
from projhead_lab.objectives import (
    LossConfig,
    batch_loss_value,
    contrastive_masks,
    cosine_similarity,
    info_nce,
)


def test_cosine_examples():
    assert cosine_similarity([1, 0], [1, 0]) == 1.0
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 0], [-1, 0]) == -1.0
    assert cosine_similarity([2, 0], [5, 5]) == pytest.approx(1 / math.sqrt(2))


def test_cosine_of_zero_vector():
    with pytest.raises(NumericalError):
        cosine_similarity([0, 0], [1, 0])


def test_info_nce_examples():
    literal = LossConfig(temperature=0.5, include_positive=False)
    assert info_nce([1, 0], [1, 0], [[1, 0]], literal) == pytest.approx(0.0, abs=1e-10)

    literal = LossConfig(temperature=1.0, include_positive=False)
    assert info_nce([1, 0], [1, 0], [[0, 1]], literal) == pytest.approx(-1.0, abs=1e-10)

    simclr = LossConfig(temperature=1.0, include_positive=True)
    expected = math.log(1 + math.exp(-1))
    assert info_nce([1, 0], [1, 0], [[0, 1]], simclr) == pytest.approx(expected, abs=1e-10)
    assert expected == pytest.approx(0.31326, abs=1e-5)


def test_info_nce_empty_denominator():
    with pytest.raises(ShapeError):
        info_nce([1, 0], [1, 0], [], LossConfig(include_positive=False))


@pytest.mark.parametrize("temperature", [0.1, 0.5, 2.0])
def test_identical_embeddings_give_log_three(temperature):
    z = np.tile([0.3, 0.4], (2, 1))
    loss, per_anchor = batch_loss_value(z, z, LossConfig(temperature=temperature))
    assert loss == pytest.approx(math.log(3), abs=1e-12)
    np.testing.assert_allclose(per_anchor, math.log(3), atol=1e-12)


def test_batch_of_one_is_rejected():
    with pytest.raises(ShapeError):
        batch_loss_value(np.ones((1, 3)), np.ones((1, 3)), LossConfig())


def _embeddings(seed=0, b=5, d=4):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((b, d)), rng.standard_normal((b, d))


def test_loss_ignores_embedding_norms():
    z1, z2 = _embeddings()
    scales = np.random.default_rng(1).uniform(0.1, 10.0, size=(5, 1))
    a, _ = batch_loss_value(z1, z2, LossConfig())
    b, _ = batch_loss_value(z1 * scales, z2 * scales[::-1], LossConfig())
    assert a == pytest.approx(b, abs=1e-10)


def test_permuting_examples_permutes_anchor_losses():
    z1, z2 = _embeddings()
    perm = np.array([3, 0, 4, 1, 2])
    a, per_a = batch_loss_value(z1, z2, LossConfig())
    b, per_b = batch_loss_value(z1[perm], z2[perm], LossConfig())
    assert a == pytest.approx(b, abs=1e-12)
    np.testing.assert_allclose(per_b, per_a[np.concatenate([perm, perm + 5])], atol=1e-12)


def test_anchor_losses_nonnegative_with_positive_in_denominator():
    z1, z2 = _embeddings(seed=3)
    _, per_anchor = batch_loss_value(z1, z2, LossConfig(temperature=0.1))
    assert np.all(per_anchor >= 0.0)


@pytest.mark.parametrize("negatives", ["batch_both_views", "batch_view2_only"])
@pytest.mark.parametrize("include_positive", [True, False])
def test_batch_loss_matches_scalar_info_nce(negatives, include_positive):
    z1, z2 = _embeddings(seed=2, b=4)
    config = LossConfig(negatives=negatives, include_positive=include_positive)
    loss, per_anchor = batch_loss_value(z1, z2, config)
    expected = []
    for view, anchors, partners in ((0, z1, z2), (1, z2, z1)):
        for i in range(4):
            others = [j for j in range(4) if j != i]
            if negatives == "batch_both_views":
                negs = [z1[j] for j in others] + [z2[j] for j in others]
            else:
                negs = [partners[j] for j in others]
            expected.append(info_nce(anchors[i], partners[i], negs, config))
    np.testing.assert_allclose(per_anchor, expected, atol=1e-12)
    assert loss == pytest.approx(np.mean(expected), abs=1e-12)


def test_masks_never_pair_an_example_with_itself():
    positive, denominator = contrastive_masks(3, LossConfig(include_positive=False))
    assert not np.any(np.diag(denominator))
    assert not np.any(denominator & positive)
    assert positive.sum() == 6
    assert np.all(denominator.sum(axis=1) == 4)
