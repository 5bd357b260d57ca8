import numpy as np
import pytest

from setloss import grads, kernels, losses, objectives
from setloss.batch import EmbeddingBatch


@pytest.mark.parametrize("name", objectives.OBJECTIVES)
def test_analytic_matches_fd_every_objective(name):
    b = grads.check_batch(12, 8, 0)
    rep = grads.grad_check(b, losses.LossConfig(name))
    assert rep.passed, (
        f"{name}: max_rel={rep.max_rel_error:.3e} at {rep.worst_coordinate}"
    )
    assert rep.max_rel_error <= 1e-4


@pytest.mark.parametrize("kernel,bw", [("cosine", 1.0), ("rbf", 0.7)])
def test_analytic_matches_fd_across_kernels(kernel, bw):
    b = grads.check_batch(10, 6, 4)
    for name in ("fl", "gc-cf", "logdet-sf", "supcon"):
        rep = grads.grad_check(b, losses.LossConfig(name, kernel=kernel, bandwidth=bw))
        assert rep.passed, f"{name}/{kernel}: {rep.max_rel_error:.3e}"


def test_check_batch_stays_in_log_domain():
    # Row sums minus one must stay positive or n-pairs and supcon cannot run.
    for seed in range(10):
        b = grads.check_batch(12, 8, seed)
        s, _ = losses.matrices(b, losses.LossConfig("supcon"))
        assert np.all(np.sum(s, axis=1) - 1.0 > 0.5)


def test_fault_injection_is_caught(monkeypatch):
    b = grads.check_batch(8, 5, 1)
    real = grads.loss_gradient

    def biased(batch, config):
        g = real(batch, config)
        g.entries[0, 0] += 0.1
        return g

    monkeypatch.setattr(grads, "loss_gradient", biased)
    rep = grads.grad_check(b, losses.LossConfig("gc-cf"))
    assert not rep.passed
    assert rep.worst_coordinate == (0, 0)
    assert rep.max_abs_error == pytest.approx(0.1, rel=1e-2)


def test_fd_error_shrinks_quadratically():
    b = grads.check_batch(10, 6, 0)
    cfg = losses.LossConfig("gc-cf", kernel="rbf", bandwidth=1.0)
    a = grads.loss_gradient(b, cfg).entries
    errs = []
    for h in (4e-3, 2e-3, 1e-3):
        fd = grads.finite_difference_gradient(b, cfg, h).entries
        errs.append(np.max(np.abs(fd - a)))
    # Central differences: halving h cuts the truncation error by about 4.
    assert 3.8 < errs[0] / errs[1] < 4.2
    assert 3.8 < errs[1] / errs[2] < 4.2


def test_triplet_inactive_hinges_give_zero_gradient():
    # Clusters tight and far apart, every hinge slack: flat region.
    base = np.zeros((6, 3))
    base[:3] += 0.01 * np.arange(3)[:, None]
    base[3:] += 10.0
    base[3:] += 0.01 * np.arange(3)[:, None]
    b = EmbeddingBatch(base + 1.0, np.array([0, 0, 0, 1, 1, 1]))
    cfg = losses.LossConfig("triplet", margin=0.2, kernel="rbf")
    assert losses.total_loss(b, cfg).total == 0.0
    g = grads.loss_gradient(b, cfg).entries
    assert np.all(g == 0.0)
    rep = grads.grad_check(b, cfg)
    assert rep.passed
    assert rep.excluded == 0


def test_fl_tie_rows_are_excluded():
    # The outside point is equally similar to both class members, so the
    # max inside the facility-location term sits on a nondifferentiable tie.
    v = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = EmbeddingBatch(v, np.array([0, 0, 1]))
    rep = grads.grad_check(b, losses.LossConfig("fl"))
    assert rep.excluded == 3 * b.dim
    assert rep.passed


def test_gradient_is_rotation_equivariant():
    b = grads.check_batch(9, 6, 7)
    q, _ = np.linalg.qr(np.random.default_rng(5).normal(size=(6, 6)))
    if np.linalg.det(q) > 0:
        q[:, 0] = -q[:, 0]  # force a reflection as well
    rb = EmbeddingBatch(b.vectors @ q, b.labels)
    for name, kern in (("fl", "cosine"), ("gc-cf", "rbf"), ("logdet-cf", "cosine")):
        cfg = losses.LossConfig(name, kernel=kern)
        assert losses.total_loss(rb, cfg).total == pytest.approx(
            losses.total_loss(b, cfg).total, rel=1e-12
        )
        g = grads.loss_gradient(b, cfg).entries
        gr = grads.loss_gradient(rb, cfg).entries
        assert np.allclose(gr, g @ q, atol=1e-10)


def test_gc_cf_gradient_from_kernel_gradients():
    # Independent assembly: every cross pair (i, j) carries weight 2 lam,
    # once from i's class term and once from j's.
    b = grads.check_batch(7, 4, 2)
    lam = 1.5
    cfg = losses.LossConfig("gc-cf", lam=lam, kernel="rbf", bandwidth=0.9)
    expected = np.zeros_like(b.vectors)
    for i in range(b.n):
        for j in range(b.n):
            if b.labels[i] == b.labels[j] or j <= i:
                continue
            gi, gj = kernels.kernel_gradient(
                b.vectors, cfg.kernel, i, j, cfg.bandwidth
            )
            expected[i] += 2.0 * lam * gi
            expected[j] += 2.0 * lam * gj
    got = grads.loss_gradient(b, cfg).entries
    assert np.allclose(got, expected, atol=1e-10)


def test_fd_rejects_nonpositive_step():
    b = grads.check_batch(6, 3, 0)
    with pytest.raises(ValueError):
        grads.finite_difference_gradient(b, losses.LossConfig("fl"), h=0.0)
