import io

import numpy as np
import pytest

from setloss import losses, submodcheck
from setloss.batch import EmbeddingBatch
from setloss.errors import GroundSetTooLarge
from setloss.sampling import Rng

RBF = losses.LossConfig(kernel="rbf", bandwidth=1.0)
COSINE = losses.LossConfig(kernel="cosine")


def test_full_set_fl_is_zero():
    b = submodcheck.draw_batch(Rng(0), 6)
    f = submodcheck.as_set_function("fl", b, RBF)
    assert f(range(6)) == 0.0
    assert f([]) == 0.0


def test_set_function_agrees_with_total_loss_on_class_partition():
    rng = Rng(4)
    v = rng.normals((6, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    labels = np.array([0, 0, 0, 1, 1, 1])
    b = EmbeddingBatch(v, labels)
    for name in ("fl", "gc-cf", "logdet-cf", "submod-supcon"):
        cfg = losses.LossConfig(name, kernel="rbf", bandwidth=1.0)
        res = losses.total_loss(b, cfg)
        f = submodcheck.as_set_function(name, b, RBF)
        assert f([0, 1, 2]) == pytest.approx(res.per_class[0], rel=1e-12, abs=1e-12)
        assert f([3, 4, 5]) == pytest.approx(res.per_class[1], rel=1e-12, abs=1e-12)


def test_identity_kernel_makes_gc_modular():
    # Orthonormal embeddings: S = I, so gc-sf(A) = -lam |A|, a modular
    # function; gains are constant and the DR scan sits exactly on margin 0.
    b = EmbeddingBatch(np.eye(5), np.zeros(5, dtype=np.int64))
    f = submodcheck.as_set_function("gc-sf", b, COSINE)
    assert f([0]) == pytest.approx(-1.0)
    assert f([0, 2]) == pytest.approx(f([0]) + f([2]))
    assert f([0, 1, 3]) == pytest.approx(f([0, 1]) + f([3]))
    res = submodcheck.exhaustive_dr_check("gc-sf", b, COSINE)
    assert res.violation_count == 0
    assert res.min_margin == 0.0
    cf = submodcheck.exhaustive_dr_check("gc-cf", b, COSINE)
    assert cf.violation_count == 0


def test_fl_submodular_on_random_kernels():
    res = submodcheck.consistency_scan("fl", n=6, draws=200, seed=0)
    assert res.verdict == "submodular-consistent"
    assert res.trials == 200
    assert res.min_margin >= -submodcheck.DEFAULT_TOLERANCE


def test_gc_cf_submodular_over_thousand_draws():
    res = submodcheck.consistency_scan("gc-cf", n=6, draws=1000, seed=0)
    assert res.verdict == "submodular-consistent"
    assert res.min_margin >= -1e-9


def test_supcon_counterexample_found_and_reproducible():
    res = submodcheck.counterexample_search("supcon")
    assert res.verdict == "violated"
    assert res.trials <= 1000
    assert res.violations
    assert res.min_margin < -submodcheck.DEFAULT_TOLERANCE
    # Recorded gains must reproduce from the set function itself.
    rng = Rng(0)
    batch = submodcheck.draw_batch(rng.derive(res.trials - 1), 6)
    f = submodcheck.as_set_function("supcon", batch, submodcheck.COUNTEREXAMPLE_CONFIG)
    a, bset, x, gain_a, gain_b = res.violations[0]
    assert set(a) <= set(bset)
    assert x not in bset
    assert f(list(a) + [x]) - f(list(a)) == pytest.approx(gain_a, rel=1e-12)
    assert f(list(bset) + [x]) - f(list(bset)) == pytest.approx(gain_b, rel=1e-12)
    assert gain_a - gain_b < -submodcheck.DEFAULT_TOLERANCE


@pytest.mark.parametrize("name", ["triplet", "snn"])
def test_claimed_nonsubmodular_violations_found(name):
    res = submodcheck.counterexample_search(name)
    assert res.verdict == "violated"
    assert res.trials <= 1000


def test_dr_and_pairwise_lattice_forms_agree():
    picks = [
        ("fl", RBF),
        ("gc-cf", RBF),
        ("logdet-sf", RBF),
        ("supcon", COSINE),
        ("triplet", COSINE),
    ]
    rng = Rng(9)
    for i, (name, cfg) in enumerate(picks):
        b = submodcheck.draw_batch(rng.derive(i), 5)
        dr = submodcheck.exhaustive_dr_check(name, b, cfg)
        lat = submodcheck.exhaustive_lattice_check(name, b, cfg)
        assert (dr.violation_count > 0) == (lat.violation_count > 0), name


def test_include_empty_expands_the_scan():
    b = submodcheck.draw_batch(Rng(2), 5)
    without = submodcheck.exhaustive_dr_check("fl", b, RBF)
    with_empty = submodcheck.exhaustive_dr_check("fl", b, RBF, include_empty=True)
    assert with_empty.compared > without.compared
    assert with_empty.violation_count == 0


def test_scan_results_deterministic():
    a = submodcheck.consistency_scan("gc-sf", draws=50, seed=3)
    b = submodcheck.consistency_scan("gc-sf", draws=50, seed=3)
    assert (a.min_margin, a.compared, a.violation_count) == (
        b.min_margin, b.compared, b.violation_count
    )
    x = submodcheck.counterexample_search("supcon", seed=7)
    y = submodcheck.counterexample_search("supcon", seed=7)
    assert x.violations == y.violations
    assert x.trials == y.trials


def test_enumeration_bound_enforced():
    b = submodcheck.draw_batch(Rng(1), submodcheck.ENUMERATION_BOUND + 1)
    with pytest.raises(GroundSetTooLarge):
        submodcheck.exhaustive_dr_check("fl", b, RBF)


def test_verdict_table_and_csv_round_trip():
    results = submodcheck.verdict_table(["fl", "supcon"], draws=20, max_draws=50)
    by_name = {r.objective: r for r in results}
    assert by_name["fl"].verdict == "submodular-consistent"
    assert by_name["fl"].trials == 20
    assert by_name["supcon"].verdict == "violated"
    buf = io.StringIO()
    submodcheck.write_verdict_csv(results, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "objective,n,trials,violations,min_margin,verdict"
    fields = lines[1].split(",")
    assert fields[0] == "fl"
    assert float(fields[4]) == by_name["fl"].min_margin
