import math

import numpy as np
import pytest

from graphscrub import (
    EraseConfig,
    FisherDiag,
    InputError,
    ModelState,
    NumericError,
    RectifyConfig,
    SnapshotMissingError,
    StateError,
    TrainConfig,
    UnlearnRequest,
    backward,
    build_propagation,
    erase,
    erase_single_subset,
    forward,
    generate_sbm,
    mask_baseline,
    predict,
    rectify_gradient,
    rectify_gradient_single_subset,
    rectify_update,
    select_threshold,
    theorem_audit,
    train,
    unlearn,
)


def fdiag(values, label="D", size=10):
    return FisherDiag(values=np.asarray(values, dtype=np.float64), subset_label=label, subset_size=size)


def random_model(rng, n_params=None, d=4, h=5, c=3):
    w0 = rng.uniform(0.5, 1.5, size=(d, h)) * rng.choice([-1.0, 1.0], size=(d, h))
    w1 = rng.uniform(0.5, 1.5, size=(h, c)) * rng.choice([-1.0, 1.0], size=(h, c))
    return ModelState(w0=w0, w1=w1)


class TestSelectThreshold:
    def test_rank_arithmetic(self):
        assert select_threshold(np.array([4.0, 3.0, 2.0, 1.0]), 500) == 3.0

    def test_m_zero_is_infinite_sentinel(self):
        assert select_threshold(np.array([4.0, 1.0]), 0) == math.inf

    def test_all_equal_ties(self):
        ratios = np.full(7, 2.5)
        gamma = select_threshold(ratios, 1)
        assert gamma == 2.5
        assert np.all(ratios >= gamma)  # every parameter tie-selects

    def test_m_1000_returns_minimum(self):
        assert select_threshold(np.array([9.0, 5.0, 7.0]), 1000) == 5.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            select_threshold(np.array([]), 10)


class TestMaskBaseline:
    def test_empty_mask_identity(self, rng):
        model = random_model(rng)
        out = mask_baseline(model, np.array([], dtype=int))
        np.testing.assert_array_equal(out.omega, model.omega)

    def test_full_mask_gives_uniform_predictions(self, rng):
        model = random_model(rng)
        g = generate_sbm(20, 3, 0.3, 0.05, 4, seed=0)
        full = mask_baseline(model, np.arange(model.num_params))
        assert np.all(full.omega == 0.0)
        p = build_propagation(g)
        z = forward(p, g.features, full).z
        np.testing.assert_allclose(z, 1.0 / 3.0)

    def test_snapshots_cleared(self, rng):
        model = random_model(rng)
        model = ModelState(
            w0=model.w0, w1=model.w1, grad_snapshot=np.zeros(model.num_params), train_size=5
        )
        out = mask_baseline(model, np.array([0]))
        assert out.grad_snapshot is None and out.fisher_snapshot is None

    def test_out_of_range_rejected(self, rng):
        model = random_model(rng)
        with pytest.raises(InputError):
            mask_baseline(model, np.array([model.num_params]))


class TestErase:
    def test_empty_forget_set_identity(self, rng):
        model = random_model(rng)
        f_d = fdiag(np.ones(model.num_params))
        out, report = erase(model, f_d, None, None)
        np.testing.assert_array_equal(out.omega, model.omega)
        assert report.branch1_count == 0 and report.branch2_count == 0

    def test_hand_computed_branch1_multiplier(self, rng):
        # ratios [10, 5, 1, 0.5, ...pad], m chosen so gamma = 5; the ratio-10
        # parameter is rescaled by gamma/ratio = 0.5
        d, h, c = 1, 1, 1  # tiny model: 2 params... need 4; use direct vectors
        w0 = np.array([[2.0, 1.0]])
        w1 = np.array([[3.0], [-4.0]])
        model = ModelState(w0=w0, w1=w1)  # 4 params
        f_d = fdiag(np.ones(4))
        f_df = fdiag(np.array([10.0, 5.0, 1.0, 0.5]), "D_f", 3)
        out, report = erase(model, f_d, f_df, None, EraseConfig(m_permille=500))
        assert report.gamma == pytest.approx(5.0)
        assert report.branch1_count == 2
        np.testing.assert_allclose(out.omega[0], 0.5 * model.omega[0], rtol=1e-9)
        np.testing.assert_allclose(out.omega[1], model.omega[1], rtol=1e-9)  # mult 1
        np.testing.assert_array_equal(out.omega[2:], model.omega[2:])

    def test_m_zero_identity(self, rng):
        model = random_model(rng)
        n = model.num_params
        f_d = fdiag(rng.lognormal(size=n))
        f_df = fdiag(rng.lognormal(size=n), "D_f", 3)
        f_dk = fdiag(rng.lognormal(size=n), "D_k", 5)
        out, report = erase(model, f_d, f_df, f_dk, EraseConfig(m_permille=0))
        np.testing.assert_array_equal(out.omega, model.omega)
        assert report.branch1_count == 0 and report.branch2_count == 0

    def test_branch2_skipped_without_neighborhood(self, rng):
        model = random_model(rng)
        n = model.num_params
        f_d = fdiag(rng.lognormal(size=n))
        f_df = fdiag(rng.lognormal(size=n), "D_f", 3)
        out, report = erase(model, f_d, f_df, None, EraseConfig(m_permille=100))
        assert report.branch2_count == 0 and report.eta is None

    def test_property_suite(self, rng):
        # disjoint branches, shrinkage in (0, 1], monotone count in m
        for _ in range(200):
            model = random_model(rng)
            n = model.num_params
            f_d = fdiag(rng.lognormal(sigma=2.0, size=n))
            f_df = fdiag(rng.lognormal(sigma=2.0, size=n), "D_f", 3)
            f_dk = fdiag(rng.lognormal(sigma=2.0, size=n), "D_k", 5)
            m = int(rng.integers(1, 1001))
            out, report = erase(model, f_d, f_df, f_dk, EraseConfig(m_permille=m))
            mult = out.omega / model.omega
            assert np.all(mult > 0.0) and np.all(mult <= 1.0)
            assert report.branch1_count + report.branch2_count <= n
            smaller, s_report = erase(
                model, f_d, f_df, f_dk, EraseConfig(m_permille=max(1, m // 2))
            )
            assert (
                s_report.branch1_count + s_report.branch2_count
                <= report.branch1_count + report.branch2_count
            )

    def test_zero_mass_forget_set_is_noop(self, rng):
        # all ratios zero -> threshold 0 -> branch skipped, not mass zeroing
        model = random_model(rng)
        n = model.num_params
        f_d = fdiag(np.ones(n))
        f_df = fdiag(np.zeros(n), "D_f", 3)
        out, report = erase(model, f_d, f_df, None, EraseConfig(m_permille=100))
        np.testing.assert_array_equal(out.omega, model.omega)
        assert report.branch1_count == 0

    def test_length_mismatch_rejected(self, rng):
        model = random_model(rng)
        f_d = fdiag(np.ones(model.num_params + 1))
        with pytest.raises(InputError):
            erase(model, f_d, fdiag(np.ones(model.num_params), "D_f", 1), None)


class TestEraseSingleSubset:
    def test_empty_affected_identity(self, rng):
        model = random_model(rng)
        out, report = erase_single_subset(model, fdiag(np.ones(model.num_params)), None)
        np.testing.assert_array_equal(out.omega, model.omega)

    def test_m_1000_edits_every_parameter(self, rng):
        model = random_model(rng)
        n = model.num_params
        f_d = fdiag(rng.lognormal(size=n))
        f_di = fdiag(rng.lognormal(size=n), "D_i", 4)
        out, report = erase_single_subset(model, f_d, f_di, EraseConfig(m_permille=1000))
        assert report.branch1_count == n

    def test_shrinkage(self, rng):
        for _ in range(50):
            model = random_model(rng)
            n = model.num_params
            f_d = fdiag(rng.lognormal(sigma=2.0, size=n))
            f_di = fdiag(rng.lognormal(sigma=2.0, size=n), "D_i", 4)
            out, _ = erase_single_subset(
                model, f_d, f_di, EraseConfig(m_permille=int(rng.integers(1, 1001)))
            )
            mult = out.omega / model.omega
            assert np.all(mult > 0.0) and np.all(mult <= 1.0)


class TestRectifyGradient:
    def test_empty_sets_return_snapshot(self, rng):
        snap = rng.standard_normal(20)
        out = rectify_gradient(snap, 10, 0, 0, 10)
        np.testing.assert_array_equal(out, snap)

    def test_cancellation_control_is_exact(self, rng):
        # identical neighborhood gradients cancel exactly; the result equals
        # the direct remaining-set mean assembled from the same pieces
        n = 30
        per_node = rng.standard_normal((10, n))
        snap = per_node.mean(axis=0)
        d_f, d_k = [1, 4], [2, 5, 6]
        g_df = per_node[d_f].mean(axis=0)
        g_dk = per_node[d_k].mean(axis=0)
        out = rectify_gradient(snap, 10, 2, 3, 8, g_df, g_dk, g_dk.copy())
        direct = (10 * snap - 2 * g_df) / 8
        np.testing.assert_allclose(out, direct, atol=1e-12)
        remaining = [i for i in range(10) if i not in d_f]
        np.testing.assert_allclose(out, per_node[remaining].mean(axis=0), atol=1e-12)

    def test_missing_snapshot_raises(self):
        with pytest.raises(SnapshotMissingError):
            rectify_gradient(None, 10, 1, 1, 9)

    def test_empty_remaining_rejected(self, rng):
        with pytest.raises(InputError):
            rectify_gradient(rng.standard_normal(5), 4, 4, 0, 0)

    def test_single_subset_variant(self, rng):
        snap = rng.standard_normal(12)
        out = rectify_gradient_single_subset(snap, 9, 0, 9)
        np.testing.assert_array_equal(out, snap)
        g = rng.standard_normal(12)
        exact = rectify_gradient_single_subset(snap, 9, 4, 9, g, g.copy())
        np.testing.assert_allclose(exact, snap, atol=1e-15)


class TestRectifyUpdate:
    def test_lambda_zero_identity(self, rng):
        model = random_model(rng)
        out = rectify_update(model, rng.standard_normal(model.num_params), RectifyConfig(lam=0.0))
        np.testing.assert_array_equal(out.omega, model.omega)

    def test_zero_gradient_identity(self, rng):
        model = random_model(rng)
        out = rectify_update(model, np.zeros(model.num_params), RectifyConfig(lam=0.4))
        np.testing.assert_array_equal(out.omega, model.omega)

    def test_hand_arithmetic(self):
        model = ModelState(w0=np.array([[1.0]]), w1=np.array([[2.0]]))
        out = rectify_update(model, np.array([0.5, -1.0]), RectifyConfig(lam=0.4))
        np.testing.assert_allclose(out.omega, [0.8, 2.4])

    def test_non_finite_gradient_rejected(self, rng):
        model = random_model(rng)
        bad = np.full(model.num_params, np.nan)
        with pytest.raises(NumericError):
            rectify_update(model, bad, RectifyConfig(lam=0.1))

    def test_lambda_range_validated(self):
        with pytest.raises(InputError):
            RectifyConfig(lam=1.5).validate()


@pytest.fixture(scope="module")
def trained_setup():
    graph = generate_sbm(150, 3, 0.2, 0.02, 8, seed=10)
    model = train(graph, TrainConfig(hidden_dim=12, epochs=40, seed=3))
    rng = np.random.default_rng(0)
    forget = np.sort(rng.choice(graph.train_nodes(), size=6, replace=False))
    return graph, model, forget


class TestUnlearnPipeline:
    def test_empty_request_lambda_zero_identity(self, trained_setup):
        graph, model, _ = trained_setup
        out, report = unlearn(
            model, graph, UnlearnRequest(kind="node"), EraseConfig(), RectifyConfig(lam=0.0)
        )
        np.testing.assert_array_equal(out.omega, model.omega)
        assert report.branch1_count == 0

    def test_deterministic(self, trained_setup):
        graph, model, forget = trained_setup
        req = UnlearnRequest(kind="node", node_ids=forget)
        a, _ = unlearn(model, graph, req)
        b, _ = unlearn(model, graph, req)
        np.testing.assert_array_equal(a.omega, b.omega)

    def test_report_contents(self, trained_setup):
        graph, model, forget = trained_setup
        req = UnlearnRequest(kind="node", node_ids=forget)
        out, report = unlearn(model, graph, req)
        assert report.task == "node"
        assert report.fisher_source == "snapshot"
        assert report.sizes["d_f"] == forget.size
        assert report.sizes["d_r"] == model.train_size - forget.size
        assert out.train_size == report.sizes["d_r"]
        assert out.grad_snapshot is None and out.fisher_snapshot is None
        for key in ("subsets_s", "fisher_s", "erase_s", "removal_s", "rectify_s", "total_s"):
            assert report.timings[key] >= 0.0
        assert report.rectify_gradient_norm >= 0.0

    def test_fisher_recomputed_without_snapshot(self, trained_setup):
        graph, model, forget = trained_setup
        stripped = ModelState(
            w0=model.w0,
            w1=model.w1,
            grad_snapshot=model.grad_snapshot,
            fisher_snapshot=None,
            train_size=model.train_size,
        )
        req = UnlearnRequest(kind="node", node_ids=forget)
        out_a, report = unlearn(stripped, graph, req)
        assert report.fisher_source == "recomputed"
        out_b, _ = unlearn(model, graph, req)
        np.testing.assert_allclose(out_a.omega, out_b.omega, rtol=1e-9, atol=1e-12)

    def test_missing_snapshot_raises(self, trained_setup):
        graph, model, forget = trained_setup
        bare = ModelState(w0=model.w0, w1=model.w1, train_size=model.train_size)
        with pytest.raises(SnapshotMissingError):
            unlearn(bare, graph, UnlearnRequest(kind="node", node_ids=forget))

    def test_train_size_mismatch_raises(self, trained_setup):
        graph, model, forget = trained_setup
        wrong = ModelState(
            w0=model.w0,
            w1=model.w1,
            grad_snapshot=model.grad_snapshot,
            fisher_snapshot=model.fisher_snapshot,
            train_size=model.train_size + 1,
        )
        with pytest.raises(StateError):
            unlearn(wrong, graph, UnlearnRequest(kind="node", node_ids=forget))

    def test_edge_and_feature_tasks_run(self, trained_setup):
        graph, model, forget = trained_setup
        edges = graph.edge_list()[:4]
        out_e, rep_e = unlearn(model, graph, UnlearnRequest(kind="edge", edge_list=edges))
        assert rep_e.task == "edge" and rep_e.sizes["d_i"] > 0
        assert out_e.train_size == model.train_size  # no training node removed
        out_f, rep_f = unlearn(model, graph, UnlearnRequest(kind="feature", node_ids=forget[:2]))
        assert rep_f.task == "feature" and rep_f.sizes["d_i"] > 0


class TestTheoremAudit:
    def _fishers(self, rng, n, sizes=(10, 2, 8)):
        f_d = fdiag(rng.lognormal(size=n), "D", sizes[0])
        f_df = fdiag(rng.lognormal(size=n), "D_f", sizes[1])
        f_dr = fdiag(rng.lognormal(size=n), "D_r", sizes[2])
        return f_d, f_df, f_dr

    def test_q_zero_when_masked_equals_retrained(self, rng):
        model = random_model(rng)
        mask = np.array([0, 3, 7])
        retrained = mask_baseline(model, mask)
        f_d, f_df, f_dr = self._fishers(rng, model.num_params)
        record = theorem_audit(model, retrained, f_d, f_df, f_dr, mask)
        assert record["q"] == 0.0

    def test_empty_mask_q_is_mean_squared_gap(self, rng):
        model = random_model(rng)
        retrained = random_model(rng)
        f_d, f_df, f_dr = self._fishers(rng, model.num_params)
        record = theorem_audit(model, retrained, f_d, f_df, f_dr, np.array([], dtype=int))
        expected = float(np.mean((retrained.omega - model.omega) ** 2))
        assert record["q"] == pytest.approx(expected, rel=1e-12)

    def test_record_fields_finite_and_ratio_collapses(self, rng):
        model = random_model(rng)
        retrained = random_model(rng)
        f_d, f_df, f_dr = self._fishers(rng, model.num_params)
        record = theorem_audit(model, retrained, f_d, f_df, f_dr, np.array([1, 2]))
        for key in ("q", "rhs", "c1", "c2", "c3", "critical_ratio"):
            assert np.isfinite(record[key])
        assert record["critical_ratio"] == pytest.approx(10 / 2)

    def test_requires_retrained_model(self, rng):
        model = random_model(rng)
        f_d, f_df, f_dr = self._fishers(rng, model.num_params)
        with pytest.raises(StateError):
            theorem_audit(model, None, f_d, f_df, f_dr, np.array([0]))
