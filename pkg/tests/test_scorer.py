import json

import numpy as np
import pytest
from scipy.special import erf

import gram
from gram import AttentionMap, DomainError, NoiseMode, ShapeError


class TestNoiseMode:
    def test_deterministic_gives_zeros(self):
        mode = NoiseMode.deterministic()
        assert np.array_equal(mode.noise_matrix((3, 2)), np.zeros((3, 2)))

    def test_sampled_reproducible(self):
        mode = NoiseMode.sampled(seed=7, noise_scale=0.5)
        a = mode.noise_matrix((4, 3))
        b = mode.noise_matrix((4, 3))
        assert np.array_equal(a, b)  # same draw every call by design
        assert not np.array_equal(a, np.zeros((4, 3)))

    def test_as_dict_round_trips_json(self):
        mode = NoiseMode.sampled(seed=3, noise_scale=0.1)
        payload = json.loads(json.dumps(mode.as_dict()))
        assert payload["kind"] == "sampled"
        assert payload["seed"] == 3

    def test_validation(self):
        with pytest.raises(DomainError):
            NoiseMode(kind="other")
        with pytest.raises(DomainError):
            NoiseMode.sampled(seed=0, noise_scale=-1.0)


class TestAttentionMap:
    def test_shape_validation(self, rng):
        with pytest.raises(ShapeError):
            AttentionMap(
                alphas=rng.standard_normal((3, 4)),
                latent=rng.standard_normal(2),  # must match alphas rows
                embedding=rng.standard_normal((5, 4)),
            )
        with pytest.raises(ShapeError):
            AttentionMap(
                alphas=rng.standard_normal((3, 4)),
                latent=rng.standard_normal(3),
                embedding=rng.standard_normal((5, 6)),  # width must match alphas
            )

    def test_rejects_nonfinite(self, rng):
        alphas = rng.standard_normal((3, 4))
        alphas[0, 0] = np.nan
        with pytest.raises(DomainError):
            AttentionMap(
                alphas=alphas,
                latent=rng.standard_normal(3),
                embedding=rng.standard_normal((5, 4)),
            )


class TestAnalysisPipeline:
    """Identity weights + adjacency features make every quantity exact."""

    def test_latent_is_column_sum_of_h(self, tree7):
        model = gram.analysis_model(tree7)
        z, tape = gram.latent_vector(model, tree7, NoiseMode.deterministic())
        enc = gram.encode(model, tree7)
        assert np.array_equal(z, enc.h.value.sum(axis=0))
        # returned tape still usable for one backward sweep
        grads = tape.backward(tape.sum_all(tape.constant(np.zeros(1))))
        assert "H" in grads

    def test_alphas_are_identity(self, tree7):
        model = gram.analysis_model(tree7)
        amap = gram.attention_coefficients(model, tree7, NoiseMode.deterministic())
        assert np.array_equal(amap.alphas, np.eye(7))

    def test_alphas_identity_on_ring(self, ring7):
        model = gram.analysis_model(ring7)
        amap = gram.attention_coefficients(model, ring7, NoiseMode.deterministic())
        assert np.array_equal(amap.alphas, np.eye(7))

    def test_score_equals_h_sum(self, tree7):
        # with alpha = I and H >= 0, relu scoring reduces to summing H
        model = gram.analysis_model(tree7)
        report = gram.gram_score(model, tree7)
        enc = gram.encode(model, tree7)
        assert np.allclose(report.node_scores, enc.h.value.sum(axis=1), rtol=0, atol=1e-12)
        assert report.graph_score == pytest.approx(enc.h.value.sum(), rel=1e-12)


class TestExperimentPipeline:
    def test_alpha_shape_rectangular(self, rng):
        cfg = gram.VgaeConfig(gcn_layers=2, hidden_dim=6, latent_dim=3, seed=0)
        model = gram.build_model(cfg, 4, rng=rng)
        g = gram.default_node_features(gram.gen_binary_tree(5), "constant_one")
        g = g.with_features(np.tile(g.node_features, (1, 4)))
        amap = gram.attention_coefficients(model, g, NoiseMode.deterministic())
        assert amap.alphas.shape == (3, 6)
        assert amap.embedding.shape == (5, 6)
        assert amap.latent.shape == (3,)

    def test_deterministic_rescore_is_identical(self, rng):
        cfg = gram.VgaeConfig(gcn_layers=2, hidden_dim=6, latent_dim=3, seed=0)
        model = gram.build_model(cfg, 4, rng=np.random.default_rng(0))
        g = gram.gen_double_ring(6).with_features(
            np.random.default_rng(1).standard_normal((6, 4))
        )
        r1 = gram.gram_score(model, g)
        r2 = gram.gram_score(model, g)
        assert np.array_equal(r1.node_scores, r2.node_scores)
        assert r1.graph_score == r2.graph_score

    def test_alpha_matches_finite_difference(self):
        # dz_i/dh averaged over nodes, checked against a central difference
        cfg = gram.VgaeConfig(gcn_layers=2, hidden_dim=5, latent_dim=3, seed=0)
        model = gram.build_model(cfg, 4, rng=np.random.default_rng(2))
        g = gram.gen_binary_tree(6).with_features(
            np.random.default_rng(3).standard_normal((6, 4))
        )
        mode = NoiseMode.sampled(seed=5, noise_scale=0.7)
        amap = gram.attention_coefficients(model, g, mode)

        enc = gram.encode(model, g)
        h0 = enc.h.value
        noise = mode.noise_matrix((6, 3))

        def pooled(h_flat):
            h = h_flat.reshape(h0.shape)
            tape = gram.Tape()
            params = gram.put_params(tape, model.params, trainable=False)
            s = tape.constant(gram.normalized_adjacency(g).matrix)
            ht = tape.constant(h)
            mu = gram.forward(tape, model.mean_head_specs(), params, ht, s=s)
            ls = gram.forward(tape, model.logstd_head_specs(), params, ht, s=s)
            z = gram.reparameterize(mu, ls, noise, mode.noise_scale)
            return tape.sum_rows(z).value

        step = 1e-6
        fd = np.zeros((3, 5))
        flat = h0.ravel()
        for k in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[k] += step
            down[k] -= step
            diff = (pooled(up) - pooled(down)) / (2 * step)
            n, d = divmod(k, 5)
            fd[:, d] += diff / 6.0
        assert np.allclose(amap.alphas, fd, rtol=1e-5, atol=1e-7)


class TestScoreGraph:
    def make_map(self, rng):
        return AttentionMap(
            alphas=rng.standard_normal((3, 4)),
            latent=rng.standard_normal(3),
            embedding=rng.standard_normal((6, 4)),
        )

    def test_relu_formula(self, rng):
        amap = self.make_map(rng)
        report = gram.score_graph(amap, activation="relu")
        pre = amap.embedding @ amap.alphas.T
        want = np.maximum(pre, 0.0).sum(axis=1)
        assert np.array_equal(report.node_scores, want)
        assert report.graph_score == float(want.sum())

    def test_gelu_formula(self, rng):
        amap = self.make_map(rng)
        report = gram.score_graph(amap, activation="gelu")
        pre = amap.embedding @ amap.alphas.T
        want = (pre * 0.5 * (1.0 + erf(pre / np.sqrt(2.0)))).sum(axis=1)
        assert np.allclose(report.node_scores, want, rtol=0, atol=1e-15)

    def test_identity_formula(self, rng):
        amap = self.make_map(rng)
        report = gram.score_graph(amap, activation="identity")
        pre = amap.embedding @ amap.alphas.T
        assert np.allclose(report.node_scores, pre.sum(axis=1), rtol=0, atol=1e-15)

    def test_unknown_activation(self, rng):
        with pytest.raises(DomainError):
            gram.score_graph(self.make_map(rng), activation="tanh")

    def test_report_json(self, rng):
        report = gram.score_graph(self.make_map(rng), graph_id=4)
        payload = json.loads(report.to_json())
        assert payload["graph_id"] == 4
        assert len(payload["node_scores"]) == 6
        assert payload["noise_mode"]["kind"] == "deterministic"
        slim = json.loads(report.to_json(include_nodes=False))
        assert "node_scores" not in slim


class TestSampledScores:
    def test_mean_over_fixed_seeds_is_deterministic(self, tree7):
        model = gram.analysis_model(tree7)
        a = gram.sampled_mean_score(model, tree7, samples=5, base_seed=3, noise_scale=0.1)
        b = gram.sampled_mean_score(model, tree7, samples=5, base_seed=3, noise_scale=0.1)
        assert a == b

    def test_converges_toward_deterministic_score(self, tree7):
        model = gram.analysis_model(tree7)
        det = gram.gram_score(model, tree7).graph_score
        mean = gram.sampled_mean_score(model, tree7, samples=64, base_seed=0, noise_scale=0.01)
        assert abs(mean - det) < 0.05

    def test_sample_count_validated(self, tree7):
        model = gram.analysis_model(tree7)
        with pytest.raises(DomainError):
            gram.sampled_mean_score(model, tree7, samples=0)


class TestThreshold:
    def test_quantile_endpoints(self):
        scores = [1.0, 2.0, 3.0, 4.0]
        assert gram.threshold_at_quantile(scores, 0.0) == 1.0
        assert gram.threshold_at_quantile(scores, 1.0) == 4.0

    def test_validation(self):
        with pytest.raises(DomainError):
            gram.threshold_at_quantile([], 0.5)
        with pytest.raises(DomainError):
            gram.threshold_at_quantile([1.0], 1.5)


class TestCsvRows:
    def test_layout_and_blank_labels(self, rng):
        amap = AttentionMap(
            alphas=rng.standard_normal((2, 3)),
            latent=rng.standard_normal(2),
            embedding=rng.standard_normal((4, 3)),
        )
        reports = [gram.score_graph(amap, graph_id=k) for k in range(2)]
        text = gram.score_csv_rows(reports, [1, None])
        lines = text.splitlines()
        assert lines[0] == "graph_id,graph_score,label"
        assert lines[1].startswith("0,") and lines[1].endswith(",1")
        assert lines[2].endswith(",")

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            gram.score_csv_rows([], [1])
