import math
from types import SimpleNamespace

import numpy as np
import pytest

from layoutdiff.errors import CheckpointFormatError, MissingDenoiserError
from layoutdiff.model import (Adam, LATENT_DIM, ModelParams, TrainConfig,
                              centers_of, encode_graph, forward_noise,
                              load_checkpoint, loss_and_grads, make_schedule,
                              predict_eps_composed, save_checkpoint,
                              sinusoidal_embedding, train)
from layoutdiff.scene import (SCENE, BoundingBox, Canvas, Layout, ObjectSpec,
                              RelationEdge, RelationType, SceneGraph)

from conftest import box, make_graph
from oracles import relative_errors

SCHED = make_schedule()


class TestSchedule:
    def test_defaults(self):
        assert SCHED.T == 1000
        assert SCHED.alpha_bar[0] == 1.0 - SCHED.beta[0]
        assert SCHED.alpha_bar[0] == pytest.approx(0.9999)

    def test_strictly_decreasing(self):
        assert np.all(np.diff(SCHED.alpha_bar) < 0)
        assert np.all((SCHED.alpha_bar > 0) & (SCHED.alpha_bar < 1))

    def test_final_alpha_bar_against_extended_precision(self):
        # Oracle: the same running product in 50-digit arithmetic.
        import mpmath
        mpmath.mp.dps = 50
        acc = mpmath.mpf(1)
        for b in SCHED.beta:
            acc *= (1 - mpmath.mpf(float(b)))
        rel = abs(float(acc) - SCHED.alpha_bar[-1]) / float(acc)
        assert rel <= 1e-6

    @pytest.mark.parametrize("args", [(0, 1e-4, 0.02), (10, 0.02, 1e-4),
                                      (10, 0.0, 0.02), (10, 1e-4, 1.0)])
    def test_invalid_ranges(self, args):
        with pytest.raises(ValueError):
            make_schedule(*args)


class TestForwardNoise:
    def test_zero_noise(self):
        p0 = np.array([0.3, 0.7])
        out = forward_noise(p0, 100, np.zeros(2), SCHED)
        assert np.allclose(out, np.sqrt(SCHED.alpha_bar[100]) * p0)

    def test_substitution(self):
        sched = make_schedule(10, 0.4, 0.75)
        # find nothing special: direct formula check with abar from the object
        t = 3
        a = sched.alpha_bar[t]
        p0 = np.array([0.5, 0.5])
        eps = np.array([1.0, -1.0])
        out = forward_noise(p0, t, eps, sched)
        assert out[0] == pytest.approx(np.sqrt(a) * 0.5 + np.sqrt(1 - a))
        assert out[1] == pytest.approx(np.sqrt(a) * 0.5 - np.sqrt(1 - a))

    def test_high_t_limit(self):
        # abar_999 ~ 4e-5, so P_t is the noise up to ~sqrt(abar)*P0 = 3.4e-3
        eps = np.array([2.0, -1.0])
        out = forward_noise(np.array([0.5, 0.5]), SCHED.T - 1, eps, SCHED)
        assert np.allclose(out, eps, atol=5e-3)

    def test_t_out_of_range(self):
        with pytest.raises(ValueError):
            forward_noise(np.zeros(2), SCHED.T, np.zeros(2), SCHED)

    def test_affine_in_inputs(self):
        rng = np.random.default_rng(0)
        p0, eps = rng.normal(size=(2, 6))
        a1 = forward_noise(2 * p0, 50, eps, SCHED)
        a2 = forward_noise(p0, 50, eps, SCHED)
        a3 = forward_noise(np.zeros(6), 50, eps, SCHED)
        assert np.allclose(a1 - a2, a2 - a3)


def toy_graph(edge_specs=(("left-of", "a", "b"),), sizes=((20, 20, 20), (30, 30, 30))):
    objects = [("a", sizes[0]), ("b", sizes[1])]
    return make_graph(objects, list(edge_specs))


class TestModelParams:
    def test_param_count_matches_analytic_formula(self):
        rels = [RelationType.LEFT_OF, RelationType.IN_SCENE]
        params = ModelParams.init(rels, seed=0)
        D = LATENT_DIM
        encoders = (3 * D + D) + (2 * D + D) + (D * D + D) + (D * 2 + 2)
        binary = 3 * D * D + D + D * D + D + D * 2 * D + 2 * D
        unary = 3 * D * D + D + D * D + D + D * D + D
        assert params.param_count() == encoders + binary + unary

    def test_init_deterministic(self):
        a = ModelParams.init([RelationType.LEFT_OF], seed=5)
        b = ModelParams.init([RelationType.LEFT_OF], seed=5)
        for n in a.names():
            assert np.array_equal(a.arrays[n], b.arrays[n])

    def test_flat_round_trip(self):
        params = ModelParams.init([RelationType.CLOSE_TO], seed=1)
        flat = params.flatten()
        clone = ModelParams.init([RelationType.CLOSE_TO], seed=2)
        clone.load_flat(flat)
        for n in params.names():
            assert np.array_equal(params.arrays[n], clone.arrays[n])


class TestPredict:
    def setup_method(self):
        self.graph = toy_graph([("in-scene", "a", SCENE), ("in-scene", "b", SCENE),
                                ("left-of", "a", "b")])
        self.params = ModelParams.init(
            [RelationType.IN_SCENE, RelationType.LEFT_OF], seed=3)
        self.x = np.array([[0.3, 0.4], [0.6, 0.5]])

    def test_shape_and_determinism(self):
        out1 = predict_eps_composed(self.graph, self.x, 10, self.params, SCHED)
        out2 = predict_eps_composed(self.graph, self.x, 10, self.params, SCHED)
        assert out1.shape == (2, 2)
        assert np.array_equal(out1, out2)

    def test_edge_order_does_not_matter(self):
        g1 = toy_graph([("in-scene", "a", SCENE), ("left-of", "a", "b"),
                        ("in-scene", "b", SCENE)])
        g2 = toy_graph([("left-of", "a", "b"), ("in-scene", "b", SCENE),
                        ("in-scene", "a", SCENE)])
        o1 = predict_eps_composed(g1, self.x, 10, self.params, SCHED)
        o2 = predict_eps_composed(g2, self.x, 10, self.params, SCHED)
        assert np.array_equal(o1, o2)

    def test_rename_equivariance(self):
        def rename(g, mapping):
            objects = [(mapping[o.id], o.size) for o in g.objects]
            edges = [(e.relation.value, mapping[e.subject],
                      mapping.get(e.object, e.object)) for e in g.edges]
            return make_graph(objects, edges)

        # order-preserving rename: bitwise identical outputs
        g2 = rename(self.graph, {"a": "a1", "b": "b1"})
        out1 = predict_eps_composed(self.graph, self.x, 10, self.params, SCHED)
        out2 = predict_eps_composed(g2, self.x, 10, self.params, SCHED)
        assert np.array_equal(out1, out2)

        # order-reversing rename: same values up to float reassociation
        g3 = rename(self.graph, {"a": "zz", "b": "aa"})  # aa < zz flips order
        x3 = self.x[::-1]  # canonical order is now (aa=old b, zz=old a)
        out3 = predict_eps_composed(g3, x3, 10, self.params, SCHED)
        assert np.allclose(out3[::-1], out1, rtol=1e-12, atol=1e-14)

    def test_single_edge_average_of_one(self):
        # an object appearing in exactly one edge decodes that edge's output
        g = toy_graph()  # only left-of(a, b)
        params = ModelParams.init([RelationType.LEFT_OF], seed=4)
        out = predict_eps_composed(g, self.x, 5, params, SCHED)

        # independent recomputation of the single denoiser application
        P = params.arrays
        enc = encode_graph(g)
        sl = np.tanh(enc.sizes_norm @ P["size_enc.w"] + P["size_enc.b"])
        pl = np.tanh(self.x @ P["pos_enc.w"] + P["pos_enc.b"])
        L = sl + pl
        tl = sinusoidal_embedding(5) @ P["time_proj.w"] + P["time_proj.b"]
        u = np.concatenate([L[0], L[1], tl])
        h1 = np.tanh(u @ P["denoiser.left-of.w1"] + P["denoiser.left-of.b1"])
        h2 = np.tanh(h1 @ P["denoiser.left-of.w2"] + P["denoiser.left-of.b2"])
        o = h2 @ P["denoiser.left-of.w3"] + P["denoiser.left-of.b3"]
        expected_a = o[:LATENT_DIM] @ P["decoder.w"] + P["decoder.b"]
        expected_b = o[LATENT_DIM:] @ P["decoder.w"] + P["decoder.b"]
        assert np.allclose(out[0], expected_a, rtol=1e-12)
        assert np.allclose(out[1], expected_b, rtol=1e-12)

    def test_lonely_object_rejected(self):
        g = make_graph([("a", (1, 1, 1)), ("b", (1, 1, 1)), ("c", (1, 1, 1))],
                       [("left-of", "a", "b")])
        with pytest.raises(ValueError, match="no edge"):
            predict_eps_composed(g, np.zeros((3, 2)), 1, self.params, SCHED)

    def test_missing_denoiser(self):
        g = toy_graph([("overlapping", "a", "b")])
        with pytest.raises(MissingDenoiserError, match="overlapping"):
            predict_eps_composed(g, self.x, 1, self.params, SCHED)


def record_for(graph, centers, ppi=4.0):
    boxes = {oid: box(cx, cy, 0.1, 0.1)
             for oid, (cx, cy) in zip(graph.object_ids, centers)}
    layout = Layout(boxes=boxes, canvas=graph.canvas)
    return SimpleNamespace(graph=graph, layout=layout, ppi=ppi)


class TestLoss:
    def test_zero_network_half_loss(self):
        g = make_graph([("a", (10, 10, 10))], [("in-scene", "a", SCENE)])
        params = ModelParams.init([RelationType.IN_SCENE], seed=0)
        for n in params.names():
            params.arrays[n][:] = 0.0
        enc = encode_graph(g, ppi=4.0)
        p0 = np.array([[0.5, 0.5]])
        eps = np.array([[1.0, 0.0]])
        loss, _ = loss_and_grads(params, [enc], p0, np.array([37]), eps, SCHED)
        assert loss == pytest.approx(0.5)

    def test_perfect_predictor_zero_loss(self):
        # force the composed output to equal eps via the decoder bias on a
        # zeroed network
        g = make_graph([("a", (10, 10, 10))], [("in-scene", "a", SCENE)])
        params = ModelParams.init([RelationType.IN_SCENE], seed=0)
        for n in params.names():
            params.arrays[n][:] = 0.0
        eps = np.array([[0.37, -0.11]])
        params.arrays["decoder.b"][:] = eps[0]
        enc = encode_graph(g, ppi=4.0)
        loss, _ = loss_and_grads(params, [enc], np.array([[0.5, 0.5]]),
                                 np.array([5]), eps, SCHED)
        assert loss == pytest.approx(0.0, abs=1e-18)

    def test_gradients_match_finite_differences(self):
        # Oracle: central differences at h=1e-4 over a random subset of
        # coordinates of every parameter array, on a 2-object/1-relation toy.
        rng = np.random.default_rng(9)
        g = toy_graph([("in-scene", "a", SCENE), ("in-scene", "b", SCENE),
                       ("left-of", "a", "b")])
        enc = encode_graph(g, ppi=4.0)
        params = ModelParams.init([RelationType.IN_SCENE, RelationType.LEFT_OF],
                                  seed=11)
        p0 = rng.uniform(0.2, 0.8, size=(2, 2))
        eps = rng.standard_normal((2, 2))
        t = np.array([123])

        def loss_at(flat):
            probe = ModelParams.init(params.relations, seed=0)
            probe.load_flat(flat)
            val, _ = loss_and_grads(probe, [enc], p0, t, eps, SCHED)
            return val

        _, grads = loss_and_grads(params, [enc], p0, t, eps, SCHED)
        flat = params.flatten()
        names = params.names()
        offsets = {}
        pos = 0
        for n in names:
            offsets[n] = pos
            pos += params.arrays[n].size

        h = 1e-4
        checked = 0
        worst = 0.0
        for n in names:
            size = params.arrays[n].size
            take = min(6, size)
            for j in rng.choice(size, size=take, replace=False):
                i = offsets[n] + int(j)
                fp = flat.copy()
                fm = flat.copy()
                fp[i] += h
                fm[i] -= h
                numeric = (loss_at(fp) - loss_at(fm)) / (2 * h)
                analytic = grads[n].ravel()[int(j)]
                rel = relative_errors([analytic], [numeric], floor=1e-7)[0]
                worst = max(worst, rel)
                checked += 1
        assert checked >= 100
        assert worst <= 1e-3

    def _singleton_run(self, lr, steps=100):
        g = toy_graph([("in-scene", "a", SCENE), ("in-scene", "b", SCENE),
                       ("left-of", "a", "b")])
        enc = encode_graph(g, ppi=4.0)
        params = ModelParams.init([RelationType.IN_SCENE, RelationType.LEFT_OF],
                                  seed=2)
        opt = Adam(params, TrainConfig(epochs=1, seed=2, learning_rate=lr))
        rng = np.random.default_rng(8)
        p0 = rng.uniform(0.2, 0.8, size=(2, 2))
        eps = rng.standard_normal((2, 2))
        t = np.array([400])
        losses = []
        for _ in range(steps):
            loss, grads = loss_and_grads(params, [enc], p0, t, eps, SCHED)
            losses.append(loss)
            opt.step(params, grads)
        return losses

    def test_loss_decreases_on_singleton(self):
        # Measured reference-run property: at lr 3e-6 the 100-step window
        # stays in the descent phase and decreases (nearly) monotonically.
        # (At the default lr 1e-3 the singleton converges within ~20 steps
        # and then rings at the floor, so the count is taken at the small
        # step size.)
        losses = self._singleton_run(lr=3e-6)
        decreases = sum(1 for a, b in zip(losses, losses[1:]) if b < a)
        assert decreases >= 90
        assert losses[-1] < 0.5 * losses[0]

    def test_singleton_converges_at_default_lr(self):
        losses = self._singleton_run(lr=TrainConfig().learning_rate)
        assert losses[-1] < 1e-3 * losses[0]


class TestTrain:
    def make_dataset(self, n=8, seed=0):
        rng = np.random.default_rng(seed)
        records = []
        for _ in range(n):
            g = toy_graph([("in-scene", "a", SCENE), ("in-scene", "b", SCENE),
                           ("left-of", "a", "b")])
            ax = rng.uniform(0.1, 0.45)
            bx = rng.uniform(ax + 0.05, 0.9)
            records.append(record_for(g, [(ax, 0.4), (bx, 0.6)]))
        return records

    def test_deterministic_loss_curve(self):
        data = self.make_dataset()
        cfg = TrainConfig(epochs=3, batch_size=4, seed=7)
        _, c1 = train(data, cfg, SCHED)
        _, c2 = train(data, cfg, SCHED)
        assert c1 == c2

    def test_zero_learning_rate_keeps_params(self):
        data = self.make_dataset()
        cfg = TrainConfig(epochs=2, batch_size=4, seed=7, learning_rate=0.0)
        params0 = ModelParams.init([RelationType.IN_SCENE, RelationType.LEFT_OF],
                                   seed=cfg.seed)
        params, _ = train(data, cfg, SCHED)
        for n in params.names():
            assert np.array_equal(params.arrays[n], params0.arrays[n])

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train([], TrainConfig(epochs=1), SCHED)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        params = ModelParams.init([RelationType.LEFT_OF, RelationType.IN_SCENE],
                                  seed=13)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, SCHED, train_seed=13)
        loaded, sched, header = load_checkpoint(path)
        assert sched.T == SCHED.T
        assert np.allclose(sched.alpha_bar, SCHED.alpha_bar)
        assert loaded.relations == params.relations
        assert header["train_seed"] == 13
        for n in params.names():
            assert np.array_equal(loaded.arrays[n],
                                  params.arrays[n].astype("<f4").astype(np.float64))

    def test_truncated_payload_rejected(self, tmp_path):
        params = ModelParams.init([RelationType.LEFT_OF], seed=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, SCHED)
        raw = path.read_bytes()
        path.write_bytes(raw[:-17])
        with pytest.raises(CheckpointFormatError, match="truncated"):
            load_checkpoint(path)

    def test_garbage_header_rejected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"\x00\x01\x02 not json\n12345")
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_shape_mismatch_rejected(self, tmp_path):
        import json
        params = ModelParams.init([RelationType.LEFT_OF], seed=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, SCHED)
        raw = path.read_bytes()
        header_line, _, payload = raw.partition(b"\n")
        header = json.loads(header_line)
        header["arrays"][0]["shape"] = [1, 1]
        path.write_bytes(json.dumps(header).encode() + b"\n" + payload)
        with pytest.raises(CheckpointFormatError, match="shape"):
            load_checkpoint(path)
