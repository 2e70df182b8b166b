import io

import numpy as np
import pytest

from rssinav.model import (
    BatchNormLayer,
    ChecksumFailure,
    CorruptFile,
    DenseLayer,
    DivergenceDetected,
    EmptyBatch,
    MlpRegressor,
    ModelBundle,
    NoKnownAccessPoints,
    ShapeMismatch,
    TrainConfig,
    TrainReport,
    UninitializedStatistics,
    VersionMismatch,
    backward,
    forward,
    initialize_parameters,
    load_model,
    mae_loss,
    predict_position,
    save_model,
    train,
    validation_counts,
    write_report_csv,
)
from rssinav.features import FeatureSelection, NormalizationParams
from rssinav.scan_ingest import ScanEntry, ScanSnapshot

# ---------------------------------------------------------------------------
# oracle: central finite differences over the batch MAE loss


def numeric_gradients(model, X, T, step=1e-4):
    from rssinav.model import _loss_and_grads

    def loss_at():
        loss, _, _ = _loss_and_grads(model, X, T)
        return loss

    numeric = []
    for layer in model.layers:
        names = ("weights", "biases") if isinstance(layer, DenseLayer) else ("gamma", "beta")
        grads = {}
        for name in names:
            param = getattr(layer, name)
            grad = np.zeros_like(param)
            flat = param.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + step
                up = loss_at()
                flat[i] = original - step
                down = loss_at()
                flat[i] = original
                grad.reshape(-1)[i] = (up - down) / (2 * step)
            grads[name] = grad
        numeric.append(grads)
    return numeric


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a_layer, n_layer in zip(analytic, numeric):
        for name, a in a_layer.items():
            n = n_layer[name]
            denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def random_model_and_batch(rng, with_batchnorm=None, margin=0.02):
    """A random small architecture plus a batch kept away from ReLU/MAE kinks.

    Rejection keeps every pre-activation and residual at least ``margin``
    from zero so the finite-difference window (which moves activations by
    O(step * fan-in), about 1e-3 here) never straddles a non-differentiable
    point.
    """
    from rssinav.model import _forward_cached

    while True:
        widths = [int(rng.integers(1, 9)) for _ in range(int(rng.integers(1, 4)))]
        use_bn = bool(rng.integers(0, 2)) if with_batchnorm is None else with_batchnorm
        use_bn = use_bn and len(widths) >= 2  # batch norm sits after the first dense layer
        layers = []
        in_w = int(rng.integers(1, 9))
        first_in = in_w
        for i, w in enumerate(widths):
            last = i == len(widths) - 1
            layers.append(DenseLayer(rng.uniform(-1, 1, (w, in_w)), rng.uniform(-0.5, 0.5, w), "identity" if last else "relu"))
            if i == 0 and use_bn:
                layers.append(BatchNormLayer(rng.uniform(0.5, 1.5, w), rng.uniform(-0.5, 0.5, w), np.zeros(w), np.ones(w)))
            in_w = w
        model = MlpRegressor(layers)
        n = int(rng.integers(2, 9))
        X = rng.uniform(-1, 1, (n, first_in))
        T = rng.uniform(-1, 1, (n, widths[-1]))
        pred, caches = _forward_cached(model, X)
        ok = np.abs(pred - T).min() > margin
        for layer, cache in zip(model.layers, caches):
            if isinstance(layer, DenseLayer) and layer.activation == "relu":
                ok = ok and np.abs(cache["z"]).min() > margin
        if ok:
            return model, X, T


def linear_model(weights, biases):
    return MlpRegressor([DenseLayer(np.array(weights, float), np.array(biases, float), "identity")])


class TestForward:
    def test_zero_network_outputs_zero(self):
        model = MlpRegressor(
            [DenseLayer(np.zeros((3, 2)), np.zeros(3), "identity"), DenseLayer(np.zeros((2, 3)), np.zeros(2), "identity")]
        )
        assert forward(model, [1.0, -2.0]).tolist() == [0.0, 0.0]

    def test_identity_layer_passes_input_through(self):
        model = linear_model(np.eye(2), [0.0, 0.0])
        assert forward(model, [0.3, -0.7]).tolist() == [0.3, -0.7]

    def test_neutral_batchnorm_is_identity_up_to_epsilon(self):
        bn = BatchNormLayer(np.ones(2), np.zeros(2), np.zeros(2), np.ones(2))
        model = MlpRegressor([DenseLayer(np.eye(2), np.zeros(2), "identity"), bn, DenseLayer(np.eye(2), np.zeros(2), "identity")])
        out = forward(model, [0.5, -1.5], mode="infer")
        assert out == pytest.approx([0.5, -1.5], abs=1e-4)

    def test_infer_without_statistics_rejected(self):
        model = MlpRegressor(
            [DenseLayer(np.eye(2), np.zeros(2), "identity"), BatchNormLayer.fresh(2), DenseLayer(np.eye(2), np.zeros(2), "identity")]
        )
        with pytest.raises(UninitializedStatistics):
            forward(model, [1.0, 2.0], mode="infer")
        forward(model, np.ones((3, 2)), mode="train")  # train mode needs no history

    def test_infer_output_independent_of_batch_composition(self):
        rng = np.random.default_rng(5)
        model, X, _ = random_model_and_batch(rng, with_batchnorm=True)
        for layer in model.layers:
            if isinstance(layer, BatchNormLayer):
                layer.running_mean = rng.uniform(-1, 1, layer.width)
                layer.running_var = rng.uniform(0.5, 2.0, layer.width)
        # the same row gives bit-identical output no matter who shares the batch
        companions_a = np.vstack([X[0], rng.uniform(-1, 1, (4, X.shape[1]))])
        companions_b = np.vstack([X[0], rng.uniform(5, 9, (4, X.shape[1]))])
        assert np.array_equal(forward(model, companions_a, mode="infer")[0], forward(model, companions_b, mode="infer")[0])
        # and evaluating it alone agrees (up to BLAS kernel rounding)
        alone = forward(model, X[0], mode="infer")
        assert np.allclose(alone, forward(model, companions_a, mode="infer")[0], rtol=0, atol=1e-12)

    def test_width_mismatch_rejected(self):
        with pytest.raises(ShapeMismatch):
            forward(linear_model(np.eye(2), [0, 0]), [1.0, 2.0, 3.0])

    def test_default_architecture_shape(self):
        model = MlpRegressor.default(6)
        kinds = [type(l).__name__ for l in model.layers]
        assert kinds == ["DenseLayer", "BatchNormLayer", "DenseLayer", "DenseLayer"]
        assert [l.out_width for l in model.layers if isinstance(l, DenseLayer)] == [32, 64, 2]
        assert model.layers[0].activation == "relu" and model.layers[-1].activation == "identity"
        assert model.layers[1].width == 32
        assert model.input_width == 6 and model.output_width == 2


class TestMaeLoss:
    def test_identical_batches_give_zero(self):
        assert mae_loss([[1.0, 2.0]], [[1.0, 2.0]]) == 0.0

    def test_single_pair(self):
        assert mae_loss([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(3.5)

    def test_batch_mean_over_components(self):
        assert mae_loss([[0, 0], [1, 1]], [[1, 0], [1, 3]]) == pytest.approx(0.75)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mae_loss([[1, 2]], [[1, 2], [3, 4]])

    def test_empty_batch(self):
        with pytest.raises(EmptyBatch):
            mae_loss(np.zeros((0, 2)), np.zeros((0, 2)))

    def test_non_negative_and_zero_on_self(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            p = rng.uniform(-100, 100, (int(rng.integers(1, 6)), 2))
            t = rng.uniform(-100, 100, p.shape)
            assert mae_loss(p, t) >= 0.0
            assert mae_loss(p, p) == 0.0


class TestBackward:
    def test_bias_gradient_single_sample(self):
        # one linear layer, positive error on both outputs: dL/db = (1/2, 1/2)
        model = linear_model(np.eye(2), [0.0, 0.0])
        grads = backward(model, [[1.0, 1.0]], [[0.0, 0.0]])
        assert grads[0]["biases"].tolist() == [0.5, 0.5]

    def test_zero_error_gives_zero_gradients(self):
        model = linear_model(np.eye(2), [0.0, 0.0])
        grads = backward(model, [[1.0, -1.0], [0.5, 0.25]], [[1.0, -1.0], [0.5, 0.25]])
        assert not grads[0]["weights"].any() and not grads[0]["biases"].any()

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(123)
        for _ in range(10):
            model, X, T = random_model_and_batch(rng)
            analytic = backward(model, X, T)
            numeric = numeric_gradients(model, X, T)
            assert max_relative_error(analytic, numeric) < 1e-4


class TestTrain:
    def test_validation_counts(self):
        assert validation_counts(100, 0.2) == (80, 20)
        assert validation_counts(95, 0.2) == (76, 19)
        assert validation_counts(1, 0.2) == (1, 0)
        assert validation_counts(10, 0.0) == (10, 0)

    def test_linear_identity_target_converges(self):
        # oracle: the least-squares fit of an identity target is exact, so a
        # linear model must drive the loss near zero
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 1, (64, 2))
        model = linear_model(np.zeros((2, 2)), [0.0, 0.0])
        report = train(model, X, X.copy(), TrainConfig(epochs=700, validation_split=0.2, seed=1))
        assert report.train_loss[-1] < 0.05

    def test_report_has_one_entry_per_epoch(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, (8, 2))
        model = linear_model(np.zeros((2, 2)), [0.0, 0.0])
        report = train(model, X, X, TrainConfig(epochs=700, seed=0))
        assert len(report.train_loss) == 700 and len(report.val_loss) == 700

    def test_bit_reproducible_given_seed(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(-1, 1, (20, 3))
        T = rng.uniform(-1, 1, (20, 2))

        def run():
            model = MlpRegressor.default(3, hidden=(4, 4))
            report = train(model, X, T, TrainConfig(epochs=20, seed=9))
            return model, report

        m1, r1 = run()
        m2, r2 = run()
        assert r1.train_loss == r2.train_loss and r1.val_loss == r2.val_loss
        for l1, l2 in zip(m1.layers, m2.layers):
            if isinstance(l1, DenseLayer):
                assert np.array_equal(l1.weights, l2.weights) and np.array_equal(l1.biases, l2.biases)
            else:
                assert np.array_equal(l1.running_mean, l2.running_mean)

    def test_updates_running_statistics(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, (16, 2))
        T = rng.uniform(-1, 1, (16, 2))
        model = MlpRegressor.default(2, hidden=(4, 4))
        train(model, X, T, TrainConfig(epochs=2, seed=0))
        bn = [l for l in model.layers if isinstance(l, BatchNormLayer)][0]
        assert bn.initialized and bn.running_var.min() >= 0

    def test_divergence_detected_with_report_so_far(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(1, 2, (8, 2))
        T = rng.uniform(-1, 1, (8, 2))
        model = linear_model(np.zeros((2, 2)), [0.0, 0.0])
        with pytest.raises(DivergenceDetected) as exc_info, np.errstate(all="ignore"):
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                train(model, X, T, TrainConfig(epochs=50, learning_rate=1e308, optimizer="sgd", seed=0))
        assert isinstance(exc_info.value.report, TrainReport)

    def test_sgd_optimizer_also_learns(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 1, (32, 2))
        model = linear_model(np.zeros((2, 2)), [0.0, 0.0])
        report = train(model, X, X.copy(), TrainConfig(epochs=300, learning_rate=0.05, optimizer="sgd", seed=1))
        assert report.train_loss[-1] < report.train_loss[0]

    def test_report_csv_layout(self):
        report = TrainReport(train_loss=[0.5, 0.25], val_loss=[0.6, 0.3])
        buf = io.StringIO()
        write_report_csv(report, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss"
        assert lines[1].startswith("1,0.5") and lines[2].startswith("2,0.25")


def small_bundle(rng=None):
    rng = rng or np.random.default_rng(7)
    macs = ("AA:00:00:00:00:01", "AA:00:00:00:00:02", "AA:00:00:00:00:03")
    model = MlpRegressor.default(3, hidden=(4, 5))
    initialize_parameters(model, rng)
    X = rng.uniform(0, 1, (12, 3))
    T = rng.uniform(0, 1, (12, 2))
    train(model, X, T, TrainConfig(epochs=3, seed=int(rng.integers(0, 1000))))
    selection = FeatureSelection(macs, {m: 0.5 for m in macs}, {m: -0.4 for m in macs}, 0.24)
    params = NormalizationParams(np.array([-90.0, -80.0, -85.0]), np.array([-30.0, -35.0, -40.0]), 0.0, 0.0, 11.0)
    return ModelBundle(model, selection, params)


class TestPersistence:
    def test_round_trip_preserves_forward_exactly(self):
        bundle = small_bundle()
        buf = io.BytesIO()
        save_model(bundle.model, bundle.selection, bundle.params, buf)
        loaded = load_model(io.BytesIO(buf.getvalue()))
        assert loaded.selection == bundle.selection
        assert loaded.params == bundle.params
        rng = np.random.default_rng(11)
        inputs = rng.uniform(0, 1, (100, 3))
        assert np.array_equal(forward(loaded.model, inputs), forward(bundle.model, inputs))

    def test_truncated_file_rejected(self):
        bundle = small_bundle()
        buf = io.BytesIO()
        save_model(bundle.model, bundle.selection, bundle.params, buf)
        data = buf.getvalue()
        with pytest.raises(CorruptFile):
            load_model(io.BytesIO(data[: len(data) // 2]))

    def test_unknown_version_rejected(self):
        bundle = small_bundle()
        buf = io.BytesIO()
        save_model(bundle.model, bundle.selection, bundle.params, buf)
        data = bytearray(buf.getvalue())
        data[10:12] = (99).to_bytes(2, "little")  # version field after the magic
        with pytest.raises(VersionMismatch):
            load_model(io.BytesIO(bytes(data)))

    def test_corrupted_payload_fails_checksum(self):
        import struct

        bundle = small_bundle()
        buf = io.BytesIO()
        save_model(bundle.model, bundle.selection, bundle.params, buf)
        data = bytearray(buf.getvalue())
        (header_len,) = struct.unpack_from("<I", data, 12)
        data[16 + header_len + 3] ^= 0xFF  # flip a byte inside the first weight block
        with pytest.raises(ChecksumFailure):
            load_model(io.BytesIO(bytes(data)))

    def test_bad_magic_rejected(self):
        with pytest.raises(CorruptFile):
            load_model(io.BytesIO(b"definitely not a model file"))


class TestPredict:
    def test_missing_every_kept_ap_refused(self):
        bundle = small_bundle()
        snapshot = ScanSnapshot((ScanEntry("FF:00:00:00:00:01", "Other", -50),))
        with pytest.raises(NoKnownAccessPoints):
            predict_position(bundle, snapshot)

    def test_identical_snapshots_identical_estimates(self):
        bundle = small_bundle()
        snapshot = ScanSnapshot(
            (
                ScanEntry("AA:00:00:00:00:01", "Net", -50),
                ScanEntry("AA:00:00:00:00:02", "Net", -60),
            )
        )
        assert predict_position(bundle, snapshot) == predict_position(bundle, snapshot)

    def test_concurrent_inference_is_safe(self):
        from concurrent.futures import ThreadPoolExecutor

        bundle = small_bundle()
        rng = np.random.default_rng(21)
        batch = rng.uniform(0, 1, (64, 3))
        expected = forward(bundle.model, batch)
        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(lambda _: forward(bundle.model, batch), range(32)))
        assert all(np.array_equal(r, expected) for r in results)

    def test_training_row_predicts_within_training_error(self, trained, ref_dataset):
        bundle, report, split_data = trained
        from rssinav.cli import evaluate_bundle

        _, _, rows = evaluate_bundle(bundle, split_data.train)
        per_row_err = [np.hypot(px - tx, py - ty) for tx, ty, px, py in rows]
        row = split_data.train
        idx = {m: j for j, m in enumerate(row.ap_columns)}
        entries = tuple(
            ScanEntry(mac, "LabNet", int(row.rssi[0, idx[mac]]))
            for mac in row.ap_columns
            if row.rssi[0, idx[mac]] != 0.0
        )
        estimate = predict_position(bundle, ScanSnapshot(entries))
        err = np.hypot(estimate.x - row.x[0], estimate.y - row.y[0])
        assert err <= max(per_row_err) + 1e-9
