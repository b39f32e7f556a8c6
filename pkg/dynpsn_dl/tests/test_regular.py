import pytest
import torch
from torch import nn

from dynpsn_dl.regular import VARIANTS, VariantSpec, build_variant
from dynpsn_dl.training import RegularPolicy, train_regular


class TestConstruction:
    def test_only_four_variants(self):
        assert sorted(VARIANTS) == ["cnn2-lstm3", "cnn3-lstm1", "cnn3-lstm1-leaky",
                                    "cnn3-lstm3"]
        with pytest.raises(ValueError):
            build_variant(VariantSpec(2, 1, "relu"), 211, 3)
        with pytest.raises(ValueError):
            build_variant(VariantSpec(1, 3, "relu"), 211, 3)

    @pytest.mark.parametrize("n", [31, 64, 200])
    def test_cnn_intermediate_shapes(self, n):
        torch.manual_seed(0)
        x = torch.rand(n, 211)
        two = build_variant("cnn2-lstm3", 211, 3)
        three = build_variant("cnn3-lstm1", 211, 3)
        two.eval(), three.eval()
        assert tuple(two.cnn_features(x).shape) == (n, 96)
        assert tuple(three.cnn_features(x).shape) == (n, 128)

    @pytest.mark.parametrize("name", sorted(VARIANTS))
    @pytest.mark.parametrize("n", [31, 64, 200])
    def test_probabilities_normalized(self, name, n):
        torch.manual_seed(1)
        model = build_variant(name, 211, 4)
        model.eval()
        probs = model.predict_proba(torch.rand(n, 211))
        assert probs.shape == (4,)
        assert float(probs.sum()) == pytest.approx(1.0, abs=1e-6)
        assert float(probs.min()) >= 0.0

    def test_forget_gate_bias_initialized(self):
        model = build_variant("cnn2-lstm3", 211, 3)
        h = model.lstm.hidden_size
        for name, param in model.lstm.named_parameters():
            if name.startswith("bias_ih"):
                assert torch.all(param[h:2 * h] == 1.0)
                assert torch.all(param[:h] == 0.0)
            elif name.startswith("bias_hh"):
                assert torch.all(param == 0.0)

    def test_relu_and_leaky_agree_on_positive_preactivations(self):
        torch.manual_seed(2)
        relu = build_variant("cnn3-lstm1", 8, 3)
        leaky = build_variant("cnn3-lstm1-leaky", 8, 3)
        leaky.load_state_dict(relu.state_dict())
        relu.eval(), leaky.eval()
        # force every convolution pre-activation positive: non-negative weights
        # and biases with a strictly positive input
        with torch.no_grad():
            for m in list(relu.modules()) + list(leaky.modules()):
                if isinstance(m, nn.Conv1d):
                    m.weight.abs_()
                    m.bias.abs_()
        x = torch.rand(40, 8) + 1.0
        with torch.no_grad():
            a = relu(x)
            b = leaky(x)
        assert float((a - b).abs().max()) <= 1e-6

    def test_parameter_counts_frozen(self):
        # regression constants, verified against the layer formulas:
        # conv(i,o) = 5*i*o + o; per-direction LSTM = 256*in + 16384 + 512
        expected = {
            "cnn2-lstm3": 368099,
            "cnn3-lstm3": 446051,
            "cnn3-lstm1": 247395,
            "cnn3-lstm1-leaky": 247395,
        }

        def conv(i, o):
            return 5 * i * o + o

        def lstm_dir(inp, h=64):
            return 4 * h * inp + 4 * h * h + 8 * h

        assert expected["cnn2-lstm3"] == (conv(211, 56) + conv(56, 96)
                                          + 2 * lstm_dir(96) + 4 * lstm_dir(128)
                                          + 128 * 3 + 3)
        assert expected["cnn3-lstm1"] == (conv(211, 56) + conv(56, 96) + conv(96, 128)
                                          + 2 * lstm_dir(128) + 128 * 3 + 3)
        for name, total in expected.items():
            model = build_variant(name, 211, 3)
            assert sum(p.numel() for p in model.parameters()) == total, name


class TestTraining:
    def test_gradient_norm_clipped(self, toy_regular_set):
        samples, _, classes = toy_regular_set
        torch.manual_seed(3)
        model = build_variant("cnn2-lstm3", 20, classes)
        loss_fn = nn.CrossEntropyLoss()
        x, y = samples[0]
        loss = loss_fn(model(x * 100).unsqueeze(0), torch.tensor([y]))
        loss.backward()
        nn.utils.clip_grad_norm_(model.parameters(), 3.0)
        total = torch.sqrt(sum((p.grad ** 2).sum() for p in model.parameters()
                               if p.grad is not None))
        assert float(total) <= 3.0 + 1e-4

    def test_early_stop_restores_best_epoch(self, toy_regular_set):
        samples, _, classes = toy_regular_set
        torch.manual_seed(4)
        model = build_variant("cnn3-lstm1", 20, classes)
        # constant validation loss cannot improve after epoch 1
        val = [samples[0]]
        policy = RegularPolicy(max_epochs=100, early_stop_patience=5,
                               learning_rate=0.0)
        result = train_regular(model, samples[:4], val, policy)
        assert result.stopped_early
        assert result.best_epoch == 1
        assert len(result.log) == 6  # best epoch + patience window

    def test_lr_reduced_on_plateau(self, toy_regular_set):
        samples, _, classes = toy_regular_set
        torch.manual_seed(5)
        model = build_variant("cnn3-lstm1", 20, classes)
        policy = RegularPolicy(max_epochs=30, early_stop_patience=25,
                               lr_reduce_patience=10, learning_rate=0.0)
        result = train_regular(model, samples[:4], [samples[0]], policy)
        lrs = [r.lr for r in result.log]
        assert lrs[0] == 0.0  # degenerate rate freezes the model, forcing plateau
        policy2 = RegularPolicy(max_epochs=26, early_stop_patience=100,
                                lr_reduce_patience=10)
        torch.manual_seed(5)
        model2 = build_variant("cnn3-lstm1", 20, classes)
        # validation set disjoint from training and random: no steady improvement
        result2 = train_regular(model2, samples[:2], [samples[-1]], policy2)
        assert min(r.lr for r in result2.log) <= policy2.learning_rate

    def test_epoch_log_write(self, toy_regular_set, tmp_path):
        samples, _, classes = toy_regular_set
        torch.manual_seed(6)
        model = build_variant("cnn2-lstm3", 20, classes)
        result = train_regular(model, samples[:4], [samples[5]],
                               RegularPolicy(max_epochs=3))
        path = tmp_path / "log.csv"
        result.write_log(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,lr"
        assert len(lines) == 1 + len(result.log)
