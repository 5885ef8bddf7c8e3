import numpy as np
import pytest
import torch

from fcrn.data import load_dataset
from fcrn.exchange import ExchangeError
from fcrn.model import FcrnConfig, build_model
from fcrn.train import TrainSpec, load_checkpoint, train

from conftest import write_pair

TOY = dict(lstm_filters=8, encoder_filters=(8, 16))


def toy_dataset(tmp_path, count=1, seq_len=50, maskable=False, n_frames=120):
    for i in range(count):
        write_pair(tmp_path, f"utt{i:03d}", n_frames=n_frames, seed=i, maskable=maskable)
    return load_dataset(tmp_path, ("E",), 260, seq_len)


class TestSpec:
    def test_defaults(self):
        spec = TrainSpec()
        assert spec.batch_size == 16
        assert spec.sequence_length == 50
        assert spec.lr_init == 5e-5
        assert spec.lr_decay == 0.6
        assert spec.decay_patience == 3
        assert spec.stop_lr == 5e-7
        assert spec.stop_patience == 10

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainSpec(lr_decay=1.5)
        with pytest.raises(ValueError):
            TrainSpec(batch_size=0)


class TestSchedule:
    def test_plateau_decays_and_stops(self, tmp_path):
        # a vanishing learning rate freezes the loss, so every epoch after the
        # first is a plateau epoch: decay at 3, 6, 9 without improvement, stop
        # at 10
        dataset = toy_dataset(tmp_path, count=1, n_frames=40)
        model = build_model(FcrnConfig(**TOY))
        spec = TrainSpec(lr_init=1e-30, stop_lr=1e-40, seed=0)
        history = train(model, dataset, spec)
        events = {rec["epoch"]: rec["events"] for rec in history}
        decay_epochs = [e for e, ev in events.items() if "lr_decay" in ev]
        assert decay_epochs == [4, 7, 10]  # 3rd, 6th, 9th non-improving epoch
        assert history[-1]["events"][-1] == "stop_plateau"
        assert history[-1]["epoch"] == 11  # 10th non-improving epoch
        lrs = [rec["lr"] for rec in history]
        for e in decay_epochs:
            assert abs(lrs[e - 1] / lrs[e - 2] - 0.6) < 1e-12

    def test_stop_when_lr_below_floor(self, tmp_path):
        # same scale structure as the real schedule (one decay stays above the
        # floor, the second crosses it), at a rate too small to move fp32
        # weights so the loss stays flat
        dataset = toy_dataset(tmp_path, count=1, n_frames=40)
        model = build_model(FcrnConfig(**TOY))
        spec = TrainSpec(lr_init=1e-25, stop_lr=5e-26, seed=0)
        history = train(model, dataset, spec)
        # decay at epoch 4 -> 6e-26 (continue), epoch 7 -> 3.6e-26 (stop)
        assert history[-1]["epoch"] == 7
        assert "stop_lr" in history[-1]["events"]
        assert history[-1]["lr"] < 5e-26

    def test_max_epochs_cap(self, tmp_path):
        dataset = toy_dataset(tmp_path, count=1, n_frames=40)
        model = build_model(FcrnConfig(**TOY))
        history = train(model, dataset, TrainSpec(lr_init=1e-3, max_epochs=3, seed=0))
        assert history[-1]["epoch"] == 3
        assert "stop_max_epochs" in history[-1]["events"]


class TestTraining:
    def test_loss_decreases_on_learnable_data(self, tmp_path):
        dataset = toy_dataset(tmp_path, count=4, maskable=True)
        torch.manual_seed(0)
        model = build_model(FcrnConfig(**TOY))
        history = train(model, dataset, TrainSpec(lr_init=2e-3, max_epochs=8, seed=0))
        losses = [rec["loss"] for rec in history]
        assert min(losses[4:]) < 0.5 * losses[0]

    def test_deterministic_under_seed(self, tmp_path):
        dataset = toy_dataset(tmp_path, count=2, n_frames=60)
        histories = []
        for _ in range(2):
            torch.manual_seed(7)
            model = build_model(FcrnConfig(**TOY))
            histories.append(train(model, dataset, TrainSpec(lr_init=1e-3, max_epochs=3, seed=7)))
        a = [rec["loss"] for rec in histories[0]]
        b = [rec["loss"] for rec in histories[1]]
        assert np.allclose(a, b, rtol=0, atol=1e-10)

    def test_checkpoint_round_trip(self, tmp_path):
        dataset = toy_dataset(tmp_path / "data", count=1, n_frames=60)
        model = build_model(FcrnConfig(**TOY))
        path = tmp_path / "model.pt"
        train(model, dataset, TrainSpec(lr_init=1e-3, max_epochs=1, seed=0), checkpoint_path=path)
        loaded, history = load_checkpoint(path)
        assert loaded.config == model.config
        assert len(history) == 1
        x = torch.randn(1, 4, 2, 260, 1)
        with torch.no_grad():
            a, _ = model(x)
            b, _ = loaded(x)
        assert torch.allclose(a, b, atol=0)

    def test_empty_dataset_rejected(self, tmp_path):
        with pytest.raises(ExchangeError):
            load_dataset(tmp_path, ("E",), 260, 50)

    def test_stream_mismatch_reported(self, tmp_path):
        write_pair(tmp_path, "utt000", n_frames=40, seed=0)
        with pytest.raises(ExchangeError, match="missing input streams"):
            load_dataset(tmp_path, ("Y", "E"), 260, 50)
