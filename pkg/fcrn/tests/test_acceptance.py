"""Acceptance suite for the enhancement network, one PASS/FAIL line per
criterion. The end-to-end check drives the signal pipeline exclusively
through its command line and file formats."""

import functools
import json
import subprocess
import sys
import wave

import numpy as np
import pytest
import torch

from fcrn.data import load_dataset
from fcrn.loss import spectral_mse
from fcrn.model import FcrnConfig, build_model, parameter_count
from fcrn.train import TrainSpec, load_checkpoint, train

from conftest import write_pair


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE FAIL: {name}")
                raise
            print(f"ACCEPTANCE PASS: {name}")

        return run

    return wrap


@criterion("Shape/state contract and parameter count (5.2M within [4.7M, 5.7M])")
def test_shape_state_and_parameter_count():
    count = parameter_count(build_model(FcrnConfig()))
    assert 4_700_000 <= count <= 5_700_000, f"default parameter count {count}"
    torch.manual_seed(0)
    model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16)))
    model.eval()
    x = torch.randn(2, 9, 2, 260, 1)
    out, state = model(x)
    assert tuple(out.shape) == (2, 9, 2, 260, 1)
    with torch.no_grad():
        again, _ = model(x)
    assert torch.equal(out, again), "recurrent state leaked between calls"


@criterion("Loss gradient vs central differences (relative error < 1e-4)")
def test_loss_gradient_check():
    rng = np.random.default_rng(0)
    s_hat = torch.tensor(rng.standard_normal((3, 8, 2)), requires_grad=True)
    s = torch.tensor(rng.standard_normal((3, 8, 2)))
    spectral_mse(s_hat, s).backward()
    analytic = s_hat.grad.numpy()
    h = 1e-6
    base = s_hat.detach().numpy()
    numeric = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus, minus = base.copy(), base.copy()
        plus[idx] += h
        minus[idx] -= h
        numeric[idx] = (
            float(spectral_mse(torch.from_numpy(plus), s))
            - float(spectral_mse(torch.from_numpy(minus), s))
        ) / (2 * h)
        it.iternext()
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
    assert np.max(rel) < 1e-4, f"max relative error {np.max(rel):.3e}"


@criterion("Toy overfit below 10% of initial loss; LR schedule events exact")
def test_overfit_and_schedule(tmp_path):
    write_pair(tmp_path, "utt000", n_frames=120, seed=3, maskable=True)
    dataset = load_dataset(tmp_path, ("E",), 260, 50)
    torch.manual_seed(0)
    model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16), mode="OutM"))
    history = train(model, dataset, TrainSpec(lr_init=5e-3, max_epochs=100, seed=0))
    losses = [rec["loss"] for rec in history]
    assert min(losses) < 0.1 * losses[0], f"loss only reached {min(losses) / losses[0]:.2%}"

    # schedule events on a flat loss: decay by exactly 0.6 after every 3
    # non-improving epochs, stop once the rate falls below its floor
    torch.manual_seed(0)
    flat_model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16)))
    flat = train(flat_model, dataset, TrainSpec(lr_init=1e-25, stop_lr=5e-26, seed=0))
    decays = [rec["epoch"] for rec in flat if "lr_decay" in rec["events"]]
    assert decays == [4, 7], f"decay epochs {decays}"
    lrs = [rec["lr"] for rec in flat]
    for e in decays:
        assert abs(lrs[e - 1] / lrs[e - 2] - 0.6) < 1e-12
    assert "stop_lr" in flat[-1]["events"]
    assert flat[-1]["lr"] < 5e-26


# ---------------------------------------------------------------------------
# End-to-end desk-scale sanity against the signal pipeline's CLI.

FS = 16000


def _speech_like(duration_s, seed, rng_pauses=True):
    rng = np.random.default_rng(seed)
    n = int(duration_s * FS)
    kernel = 0.92 ** np.arange(80)
    x = np.convolve(rng.standard_normal(n), kernel)[:n]
    env_pts = rng.uniform(0.3, 1.0, max(2, int(duration_s * 3) + 2))
    env = np.interp(np.arange(n), np.linspace(0, n, len(env_pts)), env_pts)
    x *= env
    if rng_pauses:
        pos = 0
        while pos < n:
            talk = int(rng.uniform(0.5, 1.5) * FS)
            gap = int(rng.uniform(0.2, 0.5) * FS)
            x[pos + talk : pos + talk + gap] *= 0.1
            pos += talk + gap
    return 0.3 * x / np.max(np.abs(x))


def _noise_like(duration_s, seed):
    rng = np.random.default_rng(seed)
    n = int(duration_s * FS)
    kernel = 0.7 ** np.arange(40)
    x = np.convolve(rng.standard_normal(n), kernel)[:n]
    return 0.2 * x / np.max(np.abs(x))


def _write_pcm16(path, samples):
    data = (np.clip(samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(FS)
        fh.writeframes(data.tobytes())


def _pipeline(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "aeclab.cli", *args],
        capture_output=True,
        text=True,
        timeout=900,
    )
    assert proc.returncode == 0, f"aeclab {' '.join(args)}\n{proc.stdout}\n{proc.stderr}"


def _pipeline_available() -> bool:
    probe = subprocess.run(
        [sys.executable, "-c", "import aeclab.cli"], capture_output=True
    )
    return probe.returncode == 0


@pytest.mark.slow
@criterion("Desk-scale end-to-end: trained mask net beats the canceller-only baseline")
def test_end_to_end_desk_scale(tmp_path):
    if not _pipeline_available():
        pytest.skip("signal pipeline CLI not installed")
    src = tmp_path / "src"
    src.mkdir()
    splits = {"train": range(50), "held": range(50, 60)}
    for split, indices in splits.items():
        entries = []
        for i in indices:
            _write_pcm16(src / f"far{i}.wav", _speech_like(2.0, 3000 + 3 * i))
            _write_pcm16(src / f"near{i}.wav", _speech_like(2.0, 3001 + 3 * i))
            _write_pcm16(src / f"noise{i}.wav", _noise_like(2.0, 3002 + 3 * i))
            entries.append(
                {
                    "id": f"utt{i:03d}",
                    "far_end": f"far{i}.wav",
                    "near_end": f"near{i}.wav",
                    "noise": f"noise{i}.wav",
                    "ser_db": 0.0,
                    "snr_db": 5.0,
                    "seed": 4000 + i,
                }
            )
        manifest = tmp_path / f"{split}.jsonl"
        manifest.write_text("\n".join(json.dumps(e) for e in entries) + "\n")
        base = tmp_path / split
        _pipeline("simulate", "--manifest", str(manifest), "--base-dir", str(src),
                  "--out", str(base / "data"))
        _pipeline("aec", "--dataset", str(base / "data"), "--out", str(base / "aec"))
        _pipeline("export-features", "--dataset", str(base / "data"), "--aec", str(base / "aec"),
                  "--out", str(base / "feat"), "--inputs", "E", "--include-target")

    dataset = load_dataset(tmp_path / "train" / "feat", ("E",), 260, 50)
    torch.manual_seed(1)
    model = build_model(FcrnConfig(lstm_filters=8, encoder_filters=(8, 16), mode="OutM"))
    train(model, dataset, TrainSpec(lr_init=2e-3, max_epochs=6, seed=1),
          checkpoint_path=tmp_path / "model.pt")

    from fcrn.infer import infer_directory

    loaded, _ = load_checkpoint(tmp_path / "model.pt")
    infer_directory(loaded, tmp_path / "held" / "feat", tmp_path / "held" / "net")

    held = tmp_path / "held"
    _pipeline("eval", "--dataset", str(held / "data"), "--aec", str(held / "aec"),
              "--net-out", str(held / "net"), "--mode", "OutM",
              "--out", str(held / "report_net.json"))
    _pipeline("eval", "--dataset", str(held / "data"), "--aec", str(held / "aec"),
              "--out", str(held / "report_base.json"))

    net = json.loads((held / "report_net.json").read_text())["summary"]
    base = json.loads((held / "report_base.json").read_text())["summary"]
    print(
        f"  baseline erle_bb {base['erle_bb_mean']:.2f} dB, dsnr_bb {base['dsnr_bb_mean']:.2f} dB; "
        f"with net erle_bb {net['erle_bb_mean']:.2f} dB, dsnr_bb {net['dsnr_bb_mean']:.2f} dB"
    )
    assert net["erle_bb_mean"] > base["erle_bb_mean"], "echo suppression did not improve"
    assert net["dsnr_bb_mean"] > base["dsnr_bb_mean"], "noise reduction did not improve"
