"""Echo scenario synthesis: loudspeaker nonlinearity, level-controlled mixing,
room randomization, and batch dataset rendering.

A scenario combines far-end speech (played through a memoryless loudspeaker
distortion and a simulated room), near-end speech, and background noise at
requested signal-to-echo and signal-to-noise ratios. Mixing is purely
additive, so the microphone signal always equals the sum of its stored
components.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from aeclab.dsp import AudioSignal, as_samples
from aeclab.errors import ConfigError, DataError
from aeclab.rir import RoomSpec, image_method_rir
from aeclab.wavio import read_wav, write_wav

# Frames of the near-end signal within this range of its peak frame energy
# count as speech-active; level ratios are measured over the active region.
ACTIVITY_RANGE_DB = 40.0
ACTIVITY_FRAME = 256

T60_CHOICES = (0.2, 0.3, 0.4)


@dataclass(frozen=True)
class NonlinearityParams:
    """Memoryless loudspeaker distortion: hard clip, soft polynomial, sigmoid."""

    clip_fraction: float = 0.8
    poly_a1: float = 1.5
    poly_a2: float = -0.3
    sig_gain: float = 0.2
    sig_slope_pos: float = 4.0
    sig_slope_neg: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.clip_fraction <= 1.0:
            raise ConfigError("clip_fraction must be in (0, 1]")
        if self.sig_gain <= 0.0:
            raise ConfigError("sig_gain must be > 0")


@dataclass(frozen=True)
class EchoScenario:
    """Complete recipe for one synthetic mixture."""

    far_end: AudioSignal
    near_end: AudioSignal
    noise: AudioSignal | None
    room: RoomSpec
    nl: NonlinearityParams = NonlinearityParams()
    ser_db: float = 3.5
    snr_db: float = 10.0
    seed: int = 0


@dataclass(frozen=True)
class MixtureBundle:
    """Microphone signal and its additive components plus the reference."""

    y: AudioSignal
    d: AudioSignal
    s_mic: AudioSignal
    n_mic: AudioSignal
    x: AudioSignal


def loudspeaker_nonlinearity(x, nl: NonlinearityParams = NonlinearityParams()) -> AudioSignal:
    """Apply the three-stage distortion chain; identity when disabled."""
    samples = as_samples(x)
    if not nl.enabled:
        return AudioSignal(samples.copy())
    x_max = nl.clip_fraction * np.max(np.abs(samples)) if samples.size else 0.0
    clipped = np.clip(samples, -x_max, x_max)
    b = nl.poly_a1 * clipped + nl.poly_a2 * clipped**2
    slope = np.where(b > 0, nl.sig_slope_pos, nl.sig_slope_neg)
    out = nl.sig_gain * (2.0 / (1.0 + np.exp(-slope * b)) - 1.0)
    return AudioSignal(out)


def active_mask(s, frame: int = ACTIVITY_FRAME, range_db: float = ACTIVITY_RANGE_DB) -> np.ndarray:
    """Boolean sample mask of frames within range_db of the peak frame energy."""
    samples = as_samples(s)
    n_frames = len(samples) // frame
    if n_frames == 0:
        return np.ones(len(samples), dtype=bool)
    head = samples[: n_frames * frame].reshape(n_frames, frame)
    energies = np.sum(head**2, axis=1)
    peak = np.max(energies)
    if peak == 0.0:
        return np.zeros(len(samples), dtype=bool)
    active = energies > peak * 10.0 ** (-range_db / 10.0)
    mask = np.repeat(active, frame)
    # The trailing partial frame inherits the last full frame's state.
    tail = len(samples) - n_frames * frame
    if tail:
        mask = np.concatenate([mask, np.full(tail, active[-1])])
    return mask


def level_db(signal, reference, mask: np.ndarray | None = None) -> float:
    """10*log10 of reference energy over signal energy, optionally masked."""
    s = as_samples(reference)
    other = as_samples(signal)
    if mask is not None:
        s, other = s[mask], other[mask]
    e_ref, e_sig = np.sum(s**2), np.sum(other**2)
    if e_ref == 0.0 or e_sig == 0.0:
        raise DataError("level ratio undefined for silent signal")
    return 10.0 * math.log10(e_ref / e_sig)


def _level_gain(active_energy: float, ref_energy: float, target_db: float, what: str) -> float:
    if active_energy == 0.0:
        raise DataError(
            f"{what} is silent in the speech-active region but a finite level was requested"
        )
    return math.sqrt(ref_energy / (active_energy * 10.0 ** (target_db / 10.0)))


def mix_scenario(scn: EchoScenario) -> MixtureBundle:
    """Render one scenario into microphone signal and components.

    Echo and noise are scaled against the near-end speech energy measured
    over the speech-active region. An infinite requested ratio yields an
    exactly-zero component.
    """
    x = scn.far_end.samples
    s = scn.near_end.samples
    n = scn.noise.samples if scn.noise is not None else None

    lengths = [len(x), len(s)]
    if n is not None:
        lengths.append(len(n))
    length = min(lengths)
    if length == 0:
        raise DataError("empty source signal")
    x = x[:length]
    s = s[:length]

    mask = active_mask(s)
    s_energy = float(np.sum(s[mask] ** 2))

    if math.isinf(scn.ser_db):
        d = np.zeros(length)
    else:
        if s_energy == 0.0:
            raise DataError("near-end speech is silent; finite SER is undefined")
        h = image_method_rir(scn.room, seed=scn.seed)
        d_raw = fftconvolve(loudspeaker_nonlinearity(x, scn.nl).samples, h)[:length]
        d = d_raw * _level_gain(float(np.sum(d_raw[mask] ** 2)), s_energy, scn.ser_db, "echo")

    if math.isinf(scn.snr_db):
        n_mic = np.zeros(length)
    else:
        if n is None:
            raise DataError("finite SNR requested but no noise source given")
        if s_energy == 0.0:
            raise DataError("near-end speech is silent; finite SNR is undefined")
        n = n[:length]
        n_mic = n * _level_gain(float(np.sum(n[mask] ** 2)), s_energy, scn.snr_db, "noise")

    y = d + s + n_mic
    return MixtureBundle(
        y=AudioSignal(y),
        d=AudioSignal(d),
        s_mic=AudioSignal(s),
        n_mic=AudioSignal(n_mic),
        x=AudioSignal(x),
    )


def random_room(seed: int, t60: float | None = None, rir_len: int = 512) -> RoomSpec:
    """Draw a plausible shoebox room with source and mic at least 0.5 m apart."""
    rng = np.random.default_rng(seed)
    dims = np.array(
        [rng.uniform(3.0, 8.0), rng.uniform(3.0, 8.0), rng.uniform(2.5, 4.0)]
    )
    margin = 0.3
    while True:
        src = rng.uniform(margin, dims - margin)
        mic = rng.uniform(margin, dims - margin)
        if np.linalg.norm(src - mic) >= 0.5:
            break
    if t60 is None:
        t60 = float(rng.choice(T60_CHOICES))
    return RoomSpec(
        dimensions=tuple(dims),
        source_pos=tuple(src),
        mic_pos=tuple(mic),
        t60=t60,
        rir_len=rir_len,
    )


def _parse_level(value, what: str) -> float:
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity")):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DataError(f"{what} must be a number or 'inf', got {value!r}")


def scenario_from_entry(entry: dict, base_dir: Path | None = None) -> EchoScenario:
    """Build a scenario from one manifest record (paths resolved against base_dir)."""
    base = Path(base_dir) if base_dir else Path(".")

    def resolve(key, required=True):
        path = entry.get(key)
        if path is None:
            if required:
                raise DataError(f"manifest entry missing required field {key!r}")
            return None
        path = Path(path)
        return path if path.is_absolute() else base / path

    seed = int(entry.get("seed", 0))
    ser_db = _parse_level(entry.get("ser_db", 3.5), "ser_db")
    snr_db = _parse_level(entry.get("snr_db", 10.0), "snr_db")

    far = read_wav(resolve("far_end"))
    near = read_wav(resolve("near_end"))
    noise_path = resolve("noise", required=not math.isinf(snr_db))
    noise = read_wav(noise_path) if noise_path is not None else None

    if "room" in entry:
        r = dict(entry["room"])
        room = RoomSpec(
            dimensions=tuple(r["dimensions"]),
            source_pos=tuple(r["source_pos"]),
            mic_pos=tuple(r["mic_pos"]),
            t60=float(r["t60"]),
            rir_len=int(r.get("rir_len", 512)),
        )
    else:
        room = random_room(seed)

    nl = NonlinearityParams(**entry["nonlinearity"]) if "nonlinearity" in entry else NonlinearityParams()
    return EchoScenario(
        far_end=far, near_end=near, noise=noise, room=room, nl=nl,
        ser_db=ser_db, snr_db=snr_db, seed=seed,
    )


def _level_repr(value: float):
    return "inf" if math.isinf(value) else value


def _scenario_metadata(entry: dict, scn: EchoScenario, bundle: MixtureBundle) -> dict:
    mask = active_mask(bundle.s_mic)
    meta = {
        "seed": scn.seed,
        "ser_db": _level_repr(scn.ser_db),
        "snr_db": _level_repr(scn.snr_db),
        "room": {
            "dimensions": list(scn.room.dimensions),
            "source_pos": list(scn.room.source_pos),
            "mic_pos": list(scn.room.mic_pos),
            "t60": scn.room.t60,
            "rir_len": scn.room.rir_len,
        },
        "nonlinearity": asdict(scn.nl),
        "n_samples": len(bundle.y),
        "sources": {k: entry.get(k) for k in ("far_end", "near_end", "noise")},
    }
    if not math.isinf(scn.ser_db):
        meta["realized_ser_db"] = level_db(bundle.d, bundle.s_mic, mask)
    if not math.isinf(scn.snr_db):
        meta["realized_snr_db"] = level_db(bundle.n_mic, bundle.s_mic, mask)
    return meta


COMPONENT_SUFFIXES = ("x", "y", "d", "s", "n")
BLOCK_ALIGN = 256  # rendered mixtures hold a whole number of canceller blocks


def _block_align(bundle: MixtureBundle) -> MixtureBundle:
    length = (len(bundle.y) // BLOCK_ALIGN) * BLOCK_ALIGN
    if length == len(bundle.y):
        return bundle
    if length == 0:
        raise DataError(f"mixture shorter than one block ({BLOCK_ALIGN} samples)")
    return MixtureBundle(
        **{k: AudioSignal(getattr(bundle, k).samples[:length]) for k in ("y", "d", "s_mic", "n_mic", "x")}
    )


def render_entry(entry: dict, out_dir: Path, base_dir: Path | None = None) -> dict:
    """Render one manifest entry to WAV files plus a metadata record."""
    out_dir = Path(out_dir)
    utt_id = str(entry["id"])
    scn = scenario_from_entry(entry, base_dir)
    bundle = _block_align(mix_scenario(scn))
    signals = {
        "x": bundle.x, "y": bundle.y, "d": bundle.d, "s": bundle.s_mic, "n": bundle.n_mic,
    }
    for suffix, signal in signals.items():
        write_wav(out_dir / f"{utt_id}.{suffix}.wav", signal)
    meta = _scenario_metadata(entry, scn, bundle)
    (out_dir / f"{utt_id}.meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n"
    )
    return meta


def read_manifest(path) -> list[dict]:
    """Parse a JSON-lines manifest, assigning sequential ids where missing."""
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(entry, dict):
                raise DataError(f"{path}: line {lineno}: expected a JSON object")
            entry.setdefault("id", f"utt{lineno:04d}")
            entries.append(entry)
    return entries


def build_dataset(manifest_path, out_dir, base_dir=None) -> dict:
    """Render every manifest entry; per-entry failures are recorded, not fatal.

    Writes one WAV per component (x, y, d, s, n) and a metadata JSON per
    mixture, plus an index.json summary. Fully deterministic given seeds.
    """
    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if base_dir is None:
        base_dir = manifest_path.parent
    entries = read_manifest(manifest_path)

    rendered, failures = [], []
    for entry in entries:
        try:
            render_entry(entry, out_dir, base_dir)
            rendered.append(entry["id"])
        except Exception as exc:
            failures.append({"id": entry.get("id"), "error": str(exc)})
    summary = {"entries": rendered, "failures": failures}
    (out_dir / "index.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return summary


def dataset_ids(dataset_dir) -> list[str]:
    """Utterance ids present in a rendered dataset, in index order."""
    index = Path(dataset_dir) / "index.json"
    if index.exists():
        return list(json.loads(index.read_text())["entries"])
    ids = sorted(p.name[: -len(".y.wav")] for p in Path(dataset_dir).glob("*.y.wav"))
    if not ids:
        raise DataError(f"{dataset_dir}: no rendered mixtures found")
    return ids
