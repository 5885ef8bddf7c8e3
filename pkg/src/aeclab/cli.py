"""Batch command-line front end.

Composable stages: `simulate` renders mixtures from a manifest, `aec` runs
the Kalman canceller, `export-features` writes spectral exchange files for
an external second stage, `enhance` applies second-stage outputs (or oracle
substitutes), `eval` computes the metric report, and `ablate` drives the
input-combination grid. Exit codes: 0 success, 1 usage error, 2 data error,
3 partial batch failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from functools import partial
from pathlib import Path

import numpy as np

from aeclab import sim
from aeclab.dsp import FrameConfig, Spectrogram, istft, stft
from aeclab.enhance import OutputMode, assemble_output
from aeclab.errors import AeclabError, ConfigError, DataError
from aeclab.exchange import read_exchange, write_exchange
from aeclab.kalman import KalmanConfig, process_aec
from aeclab.metrics import (
    OperatorTrace,
    blackbox_separate,
    delta_snr,
    erle,
    identity_gains,
    pesq_adapter,
    postfilter_gain_from_run,
    replay_output,
)
from aeclab.sim import MixtureBundle, dataset_ids
from aeclab.wavio import read_wav, write_wav

INPUT_STREAMS = ("Y", "X", "Dhat", "E")
SUM_CHECK_TOLERANCE = 1e-5  # float32 file storage bounds the replay agreement
ORACLE_KINDS = ("zero", "identity", "wiener")
IDENTITY_MASK_MAGNITUDE = 20.0  # tanh(20) == 1.0 in float64
WIENER_MASK_CAP = 5.0
WIENER_DIRECT_CAP = 2.0


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved processing configuration shared by the batch stages."""

    kalman: KalmanConfig
    frame: FrameConfig
    mode: OutputMode = OutputMode.MASK
    inputs: tuple[str, ...] = ("E",)

    def __post_init__(self):
        inputs = parse_input_set(",".join(self.inputs) if self.inputs else "")
        object.__setattr__(self, "inputs", inputs)


def parse_input_set(text: str) -> tuple[str, ...]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    for name in names:
        if name not in INPUT_STREAMS:
            raise ConfigError(f"unknown input stream {name!r}; choose from {INPUT_STREAMS}")
    if "E" not in names:
        raise ConfigError("the input set must contain E (the echo-reduced signal)")
    ordered = tuple(s for s in INPUT_STREAMS if s in names)
    return ordered


def _load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data


def build_kalman_config(args) -> KalmanConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(_load_config_file(args.config).get("kalman", {}))
    for f in fields(KalmanConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    known = {f.name for f in fields(KalmanConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown kalman config fields: {sorted(unknown)}")
    return KalmanConfig(**values)


def build_frame_config(args) -> FrameConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(_load_config_file(args.config).get("frame", {}))
    known = {"frame_len", "shift", "dft_size"}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown frame config fields: {sorted(unknown)}")
    return FrameConfig(**values)


def _add_kalman_flags(parser):
    group = parser.add_argument_group("kalman filter")
    group.add_argument("--dft-size", dest="dft_size", type=int)
    group.add_argument("--shift", dest="shift", type=int)
    group.add_argument("--forgetting-factor", dest="forgetting_factor", type=float)
    group.add_argument("--overestimation", dest="overestimation", type=float)
    group.add_argument("--psd-smoothing", dest="psd_smoothing", type=float)
    group.add_argument("--init-cov", dest="init_cov", type=float)
    group.add_argument("--psd-floor", dest="psd_floor", type=float)
    group.add_argument("--filter-support", dest="filter_support", type=int)


def _map_jobs(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _report_failures(label: str, results) -> int:
    failures = [r for r in results if r[1] is not None]
    for utt_id, err in failures:
        print(f"{label}: {utt_id}: {err}", file=sys.stderr)
    if failures and len(failures) == len(results):
        return 2
    return 3 if failures else 0


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise DataError(f"manifest not found: {manifest}")
    entries = sim.read_manifest(manifest)
    if args.seed is not None:
        for offset, entry in enumerate(entries):
            entry.setdefault("seed", args.seed + offset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_dir = Path(args.base_dir) if args.base_dir else manifest.parent

    worker = partial(_simulate_one, out_dir=out_dir, base_dir=base_dir)
    results = _map_jobs(worker, entries, args.workers)
    rendered = [r[0] for r in results if r[1] is None]
    failures = [{"id": r[0], "error": r[1]} for r in results if r[1] is not None]
    summary = {"entries": rendered, "failures": failures}
    (out_dir / "index.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    print(f"simulate: {len(rendered)} mixtures rendered, {len(failures)} failed -> {out_dir}")
    return _report_failures("simulate", results)


def _simulate_one(entry: dict, out_dir: Path, base_dir: Path):
    try:
        sim.render_entry(entry, out_dir, base_dir)
        return entry["id"], None
    except Exception as exc:
        return entry.get("id"), str(exc)


# --------------------------------------------------------------------- aec


def cmd_aec(args) -> int:
    kcfg = build_kalman_config(args)
    ids = dataset_ids(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    worker = partial(
        _aec_one,
        dataset=Path(args.dataset),
        out_dir=out_dir,
        kcfg=kcfg,
        mic_component=args.mic_component,
        trace_spxc=args.trace_spxc,
    )
    results = _map_jobs(worker, ids, args.workers)
    ok = sum(1 for r in results if r[1] is None)
    print(f"aec: {ok}/{len(ids)} utterances processed -> {out_dir}")
    return _report_failures("aec", results)


def _aec_one(utt_id: str, dataset: Path, out_dir: Path, kcfg: KalmanConfig,
             mic_component: str, trace_spxc: bool = False):
    try:
        x = read_wav(dataset / f"{utt_id}.x.wav").samples
        y = read_wav(dataset / f"{utt_id}.{mic_component}.wav").samples
        r = kcfg.shift
        n_blocks = math.ceil(len(y) / r)
        pad = n_blocks * r - len(y)
        if pad:
            x = np.concatenate([x, np.zeros(pad)])
            y = np.concatenate([y, np.zeros(pad)])
        e, d_hat, trace = process_aec(x, y, kcfg)
        write_wav(out_dir / f"{utt_id}.e.wav", e)
        write_wav(out_dir / f"{utt_id}.dhat.wav", d_hat)
        np.savez(
            out_dir / f"{utt_id}.trace.npz",
            w_frames=trace,
            dft_size=kcfg.dft_size,
            shift=kcfg.shift,
            filter_support=kcfg.filter_support,
            mic_component=mic_component,
        )
        if trace_spxc:
            write_exchange(out_dir / f"{utt_id}.trace.spxc", {"W": trace})
        return utt_id, None
    except Exception as exc:
        return utt_id, str(exc)


def load_trace(path, kcfg: KalmanConfig) -> np.ndarray:
    with np.load(path) as data:
        if int(data["dft_size"]) != kcfg.dft_size or int(data["shift"]) != kcfg.shift:
            raise DataError(
                f"{path}: trace recorded with dft_size={int(data['dft_size'])}, "
                f"shift={int(data['shift'])}, current config differs"
            )
        return data["w_frames"]


# ------------------------------------------------------- export features


def cmd_export_features(args) -> int:
    inputs = parse_input_set(args.inputs)
    kcfg = build_kalman_config(args)
    fcfg = build_frame_config(args)
    ids = dataset_ids(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    worker = partial(
        _export_one,
        dataset=Path(args.dataset),
        aec_dir=Path(args.aec),
        out_dir=out_dir,
        inputs=inputs,
        fcfg=fcfg,
        include_target=args.include_target,
    )
    results = _map_jobs(worker, ids, args.workers)
    ok = sum(1 for r in results if r[1] is None)
    print(f"export-features: {ok}/{len(ids)} utterances, streams {list(inputs)} -> {out_dir}")
    return _report_failures("export-features", results)


def _export_one(utt_id, dataset: Path, aec_dir: Path, out_dir: Path, inputs, fcfg, include_target):
    try:
        e = read_wav(aec_dir / f"{utt_id}.e.wav").samples
        length = len(e)
        sources = {}
        if "Y" in inputs:
            sources["Y"] = _padded_to(read_wav(dataset / f"{utt_id}.y.wav").samples, length)
        if "X" in inputs:
            sources["X"] = _padded_to(read_wav(dataset / f"{utt_id}.x.wav").samples, length)
        if "Dhat" in inputs:
            sources["Dhat"] = read_wav(aec_dir / f"{utt_id}.dhat.wav").samples
        sources["E"] = e
        streams = {label: stft(sources[label], fcfg).frames for label in inputs}
        write_exchange(out_dir / f"{utt_id}.features.spxc", streams)
        if include_target:
            s = _padded_to(read_wav(dataset / f"{utt_id}.s.wav").samples, length)
            write_exchange(out_dir / f"{utt_id}.target.spxc", {"Shat": stft(s, fcfg).frames})
        return utt_id, None
    except Exception as exc:
        return utt_id, str(exc)


def _padded_to(x: np.ndarray, length: int) -> np.ndarray:
    if len(x) > length:
        return x[:length]
    if len(x) < length:
        return np.concatenate([x, np.zeros(length - len(x))])
    return x


# ----------------------------------------------------------------- enhance


def oracle_net_output(
    kind: str,
    mode: OutputMode,
    e_spec: Spectrogram,
    s_spec: Spectrogram | None = None,
) -> np.ndarray:
    """Reference second-stage outputs for pipeline testing without a model.

    zero: full suppression. identity: pass-through (saturating mask or the
    input spectrum itself). wiener: component-derived target-over-input
    quotient with a magnitude cap, requiring the clean speech spectra.
    """
    shape = e_spec.frames.shape
    if kind == "zero":
        return np.zeros(shape, dtype=np.complex128)
    if kind == "identity":
        if mode is OutputMode.MASK:
            return np.full(shape, IDENTITY_MASK_MAGNITUDE, dtype=np.complex128)
        return e_spec.frames.copy()
    if kind == "wiener":
        if s_spec is None:
            raise ConfigError("the wiener oracle needs the clean speech component (--dataset)")
        e = e_spec.frames
        usable = np.abs(e) > 1e-9
        quotient = np.where(usable, s_spec.frames / np.where(usable, e, 1.0), 0.0)
        cap = WIENER_MASK_CAP if mode is OutputMode.MASK else WIENER_DIRECT_CAP
        mag = np.abs(quotient)
        over = mag > cap
        quotient = np.where(over, quotient * (cap / np.where(over, mag, 1.0)), quotient)
        if mode is OutputMode.MASK:
            return quotient
        return e * quotient
    raise ConfigError(f"unknown oracle kind {kind!r}; choose from {ORACLE_KINDS}")


def cmd_enhance(args) -> int:
    if bool(args.net_out) == bool(args.oracle):
        raise UsageError("exactly one of --net-out or --oracle is required")
    mode = OutputMode.parse(args.mode)
    fcfg = build_frame_config(args)
    ids = dataset_ids(args.dataset) if args.dataset else _aec_ids(args.aec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    worker = partial(
        _enhance_one,
        aec_dir=Path(args.aec),
        dataset=Path(args.dataset) if args.dataset else None,
        net_dir=Path(args.net_out) if args.net_out else None,
        oracle=args.oracle,
        mode=mode,
        fcfg=fcfg,
        out_dir=out_dir,
    )
    results = _map_jobs(worker, ids, args.workers)
    ok = sum(1 for r in results if r[1] is None)
    print(f"enhance: {ok}/{len(ids)} utterances ({mode.value}) -> {out_dir}")
    return _report_failures("enhance", results)


def _aec_ids(aec_dir) -> list[str]:
    ids = sorted(p.name[: -len(".e.wav")] for p in Path(aec_dir).glob("*.e.wav"))
    if not ids:
        raise DataError(f"{aec_dir}: no canceller outputs found")
    return ids


def _net_stream_label(mode: OutputMode) -> str:
    return "M" if mode is OutputMode.MASK else "Shat"


def _enhance_one(utt_id, aec_dir, dataset, net_dir, oracle, mode, fcfg, out_dir):
    try:
        e = read_wav(aec_dir / f"{utt_id}.e.wav").samples
        e_spec = stft(e, fcfg)
        if oracle:
            s_spec = None
            if oracle == "wiener":
                if dataset is None:
                    raise ConfigError("the wiener oracle needs --dataset for the clean component")
                s = _padded_to(read_wav(dataset / f"{utt_id}.s.wav").samples, len(e))
                s_spec = stft(s, fcfg)
            net = oracle_net_output(oracle, mode, e_spec, s_spec)
            write_exchange(out_dir / f"{utt_id}.net.spxc", {_net_stream_label(mode): net})
        else:
            fh = read_exchange(net_dir / f"{utt_id}.net.spxc")
            net = fh.stream(_net_stream_label(mode)).astype(np.complex128)
        if net.shape != e_spec.frames.shape:
            raise DataError(
                f"net output frames {net.shape} do not match spectrum {e_spec.frames.shape}"
            )
        shat_spec = assemble_output(mode, e_spec, Spectrogram(net, fcfg))
        write_wav(out_dir / f"{utt_id}.shat.wav", istft(shat_spec, length=len(e)))
        return utt_id, None
    except Exception as exc:
        return utt_id, str(exc)


# -------------------------------------------------------------------- eval


def _load_components(dataset: Path, utt_id: str, length: int) -> MixtureBundle:
    def comp(suffix):
        return _padded_to(read_wav(dataset / f"{utt_id}.{suffix}.wav").samples, length)

    return MixtureBundle(
        y=_signal(comp("y")),
        d=_signal(comp("d")),
        s_mic=_signal(comp("s")),
        n_mic=_signal(comp("n")),
        x=_signal(comp("x")),
    )


def _signal(samples):
    from aeclab.dsp import AudioSignal

    return AudioSignal(samples)


def _metric_entry(value) -> dict | None:
    if value is None:
        return None
    return {"db": value.db, "capped": value.capped}


def _eval_one(utt_id, dataset, aec_dir, net_dir, mode, kcfg, fcfg, mic_component, pesq_tool):
    try:
        y = read_wav(dataset / f"{utt_id}.y.wav").samples
        if aec_dir is not None:
            e = read_wav(aec_dir / f"{utt_id}.e.wav").samples
            w_frames = load_trace(aec_dir / f"{utt_id}.trace.npz", kcfg)
            length = w_frames.shape[0] * kcfg.shift
        else:
            # No canceller stage: the echo path estimate is identically zero.
            n_blocks = len(y) // kcfg.shift
            length = n_blocks * kcfg.shift
            e = y[:length]
            w_frames = np.zeros((n_blocks, kcfg.n_bins), dtype=np.complex128)
        bundle = _load_components(dataset, utt_id, length)

        e_spec = stft(_padded_to(e, length), fcfg)
        if net_dir is not None:
            fh = read_exchange(Path(net_dir) / f"{utt_id}.net.spxc")
            net = fh.stream(_net_stream_label(mode)).astype(np.complex128)
            gains = postfilter_gain_from_run(e_spec, net, mode)
        else:
            gains = identity_gains(length, fcfg)
        trace = OperatorTrace(w_frames=w_frames, gains=gains, mode=mode)

        output = replay_output(trace, bundle.x, bundle.y, kcfg, fcfg)
        record = {"id": utt_id, "length": length}

        if mic_component == "full":
            comps = blackbox_separate(trace, bundle, bundle.x, kcfg, fcfg)
            sum_dev = float(np.max(np.abs(comps.total() - output)))
            if sum_dev > SUM_CHECK_TOLERANCE:
                raise DataError(
                    f"component sum deviates from output by {sum_dev:.3e} "
                    f"(tolerance {SUM_CHECK_TOLERANCE:.0e})"
                )
            record["sum_check_max_dev"] = sum_dev
            d = bundle.d.samples
            record["erle_bb"] = (
                _metric_entry(erle(d, comps.d_tilde)) if np.any(d) else None
            )
            record["dsnr_bb"] = (
                _metric_entry(delta_snr(bundle.s_mic, bundle.n_mic, comps.s_tilde, comps.n_tilde))
                if np.any(bundle.n_mic.samples) and np.any(bundle.s_mic.samples)
                else None
            )
            pesq_full = pesq_adapter(bundle.s_mic, output, pesq_tool)
            pesq_bb = pesq_adapter(bundle.s_mic, comps.s_tilde, pesq_tool)
            record["pesq_full"] = pesq_full.mos if pesq_full.status == "ok" else pesq_full.status
            record["pesq_bb"] = pesq_bb.mos if pesq_bb.status == "ok" else pesq_bb.status
        elif mic_component == "d":
            record["erle_echo_only"] = _metric_entry(erle(bundle.d.samples, output))
        elif mic_component == "n":
            e_in = float(np.sum(bundle.n_mic.samples**2))
            e_out = float(np.sum(output**2))
            if e_in == 0.0:
                raise DataError("noise component is silent")
            if e_out == 0.0:
                record["dsnr_noise_only"] = {"db": 80.0, "capped": True}
            else:
                record["dsnr_noise_only"] = {
                    "db": 10.0 * math.log10(e_in / e_out),
                    "capped": False,
                }
        elif mic_component == "s":
            res = pesq_adapter(bundle.s_mic, output, pesq_tool)
            record["pesq_speech_only"] = res.mos if res.status == "ok" else res.status
        return utt_id, None, record
    except Exception as exc:
        return utt_id, str(exc), None


_METRIC_FIELDS = ("erle_bb", "dsnr_bb", "erle_echo_only", "dsnr_noise_only")
_PESQ_FIELDS = ("pesq_full", "pesq_bb", "pesq_speech_only")


def summarize_records(records: list[dict]) -> dict:
    summary = {"n_utterances": len(records)}
    for key in _METRIC_FIELDS:
        values = [r[key]["db"] for r in records if r.get(key) is not None]
        if values:
            summary[f"{key}_mean"] = sum(values) / len(values)
            summary[f"{key}_capped"] = sum(
                1 for r in records if r.get(key) is not None and r[key]["capped"]
            )
    for key in _PESQ_FIELDS:
        values = [r[key] for r in records if isinstance(r.get(key), float)]
        if values:
            summary[f"{key}_mean"] = sum(values) / len(values)
    return summary


def cmd_eval(args) -> int:
    kcfg = build_kalman_config(args)
    fcfg = build_frame_config(args)
    mode = OutputMode.parse(args.mode) if args.mode else OutputMode.MASK
    if args.net_out and not args.mode:
        raise UsageError("--mode is required when --net-out is given")
    ids = dataset_ids(args.dataset)
    worker = partial(
        _eval_one,
        dataset=Path(args.dataset),
        aec_dir=Path(args.aec) if args.aec else None,
        net_dir=Path(args.net_out) if args.net_out else None,
        mode=mode,
        kcfg=kcfg,
        fcfg=fcfg,
        mic_component=args.mic_component,
        pesq_tool=args.pesq_tool,
    )
    results = _map_jobs(worker, ids, args.workers)
    records = [r[2] for r in results if r[2] is not None]
    failures = [{"id": r[0], "error": r[1]} for r in results if r[1] is not None]
    report = {
        "condition": args.mic_component,
        "mode": mode.value if (args.net_out or args.mode) else None,
        "postfilter": "net" if args.net_out else "identity",
        "utterances": records,
        "failures": failures,
        "summary": summarize_records(records),
    }
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(f"eval: {len(records)} utterances, {len(failures)} failed -> {args.out}")
    else:
        sys.stdout.write(text)
    return _report_failures("eval", [(r[0], r[1]) for r in results])


# ------------------------------------------------------------------ ablate


def cmd_ablate(args) -> int:
    sets = [parse_input_set(part) for part in args.input_sets.split(";") if part.strip()]
    if not sets:
        raise UsageError("no input sets given; use e.g. --input-sets 'E;Y,E;Y,Dhat,E'")
    mode = OutputMode.parse(args.mode)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    aec_dir = Path(args.aec) if args.aec else out_dir / "aec"
    if args.aec is None:
        rc = cmd_aec(_namespace(args, dataset=args.dataset, out=str(aec_dir), mic_component="y"))
        if rc not in (0, 3):
            return rc

    rows = []
    for input_set in sets:
        set_name = "+".join(input_set)
        set_dir = out_dir / set_name
        rc = cmd_export_features(
            _namespace(
                args,
                dataset=args.dataset,
                aec=str(aec_dir),
                out=str(set_dir / "features"),
                inputs=",".join(input_set),
                include_target=False,
            )
        )
        if rc not in (0, 3):
            return rc
        net_dir = None
        oracle = args.oracle
        if args.net_out_template:
            net_dir = args.net_out_template.format(inputs=set_name)
            oracle = None
        rc = cmd_enhance(
            _namespace(
                args,
                dataset=args.dataset,
                aec=str(aec_dir),
                out=str(set_dir / "enhanced"),
                net_out=net_dir,
                oracle=oracle,
                mode=mode.value,
            )
        )
        if rc not in (0, 3):
            return rc
        report_path = set_dir / "report.json"
        rc = cmd_eval(
            _namespace(
                args,
                dataset=args.dataset,
                aec=str(aec_dir),
                net_out=str(set_dir / "enhanced") if oracle else net_dir,
                mode=mode.value,
                out=str(report_path),
                mic_component="full",
            )
        )
        if rc not in (0, 3):
            return rc
        summary = json.loads(report_path.read_text())["summary"]
        rows.append({"inputs": list(input_set), "summary": summary})

    result = {"mode": mode.value, "rows": rows}
    (out_dir / "ablation.json").write_text(json.dumps(result, sort_keys=True, indent=1) + "\n")
    _print_ablation_table(rows)
    return 0


def _print_ablation_table(rows):
    header = f"{'inputs':<16} {'ERLE_BB':>8} {'dSNR_BB':>8} {'PESQ':>6} {'n':>4}"
    print(header)
    print("-" * len(header))

    def fmt(value, width, digits=2):
        return f"{value:>{width}.{digits}f}" if isinstance(value, float) else f"{'--':>{width}}"

    for row in rows:
        s = row["summary"]
        print(
            f"{'+'.join(row['inputs']):<16} "
            f"{fmt(s.get('erle_bb_mean'), 8)} "
            f"{fmt(s.get('dsnr_bb_mean'), 8)} "
            f"{fmt(s.get('pesq_full_mean'), 6)} "
            f"{s.get('n_utterances', 0):>4}"
        )


def _namespace(args, **overrides):
    values = vars(args).copy()
    values.update(overrides)
    for key in ("net_out", "oracle", "aec", "dataset", "mode", "out", "inputs",
                "include_target", "mic_component", "pesq_tool", "trace_spxc"):
        values.setdefault(key, None)
    return argparse.Namespace(**values)


# -------------------------------------------------------------------- main


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aeclab", description=__doc__)
    parser.add_argument("--workers", type=int, default=1, help="parallel utterances")
    parser.add_argument("--config", help="JSON file with kalman/frame overrides")
    parser.add_argument("--seed", type=int, default=None, help="base seed for manifest entries without one")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render mixtures from a JSON-lines manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--base-dir", default=None, help="base for relative source paths")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("aec", help="run the Kalman echo canceller over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mic-component", default="y", choices=("y", "d", "n", "s"),
                   help="which stored signal plays the microphone role")
    p.add_argument("--trace-spxc", action="store_true",
                   help="also write filter traces in the exchange format (float32)")
    _add_kalman_flags(p)
    p.set_defaults(func=cmd_aec)

    p = sub.add_parser("export-features", help="write spectral exchange files")
    p.add_argument("--dataset", required=True)
    p.add_argument("--aec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--inputs", default="E", help="comma-separated subset of Y,X,Dhat,E (must contain E)")
    p.add_argument("--include-target", action="store_true",
                   help="also write the clean speech spectra as training targets")
    _add_kalman_flags(p)
    p.set_defaults(func=cmd_export_features)

    p = sub.add_parser("enhance", help="apply second-stage outputs to the canceller signal")
    p.add_argument("--aec", required=True)
    p.add_argument("--dataset", default=None, help="needed for the wiener oracle")
    p.add_argument("--net-out", default=None, help="directory with <id>.net.spxc files")
    p.add_argument("--oracle", default=None, choices=ORACLE_KINDS)
    p.add_argument("--mode", required=True, help="OutE or OutM")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="metric report with black-box component separation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--aec", default=None, help="omit for a pass-through (zero filter) baseline")
    p.add_argument("--net-out", default=None, help="directory with <id>.net.spxc files")
    p.add_argument("--mode", default=None, help="OutE or OutM (required with --net-out)")
    p.add_argument("--mic-component", default="full", choices=("full", "d", "n", "s"))
    p.add_argument("--pesq-tool", default=None)
    p.add_argument("--out", default=None, help="report JSON path (stdout if omitted)")
    _add_kalman_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the input-combination grid")
    p.add_argument("--dataset", required=True)
    p.add_argument("--aec", default=None, help="reuse an existing canceller run")
    p.add_argument("--input-sets", required=True,
                   help="semicolon-separated sets, e.g. 'E;Y,E;Y,Dhat,E'")
    p.add_argument("--mode", required=True)
    p.add_argument("--oracle", default="wiener", choices=ORACLE_KINDS)
    p.add_argument("--net-out-template", default=None,
                   help="per-set net output dir, '{inputs}' expands to the set name")
    p.add_argument("--pesq-tool", default=None)
    p.add_argument("--out", required=True)
    _add_kalman_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DataError, AeclabError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
