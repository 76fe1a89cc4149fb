"""patvcm command line: synth / encode / decode / inspect / eval / sweep.

Exit codes: 0 success, 2 structural error (malformed streams or corpora),
3 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from patvcm.baseline import PROFILES, CodecProfile, profile_by_id
from patvcm.container import bits_per_pixel, demux, format_bpp
from patvcm.corpus import list_clips, read_clip, write_clip, write_ppm
from patvcm.errors import ConfigError, StructuralError
from patvcm.pipeline import (
    parse_configs_file,
    parse_pipeline_config,
    pipeline_decode,
    pipeline_encode,
    rate_sweep,
    evaluate,
    write_report_csv,
)
from patvcm.scenes import SceneParams, generate_scene
from patvcm.taskmodels import ToyTaskModels


def _task_models(args) -> object:
    endpoint = getattr(args, "bridge", None) or os.environ.get("PATVCM_BRIDGE")
    if endpoint:
        try:
            from patvcm_bridge.client import BridgeTaskModels
        except ImportError as exc:
            raise ConfigError(
                "--bridge requires the patvcm-bridge package to be installed"
            ) from exc
        host, _, port = endpoint.rpartition(":")
        return BridgeTaskModels(host or "127.0.0.1", int(port))
    return ToyTaskModels()


def _parse_seed_range(spec: str) -> range:
    if ".." in spec:
        a, _, b = spec.partition("..")
        return range(int(a), int(b) + 1)
    return range(int(spec), int(spec) + 1)


def cmd_synth(args) -> int:
    params = SceneParams(
        frames=args.frames,
        height=args.size,
        width=args.size,
        min_shapes=args.min_shapes,
        max_shapes=args.max_shapes,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in _parse_seed_range(args.seeds):
        clip, gt = generate_scene(seed, params)
        write_clip(out, seed, clip, gt)
    print(f"wrote {len(_parse_seed_range(args.seeds))} clips to {out}")
    return 0


def cmd_encode(args) -> int:
    config = parse_pipeline_config(Path(args.config).read_text())
    if args.profile:
        import dataclasses

        config = dataclasses.replace(config, profile=args.profile)
        config.validate()
    clip = read_clip(Path(args.infile).parent if args.infile.endswith("manifest.txt") else Path(args.infile))
    models = _task_models(args)
    result = pipeline_encode(clip.frames, config, models, clip.gt)
    Path(args.out).write_bytes(result.data)
    print(f"{args.out}: {result.bitstream.total_bits()} bits, "
          f"bpp {format_bpp(result.bitstream.bpp())}")
    return 0


def cmd_decode(args) -> int:
    data = Path(args.infile).read_bytes()
    models = _task_models(args)
    result = pipeline_decode(data, models)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    refined = np.clip(np.floor(result.refined + 0.5), 0, 255).astype(np.uint8)
    for t in range(result.header.frames):
        write_ppm(out / f"refined_f{t:03d}.ppm", refined[t])
    lines = []
    for cond in result.conditioning:
        b = cond.box
        parts = [f"frame {cond.frame}", f"box {b.x0} {b.y0} {b.w} {b.h}"]
        if cond.prompt:
            parts.append(f"fg {cond.positive_points[0]}")
            if cond.negative_points:
                parts.append(f"bg {cond.negative_points[0]}")
        if cond.caption is not None:
            parts.append(f"caption {cond.caption!r}")
        if cond.class_id is not None:
            parts.append(f"class {cond.class_id}")
        if cond.keypoints is not None:
            parts.append("keypoints " + " ".join(f"{v:.1f}" for v in cond.keypoints.reshape(-1)))
        lines.append("; ".join(parts))
    (out / "conditioning.txt").write_text("\n".join(lines) + "\n" if lines else "")
    print(f"decoded {result.header.frames} frames to {out} "
          f"({len(result.conditioning)} conditioned ROIs)")
    return 0


def cmd_inspect(args) -> int:
    data = Path(args.infile).read_bytes()
    header, _baseline, records = demux(data)
    try:
        profile = profile_by_id(header.profile_id)
        profile_name = profile.name
    except ConfigError:
        profile_name = "?"
    total = header.baseline_bits + sum(r.payload_bits for r in records)
    print(f"magic PATV version {header.version}")
    print(f"clip {header.frames} frames, {header.width}x{header.height}, "
          f"profile {header.profile_id} ({profile_name})")
    print(f"baseline {header.baseline_bits} bits")
    for i, rec in enumerate(records):
        print(f"record {i}: {rec.type_name} task {rec.task_id} {rec.payload_bits} bits")
    bpp = bits_per_pixel(total, header.frames, header.height, header.width)
    print(f"total {total} bits, bpp {format_bpp(bpp)} "
          f"(header bytes excluded from rate accounting)")
    return 0


def _load_corpus(corpus_dir: str):
    clips = []
    for clip_dir in list_clips(Path(corpus_dir)):
        clip = read_clip(clip_dir)
        clips.append((clip.name, clip.frames, clip.gt))
    return clips


def cmd_eval(args) -> int:
    configs = parse_configs_file(Path(args.configs).read_text())
    clips = _load_corpus(args.corpus)
    models = _task_models(args)
    report = evaluate(clips, configs, models)
    write_report_csv(report.rows, args.report)
    print(f"wrote {len(report.rows)} rows to {args.report} "
          f"({report.skipped_clips} clips skipped)")
    return 0


def _parse_profiles_file(text: str) -> list[CodecProfile]:
    from patvcm.pipeline import _parse_kv_lines

    profiles: list[CodecProfile] = []
    name = None
    fields: dict[str, str] = {}

    def flush() -> None:
        if name is None:
            return
        if "builtin" in fields:
            profiles.append(PROFILES[fields["builtin"]])
            return
        levels = tuple(int(v) for v in fields["feature_levels"].split(","))
        profiles.append(
            CodecProfile(
                profile_id=int(fields.get("profile_id", len(profiles) + 16)),
                name=name,
                feature_levels=levels,
                token_bits=int(fields["token_bits"]),
            )
        )

    for key, value in _parse_kv_lines(text):
        if key == "[section]":
            flush()
            name, fields = value, {}
        elif name is None:
            if key == "profile":
                profiles.append(PROFILES[value])
            else:
                raise ConfigError("profiles file entries must be [name] sections or profile = <builtin>")
        else:
            fields[key] = value
    flush()
    if not profiles:
        raise ConfigError("profiles file defines no profiles")
    return profiles


def cmd_sweep(args) -> int:
    from patvcm.pipeline import ReportRow

    profiles = _parse_profiles_file(Path(args.profiles).read_text())
    clips = [(name, frames) for name, frames, _gt in _load_corpus(args.corpus)]
    rows, monotone = rate_sweep(clips, profiles)
    # monotone tags ride along as rows so regressions show up in the CSV
    tagged = rows + [
        ReportRow("sweep", "monotone-check", 0.0, f"{metric} monotone", float(ok))
        for metric, ok in monotone.items()
    ]
    write_report_csv(tagged, args.report)
    for metric, ok in monotone.items():
        print(f"{metric} monotone non-increasing: {ok}")
    print(f"wrote {len(tagged)} rows to {args.report}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patvcm")
    parser.add_argument("--bridge", help="task-model bridge endpoint host:port")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--seeds", required=True, help="seed or inclusive range A..B")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--min-shapes", type=int, default=1)
    p.add_argument("--max-shapes", type=int, default=2)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="encode a clip directory to .patv")
    p.add_argument("--in", dest="infile", required=True, help="clip dir or manifest.txt")
    p.add_argument("--config", required=True)
    p.add_argument("--profile", help="override the config file's baseline profile")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a .patv file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("inspect", help="print header, per-record bits, bpp")
    p.add_argument("infile")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("eval", help="run evaluation campaigns over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--configs", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="baseline quantization rate sweep")
    p.add_argument("--corpus", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StructuralError as exc:
        print(f"structural error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
