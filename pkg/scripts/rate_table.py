#!/usr/bin/env python3
"""Print the bit-accounting table for a 9-frame 512x512 clip across the
shipped stream combinations (rates are exact counts from serialized
bitstreams, not configuration arithmetic)."""

import argparse

from patvcm.container import format_bpp
from patvcm.pipeline import PipelineConfig, pipeline_encode
from patvcm.scenes import SceneParams, generate_scene
from patvcm.taskmodels import ToyTaskModels

VARIANTS = [
    ("baseline", PipelineConfig()),
    ("+ det", PipelineConfig(det=True)),
    ("+ det + seg", PipelineConfig(det=True, seg=True)),
    ("+ det + depth", PipelineConfig(det=True, depth=True)),
    ("+ det + 1-pt", PipelineConfig(det=True, prompt="1pt")),
    ("+ det + fg+bg", PipelineConfig(det=True, prompt="fgbg")),
    ("+ det + class", PipelineConfig(det=True, class_token=True)),
    ("+ det + skeleton", PipelineConfig(det=True, skeleton=True)),
    ("+ det + adaptive text", PipelineConfig(det=True, seg=True, text="adaptive")),
]


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--size", type=int, default=512)
    args = parser.parse_args()

    params = SceneParams(height=args.size, width=args.size, max_size=72)
    clip, gt = generate_scene(args.seed, params)
    models = ToyTaskModels()
    frames, height, width = clip.shape[:3]
    print(f"clip: {frames} frames {width}x{height} (seed {args.seed})")
    print(f"{'variant':24s} {'extra':>10s} {'total':>10s} {'bpp':>10s}")
    base_bits = None
    for label, config in VARIANTS:
        enc = pipeline_encode(clip, config, models, gt)
        total = enc.bitstream.total_bits()
        if base_bits is None:
            base_bits = total
        print(f"{label:24s} {total - base_bits:>10,d} {total:>10,d} "
              f"{format_bpp(enc.bitstream.bpp()):>10s}")


if __name__ == "__main__":
    main()
