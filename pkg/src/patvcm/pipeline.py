"""End-to-end encode/decode pipelines, evaluation campaigns, rate sweeps.

The encoder mirrors the decoder: it decodes its own baseline tokens and
runs the detector on those reconstructed bytes, so both sides derive
byte-identical ROI sets without transmitting coordinates.  The decoder
operates on serialized bytes and task models only; it never sees original
pixels.  Reported rates always come from serialized bit counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from patvcm.aux_visual import (
    AuxVisualStream,
    TASK_DEPTH,
    TASK_DET,
    TASK_SEG,
    chain,
    decode_aux,
    encode_aux,
    stream_from_payload,
    stream_to_payload,
)
from patvcm.baseline import (
    CodecProfile,
    PROFILES,
    baseline_bits,
    decode_clip,
    encode_clip,
    latent_from_payload,
    latent_shape,
    latent_to_payload,
    profile_by_id,
)
from patvcm.container import (
    AuxStreamRecord,
    Bitstream,
    ClipHeader,
    StreamType,
    demux,
    mux,
)
from patvcm.errors import ConfigError, StructuralError
from patvcm.metrics import (
    absrel,
    align_scale_shift,
    delta_threshold,
    difficulty_bin,
    mask_iou,
    match_detections,
    mke,
    normal_mae_deg,
    normals_from_depth,
    psnr,
    rmse,
    size_bin,
)
from patvcm.prompts import (
    PromptSelection,
    PromptToken,
    parse_prompt_payload,
    point_of,
    prompt_payload,
    select_bg,
    select_fg,
)
from patvcm.roi import Box, RoiSet, select_stage1, select_stage2
from patvcm.scenes import GroundTruth
from patvcm.semantic import (
    AdaptivePolicy,
    ClassToken,
    SkeletonToken,
    TextToken,
    class_payload,
    dequantize_skeleton,
    encode_text,
    parse_class_payload,
    parse_skeleton_payload,
    parse_text_payload,
    policy_decide,
    quantize_skeleton,
    skeleton_payload,
    text_payload,
)
from patvcm.taskmodels import TaskModels, caption_rerank

log = logging.getLogger(__name__)

PROMPT_MODES = ("none", "1pt", "fgbg")
TEXT_MODES = ("off", "none", "uniform", "adaptive")


@dataclass(frozen=True)
class PipelineConfig:
    profile: str = "default"
    det: bool = False
    seg: bool = False
    depth: bool = False
    prompt: str = "none"
    text: str = "off"
    class_token: bool = False
    skeleton: bool = False
    label: str = ""

    def validate(self) -> None:
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.prompt not in PROMPT_MODES:
            raise ConfigError(f"prompt mode must be one of {PROMPT_MODES}")
        if self.text not in TEXT_MODES:
            raise ConfigError(f"text policy must be one of {TEXT_MODES}")
        stage2 = (
            self.seg
            or self.depth
            or self.prompt != "none"
            or self.text != "off"
            or self.class_token
            or self.skeleton
        )
        if stage2 and not self.det:
            raise ConfigError("stage-2 streams require the det stream")

    def describe(self) -> str:
        if self.label:
            return self.label
        parts = ["baseline"]
        if self.det:
            parts.append("det")
        if self.seg:
            parts.append("seg")
        if self.depth:
            parts.append("depth")
        if self.prompt != "none":
            parts.append(self.prompt)
        if self.text != "off":
            parts.append(f"text-{self.text}")
        if self.class_token:
            parts.append("class")
        if self.skeleton:
            parts.append("skeleton")
        return "+".join(parts)


_BOOL_VALUES = {"on": True, "true": True, "1": True, "off": False, "false": False, "0": False}


def _parse_kv_lines(text: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            pairs.append(("[section]", line[1:-1].strip()))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_pipeline_config(text: str, label: str = "") -> PipelineConfig:
    cfg = PipelineConfig(label=label)
    for key, value in _parse_kv_lines(text):
        cfg = _apply_config_key(cfg, key, value)
    cfg.validate()
    return cfg


def _apply_config_key(cfg: PipelineConfig, key: str, value: str) -> PipelineConfig:
    if key == "[section]":
        raise ConfigError("sections are only valid in multi-config files")
    if key == "profile":
        return replace(cfg, profile=value)
    if key == "label":
        return replace(cfg, label=value)
    if key in ("det", "seg", "depth", "skeleton"):
        if value.lower() not in _BOOL_VALUES:
            raise ConfigError(f"{key}: expected on/off, got {value!r}")
        return replace(cfg, **{key: _BOOL_VALUES[value.lower()]})
    if key == "class":
        if value.lower() not in _BOOL_VALUES:
            raise ConfigError(f"class: expected on/off, got {value!r}")
        return replace(cfg, class_token=_BOOL_VALUES[value.lower()])
    if key == "prompt":
        return replace(cfg, prompt=value)
    if key == "text":
        return replace(cfg, text=value)
    raise ConfigError(f"unknown config key {key!r}")


def parse_configs_file(text: str) -> list[PipelineConfig]:
    """Multi-config file: [label] sections of key = value lines."""
    configs: list[PipelineConfig] = []
    current: PipelineConfig | None = None
    for key, value in _parse_kv_lines(text):
        if key == "[section]":
            if current is not None:
                current.validate()
                configs.append(current)
            current = PipelineConfig(label=value)
        elif current is None:
            raise ConfigError("configs file must start with a [label] section")
        else:
            current = _apply_config_key(current, key, value)
    if current is not None:
        current.validate()
        configs.append(current)
    if not configs:
        raise ConfigError("configs file defines no configurations")
    return configs


# --------------------------------------------------------------------------
# encode
# --------------------------------------------------------------------------


@dataclass
class EncodeResult:
    data: bytes
    bitstream: Bitstream
    profile: CodecProfile
    recon0: np.ndarray
    refined: np.ndarray
    rois1: RoiSet | None
    rois2: RoiSet | None
    prompt_selections: list[PromptSelection] = field(default_factory=list)
    text_tokens: list[TextToken] = field(default_factory=list)
    text_estimates: list[float] = field(default_factory=list)
    class_tokens: list[ClassToken] = field(default_factory=list)
    skeleton_tokens: list[SkeletonToken] = field(default_factory=list)


def _gt_oracle(gt: GroundTruth, frame_index: int) -> Callable[[np.ndarray, Box], np.ndarray]:
    """Ground-truth mask oracle: best-overlapping instance mask for a box."""

    def oracle(_frame: np.ndarray, box: Box) -> np.ndarray:
        best_k, best_iou = None, 0.0
        for k in range(gt.shape_count):
            gt_box = Box(*gt.boxes[frame_index][k])
            iou = gt_box.iou(box)
            if iou > best_iou:
                best_k, best_iou = k, iou
        if best_k is None:
            return np.zeros((gt.height, gt.width), dtype=bool)
        return gt.masks[frame_index][best_k]

    return oracle


def _matched_caption(gt: GroundTruth, frame_index: int, box: Box) -> str | None:
    best_k, best_iou = None, 0.0
    for k in range(gt.shape_count):
        iou = Box(*gt.boxes[frame_index][k]).iou(box)
        if iou > best_iou:
            best_k, best_iou = k, iou
    return gt.captions[best_k] if best_k is not None else None


def pipeline_encode(
    clip: np.ndarray,
    config: PipelineConfig,
    models: TaskModels,
    gt: GroundTruth | None = None,
) -> EncodeResult:
    """Full deterministic encoder: baseline + enabled auxiliary streams."""
    config.validate()
    needs_gt = config.prompt != "none" or config.text != "off"
    if needs_gt and gt is None:
        raise ConfigError("prompt/text streams need ground-truth sidecars at encode time")
    profile = PROFILES[config.profile]
    frames, height, width = clip.shape[:3]
    latent = encode_clip(clip, profile)
    recon0 = decode_clip(latent, profile, frames)
    records: list[AuxStreamRecord] = []
    refined = recon0
    rois1 = rois2 = None
    prompt_selections: list[PromptSelection] = []
    text_tokens: list[TextToken] = []
    text_estimates: list[float] = []
    class_tokens: list[ClassToken] = []
    skeleton_tokens: list[SkeletonToken] = []

    if config.det:
        dets = [models.detect(recon0[t]) for t in range(frames)]
        rois1 = select_stage1(dets, height, width)
        det_stream = encode_aux(clip, recon0, rois1, profile, TASK_DET)
        payload, bits = stream_to_payload(det_stream)
        records.append(AuxStreamRecord(StreamType.VISUAL_RESIDUAL, TASK_DET, bits, payload))
        refined = decode_aux(det_stream, recon0, rois1, profile)
        dets2 = [models.detect(refined[t]) for t in range(frames)]
        rois2 = select_stage2(dets2, height, width)
        for enabled, task_id in ((config.seg, TASK_SEG), (config.depth, TASK_DEPTH)):
            if not enabled:
                continue
            stream = encode_aux(clip, refined, rois2, profile, task_id)
            payload, bits = stream_to_payload(stream)
            records.append(
                AuxStreamRecord(StreamType.VISUAL_RESIDUAL, task_id, bits, payload)
            )
            refined = decode_aux(stream, refined, rois2, profile)

        flat = rois2.flat()
        if config.prompt != "none":
            for t, box in flat:
                oracle = _gt_oracle(gt, t)
                sel = select_fg(clip[t], refined[t], box, oracle, models.segment)
                if config.prompt == "fgbg":
                    sel = select_bg(clip[t], refined[t], box, oracle, models.segment, sel.token)
                prompt_selections.append(sel)
            payload, bits = prompt_payload([s.token for s in prompt_selections])
            records.append(AuxStreamRecord(StreamType.PROMPT, 0, bits, payload))

        if config.text != "off":
            policy = AdaptivePolicy(config.text)
            for n, (t, box) in enumerate(flat):
                oracle = _gt_oracle(gt, t)
                target = oracle(clip[t], box)
                positive, negative = [], []
                if prompt_selections:
                    tok = prompt_selections[n].token
                    positive = [point_of(tok.index, box)]
                    if tok.bg_index is not None:
                        negative = [point_of(tok.bg_index, box)]
                pred = models.segment(refined[t], box, positive, negative)
                estimate = mask_iou(pred, target) if target.any() else 0.0
                text_estimates.append(estimate)
                if policy_decide(estimate, policy):
                    text_tokens.append(encode_text(_matched_caption(gt, t, box) or ""))
                else:
                    text_tokens.append(encode_text(None))
            payload, bits = text_payload(text_tokens)
            records.append(AuxStreamRecord(StreamType.TEXT, 0, bits, payload))

        if config.class_token:
            for t, box in flat:
                class_tokens.append(ClassToken(models.classify(clip[t], box)))
            payload, bits = class_payload(class_tokens)
            records.append(AuxStreamRecord(StreamType.CLASS_LABEL, 0, bits, payload))

        if config.skeleton:
            for t, box in flat:
                kpts = models.pose(clip[t], box)
                skeleton_tokens.append(quantize_skeleton(kpts, box))
            payload, bits = skeleton_payload(skeleton_tokens)
            records.append(AuxStreamRecord(StreamType.SKELETON, 0, bits, payload))

    base_payload = latent_to_payload(latent, profile)
    header = ClipHeader(
        frames=frames,
        height=height,
        width=width,
        profile_id=profile.profile_id,
        stream_count=len(records),
        baseline_bits=baseline_bits(latent, profile),
    )
    data = mux(header, base_payload, records)
    return EncodeResult(
        data=data,
        bitstream=Bitstream(header, base_payload, tuple(records)),
        profile=profile,
        recon0=recon0,
        refined=refined,
        rois1=rois1,
        rois2=rois2,
        prompt_selections=prompt_selections,
        text_tokens=text_tokens,
        text_estimates=text_estimates,
        class_tokens=class_tokens,
        skeleton_tokens=skeleton_tokens,
    )


# --------------------------------------------------------------------------
# decode
# --------------------------------------------------------------------------


@dataclass
class RoiConditioning:
    frame: int
    box: Box
    prompt: PromptToken | None = None
    caption: str | None = None
    class_id: int | None = None
    keypoints: np.ndarray | None = None

    @property
    def positive_points(self) -> list[tuple[int, int]]:
        return [point_of(self.prompt.index, self.box)] if self.prompt else []

    @property
    def negative_points(self) -> list[tuple[int, int]]:
        if self.prompt and self.prompt.bg_index is not None:
            return [point_of(self.prompt.bg_index, self.box)]
        return []


@dataclass
class DecodeResult:
    header: ClipHeader
    profile: CodecProfile
    recon0: np.ndarray
    refined: np.ndarray
    rois1: RoiSet | None
    rois2: RoiSet | None
    conditioning: list[RoiConditioning]
    skipped_records: list[int] = field(default_factory=list)


def pipeline_decode(data: bytes, models: TaskModels) -> DecodeResult:
    """Decode from serialized bytes only: reconstruct, re-derive ROIs,
    apply visual streams in stage order, materialize conditioning."""
    header, base_payload, records = demux(data)
    profile = profile_by_id(header.profile_id)
    dims = latent_shape(header.frames, header.height, header.width, profile)
    latent = latent_from_payload(base_payload, dims, profile)
    recon0 = decode_clip(latent, profile, header.frames)

    streams: list[AuxVisualStream] = []
    other_records: list[tuple[int, AuxStreamRecord]] = []
    for i, rec in enumerate(records):
        if rec.type_tag == StreamType.VISUAL_RESIDUAL:
            stage = 1 if rec.task_id == TASK_DET else 2
            streams.append(stream_from_payload(rec.payload, rec.payload_bits, stage, rec.task_id))
        else:
            other_records.append((i, rec))

    refined, rois1, rois2 = chain(streams, recon0, models.detect, profile)
    conditioning: list[RoiConditioning] = []
    if rois2 is not None:
        conditioning = [RoiConditioning(t, box) for t, box in rois2.flat()]
    skipped: list[int] = []
    for i, rec in enumerate(other_records):
        idx, rec = rec
        if not rec.is_known:
            log.warning("skipping unknown record %d (tag %d)", idx, rec.type_tag)
            skipped.append(idx)
            continue
        if rois2 is None:
            raise StructuralError(
                f"record {idx} ({rec.type_name}) present but no stage-2 ROIs derivable"
            )
        n = len(conditioning)
        if rec.type_tag == StreamType.PROMPT:
            tokens = parse_prompt_payload(rec.payload, rec.payload_bits, n)
            for cond, tok in zip(conditioning, tokens):
                cond.prompt = tok
        elif rec.type_tag == StreamType.TEXT:
            tokens = parse_text_payload(rec.payload, rec.payload_bits, n)
            for cond, tok in zip(conditioning, tokens):
                cond.caption = tok.symbols.rstrip() if tok.present else None
        elif rec.type_tag == StreamType.CLASS_LABEL:
            tokens = parse_class_payload(rec.payload, rec.payload_bits, n)
            for cond, tok in zip(conditioning, tokens):
                cond.class_id = tok.class_id
        elif rec.type_tag == StreamType.SKELETON:
            tokens = parse_skeleton_payload(rec.payload, rec.payload_bits, n)
            for cond, tok in zip(conditioning, tokens):
                cond.keypoints = dequantize_skeleton(tok, cond.box)
    return DecodeResult(
        header=header,
        profile=profile,
        recon0=recon0,
        refined=refined,
        rois1=rois1,
        rois2=rois2,
        conditioning=conditioning,
        skipped_records=skipped,
    )


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    task: str
    system: str
    bpp: float
    metric: str
    value: float


@dataclass
class InstanceEval:
    clip: str
    frame: int
    shape: int
    seg_iou: float
    roi_found: bool
    size: str
    class_ok: bool | None = None
    pose_mke: float | None = None


@dataclass
class ClipEval:
    clip: str
    bpp: float
    matched_iou: float
    recall: float
    absrel_full: float | None
    absrel_roi: float | None
    delta_roi: float | None
    rmse_full: float | None
    mae_roi: float | None
    psnr: float
    text_bits: int
    roi_count: int


@dataclass
class ConfigEval:
    label: str
    config: PipelineConfig
    clips: dict[str, ClipEval] = field(default_factory=dict)
    instances: dict[tuple[str, int, int], InstanceEval] = field(default_factory=dict)

    def clip_values(self, attr: str) -> list[float]:
        vals = [getattr(c, attr) for c in self.clips.values()]
        return [v for v in vals if v is not None]

    def mean_clip(self, attr: str) -> float:
        vals = self.clip_values(attr)
        return float(np.mean(vals)) if vals else float("nan")

    def seg_ious(self) -> dict[tuple[str, int, int], float]:
        return {k: inst.seg_iou for k, inst in self.instances.items()}

    def mean_seg_iou(self) -> float:
        vals = [i.seg_iou for i in self.instances.values()]
        return float(np.mean(vals)) if vals else float("nan")


@dataclass
class EvalReport:
    per_config: dict[str, ConfigEval]
    rows: list[ReportRow]
    skipped_clips: int = 0


def _segment_instance(
    models: TaskModels,
    refined_frame: np.ndarray,
    cond: RoiConditioning,
) -> np.ndarray:
    if cond.caption:
        # Text path: multimask candidates scored against the caption replace
        # the default point-seeded selection entirely.
        candidates = models.segment_candidates(refined_frame, cond.box)
        pick = caption_rerank(refined_frame, cond.box, candidates, cond.caption)
        return candidates[pick]
    return models.segment(
        refined_frame, cond.box, cond.positive_points, cond.negative_points
    )


def _eval_clip(
    name: str,
    clip: np.ndarray,
    gt: GroundTruth,
    config: PipelineConfig,
    models: TaskModels,
    cfg_eval: ConfigEval,
) -> None:
    enc = pipeline_encode(clip, config, models, gt)
    dec = pipeline_decode(enc.data, models)
    frames, height, width = clip.shape[:3]
    refined = dec.refined
    if dec.rois2 is not None:
        eval_rois = dec.rois2
        cond_by_key = {(c.frame, c.box): c for c in dec.conditioning}
    else:
        dets = [models.detect(refined[t]) for t in range(frames)]
        eval_rois = select_stage2(dets, height, width)
        cond_by_key = {}

    text_bits = sum(
        r.payload_bits
        for r in enc.bitstream.aux_records
        if r.type_tag == StreamType.TEXT
    )

    # --- instance metrics (segmentation / classification / pose) ---
    for t in range(frames):
        frame_rois = eval_rois.frames[t]
        for k in range(gt.shape_count):
            gt_mask = gt.masks[t][k]
            if not gt_mask.any():
                continue
            gt_box = Box(*gt.boxes[t][k])
            best_box, best_iou = None, 0.0
            for rbox in frame_rois:
                iou = gt_box.iou(rbox)
                if iou > best_iou:
                    best_box, best_iou = rbox, iou
            inst = InstanceEval(
                clip=name,
                frame=t,
                shape=k,
                seg_iou=0.0,
                roi_found=best_box is not None,
                size=size_bin(gt_box.area, height * width),
            )
            if best_box is not None:
                cond = cond_by_key.get((t, best_box), RoiConditioning(t, best_box))
                pred_mask = _segment_instance(models, refined[t], cond)
                inst.seg_iou = mask_iou(pred_mask, gt_mask)
                pred_class = (
                    cond.class_id
                    if cond.class_id is not None
                    else models.classify(refined[t], best_box)
                )
                inst.class_ok = pred_class == gt.class_ids[k]
                if gt.keypoints[t][k] is not None:
                    pred_kpts = (
                        cond.keypoints
                        if cond.keypoints is not None
                        else models.pose(refined[t], best_box)
                    )
                    inst.pose_mke = mke(pred_kpts, gt.keypoints[t][k])
            cfg_eval.instances[(name, t, k)] = inst

    # --- clip-level detection / depth / reconstruction metrics ---
    matched, recalls = [], []
    absrel_full_v, absrel_roi_v, delta_roi_v, rmse_full_v, mae_roi_v = [], [], [], [], []
    for t in range(frames):
        pseudo_gt = models.detect(clip[t])
        pred = models.detect(refined[t])
        if pseudo_gt:
            result = match_detections(pseudo_gt, pred)
            matched.append(result.matched_iou)
            recalls.append(result.recall_at(0.5))
        depth_pred = models.depth(refined[t])
        depth_gt = gt.depth_maps[t].astype(np.float64)
        aligned = align_scale_shift(depth_pred, depth_gt).apply(depth_pred)
        # ROI-only depth metrics use the instance boxes as the region, fixed
        # across systems so paired comparisons are region-matched.
        roi_mask = np.zeros((height, width), dtype=bool)
        for k in range(gt.shape_count):
            b = Box(*gt.boxes[t][k])
            roi_mask[b.y0 : b.y1, b.x0 : b.x1] = True
        for value, acc in (
            (absrel(aligned, depth_gt), absrel_full_v),
            (absrel(aligned, depth_gt, roi_mask), absrel_roi_v),
            (delta_threshold(aligned, depth_gt, 1.25, roi_mask), delta_roi_v),
            (rmse(aligned, depth_gt), rmse_full_v),
        ):
            if value is not None:
                acc.append(value)
        if roi_mask.any():
            mae_roi_v.append(
                normal_mae_deg(
                    normals_from_depth(aligned), normals_from_depth(depth_gt), roi_mask
                )
            )

    def _mean(vals):
        return float(np.mean(vals)) if vals else None

    cfg_eval.clips[name] = ClipEval(
        clip=name,
        bpp=float(enc.bitstream.bpp()),
        matched_iou=_mean(matched) if matched else 0.0,
        recall=_mean(recalls) if recalls else 0.0,
        absrel_full=_mean(absrel_full_v),
        absrel_roi=_mean(absrel_roi_v),
        delta_roi=_mean(delta_roi_v),
        rmse_full=_mean(rmse_full_v),
        mae_roi=_mean(mae_roi_v),
        psnr=psnr(clip.astype(np.float64), refined),
        text_bits=text_bits,
        roi_count=len(eval_rois.flat()),
    )


def evaluate(
    clips: Sequence[tuple[str, np.ndarray, GroundTruth | None]],
    configs: Sequence[PipelineConfig],
    models: TaskModels,
) -> EvalReport:
    """Run every config over the corpus; the first config is the reference
    used for difficulty binning.  Clips without ground truth are skipped."""
    if not configs:
        raise ConfigError("evaluate needs at least one config")
    report = EvalReport(per_config={}, rows=[])
    usable = []
    for name, clip, gt in clips:
        if gt is None:
            log.warning("skipping clip %s: no ground truth", name)
            report.skipped_clips += 1
            continue
        usable.append((name, clip, gt))
    for config in configs:
        label = config.describe()
        cfg_eval = ConfigEval(label=label, config=config)
        for name, clip, gt in usable:
            _eval_clip(name, clip, gt, config, models, cfg_eval)
        report.per_config[label] = cfg_eval
    _build_rows(report, configs)
    return report


def _build_rows(report: EvalReport, configs: Sequence[PipelineConfig]) -> None:
    if not report.per_config:
        return
    reference = report.per_config[configs[0].describe()]
    seg_bins = {
        key: difficulty_bin(inst.seg_iou, "segmentation")
        for key, inst in reference.instances.items()
    }
    depth_bins = {
        name: difficulty_bin(c.absrel_roi, "depth")
        for name, c in reference.clips.items()
        if c.absrel_roi is not None
    }
    for label, cfg_eval in report.per_config.items():
        bpp = cfg_eval.mean_clip("bpp")

        def add(task: str, metric: str, value: float | None) -> None:
            if value is not None and not np.isnan(value):
                report.rows.append(ReportRow(task, label, bpp, metric, float(value)))

        insts = list(cfg_eval.instances.values())
        add("segmentation", "Mean IoU", cfg_eval.mean_seg_iou())
        for bin_name in ("easy", "medium", "hard"):
            keys = [k for k, b in seg_bins.items() if b == bin_name]
            vals = [cfg_eval.instances[k].seg_iou for k in keys if k in cfg_eval.instances]
            if vals:
                add("segmentation", f"Mean IoU [{bin_name}]", float(np.mean(vals)))
        for bin_name in ("small", "medium", "large"):
            vals = [i.seg_iou for i in insts if i.size == bin_name]
            if vals:
                add("segmentation", f"Mean IoU [size {bin_name}]", float(np.mean(vals)))
        add("detection", "Matched IoU", cfg_eval.mean_clip("matched_iou"))
        add("detection", "Recall@0.5", cfg_eval.mean_clip("recall"))
        add("depth", "AbsRel", cfg_eval.mean_clip("absrel_full"))
        add("depth", "ROI AbsRel", cfg_eval.mean_clip("absrel_roi"))
        add("depth", "ROI δ<1.25", cfg_eval.mean_clip("delta_roi"))
        add("depth", "RMSE", cfg_eval.mean_clip("rmse_full"))
        for bin_name in ("easy", "medium", "hard"):
            names = [n for n, b in depth_bins.items() if b == bin_name]
            vals = [
                cfg_eval.clips[n].absrel_roi
                for n in names
                if n in cfg_eval.clips and cfg_eval.clips[n].absrel_roi is not None
            ]
            if vals:
                add("depth", f"ROI AbsRel [{bin_name}]", float(np.mean(vals)))
        add("normals", "MAE°", cfg_eval.mean_clip("mae_roi"))
        class_vals = [i.class_ok for i in insts if i.class_ok is not None]
        if class_vals:
            add("classification", "Class agreement (%)", 100.0 * float(np.mean(class_vals)))
        pose_vals = [i.pose_mke for i in insts if i.pose_mke is not None]
        if pose_vals:
            add("pose", "MKE (px)", float(np.mean(pose_vals)))
        add("reconstruction", "PSNR", cfg_eval.mean_clip("psnr"))


# --------------------------------------------------------------------------
# rate sweep
# --------------------------------------------------------------------------


def rate_sweep(
    clips: Sequence[tuple[str, np.ndarray]],
    profiles: Sequence[CodecProfile],
) -> tuple[list[ReportRow], dict[str, bool]]:
    """Baseline-only quantization sweep: (bpp, PSNR) per profile plus
    monotone tags (coarser profiles must not increase bpp or PSNR)."""
    if len(profiles) < 2:
        raise ConfigError("rate sweep needs at least 2 profiles")
    rows: list[ReportRow] = []
    bpps, psnrs = [], []
    for profile in profiles:
        clip_bpps, clip_psnrs = [], []
        for _name, clip in clips:
            latent = encode_clip(clip, profile)
            recon = decode_clip(latent, profile, clip.shape[0])
            bits = baseline_bits(latent, profile)
            clip_bpps.append(
                float(Fraction(bits, clip.shape[0] * clip.shape[1] * clip.shape[2]))
            )
            clip_psnrs.append(psnr(clip.astype(np.float64), recon))
        bpps.append(float(np.mean(clip_bpps)))
        psnrs.append(float(np.mean(clip_psnrs)))
        rows.append(ReportRow("sweep", profile.name, bpps[-1], "PSNR", psnrs[-1]))
    monotone = {
        "bpp": all(b1 >= b2 - 1e-12 for b1, b2 in zip(bpps, bpps[1:])),
        "PSNR": all(p1 >= p2 - 1e-12 for p1, p2 in zip(psnrs, psnrs[1:])),
    }
    return rows, monotone


def write_report_csv(rows: Sequence[ReportRow], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Task", "System", "bpp", "Metric", "Value"])
        for row in rows:
            writer.writerow([row.task, row.system, f"{row.bpp:.6f}", row.metric, f"{row.value:.6f}"])
