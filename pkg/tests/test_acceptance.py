"""Acceptance suite: one test per release criterion, each printing a
PASS line with its measured values.  Tolerances are pinned here, not
calibrated elsewhere.  Everything is deterministic given the frozen seeds.
"""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from patvcm.aux_visual import TASK_DET
from patvcm.baseline import PROFILES, encode_clip
from patvcm.container import (
    AuxStreamRecord,
    ClipHeader,
    bits_per_pixel,
    demux,
    format_bpp,
    mux,
)
from patvcm.errors import StructuralError
from patvcm.fsq import FsqSpec, code_of, dequantize, index_of, quantize
from patvcm.metrics import (
    absrel,
    align_scale_shift,
    difficulty_bin,
    mask_iou,
    match_detections,
    mke,
    normals_from_depth,
)
from patvcm.pipeline import PipelineConfig, evaluate, pipeline_decode, pipeline_encode, rate_sweep
from patvcm.prompts import CODEBOOK_SIZE, point_of, select_bg, select_fg
from patvcm.roi import Box, expand_box, select_stage1, select_stage2
from patvcm.scenes import SceneParams, generate_scene
from patvcm.semantic import dequantize_skeleton, quantize_skeleton
from patvcm.taskmodels import ToyTaskModels

MODELS = ToyTaskModels()

# Frozen corpus definitions for the statistical criteria.
E2E_SEEDS = range(50)
E2E_PARAMS = SceneParams()
TEXT_SEEDS = range(100, 130)
TEXT_PARAMS = SceneParams(
    kind_weights=(("rect", 0.25), ("ellipse", 0.25), ("ring", 0.5)),
    min_size=20,
    max_size=34,
    speed_min=0.2,
    speed_max=1.0,
)
SWEEP_SEEDS = range(20)
SWEEP_PARAMS = SceneParams(bg_lum_range=(110, 190), bg_spread=48)


def _ok(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


@pytest.fixture(scope="module")
def e2e_report():
    clips = [(f"clip{s:03d}", *generate_scene(s, E2E_PARAMS)) for s in E2E_SEEDS]
    configs = [
        PipelineConfig(label="baseline"),
        PipelineConfig(label="det", det=True),
        PipelineConfig(label="det+seg", det=True, seg=True),
        PipelineConfig(label="det+seg+fgbg", det=True, seg=True, prompt="fgbg"),
        PipelineConfig(label="det+depth", det=True, depth=True),
    ]
    return evaluate(clips, configs, MODELS)


def test_bit_accounting_vs_reference_table():
    clip, gt = generate_scene(1, SceneParams(height=512, width=512, max_size=72))
    enc = pipeline_encode(clip, PipelineConfig(label="baseline"), MODELS, gt)
    assert enc.bitstream.header.baseline_bits == 196_608
    assert enc.bitstream.total_bits() == 196_608
    bpp = enc.bitstream.bpp()
    assert abs(float(bpp) - 0.083333) <= 5e-6
    assert format_bpp(bpp) == "0.083333"
    for total, expected in ((237_568, 0.100694), (293_068, 0.124218)):
        value = bits_per_pixel(total, 9, 512, 512)
        assert abs(float(value) - expected) <= 5e-6

    small, sgt = generate_scene(2, TEXT_PARAMS)
    for prompt_mode, per_roi in (("1pt", 5), ("fgbg", 10)):
        cfg = PipelineConfig(det=True, prompt=prompt_mode, class_token=True, skeleton=True)
        enc2 = pipeline_encode(small, cfg, MODELS, sgt)
        n = len(enc2.rois2.flat())
        assert n > 0
        rec = {r.type_name: r for r in enc2.bitstream.aux_records}
        content = rec["PROMPT"].payload_bits - n  # minus 1 format bit per ROI
        assert content == per_roi * n
        assert rec["CLASS_LABEL"].payload_bits == 7 * n
        assert rec["SKELETON"].payload_bits == 102 * n
    _ok(
        "bit accounting",
        "196,608 baseline bits -> 0.083333 bpp; 237,568 -> 0.100694; "
        "293,068 -> 0.124218; prompt 5/10, class 7, skeleton 102 bits per ROI",
    )


def test_container_roundtrip_1000():
    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(1000):
        frames = int(rng.integers(1, 32))
        height = int(rng.integers(1, 16)) * 8
        width = int(rng.integers(1, 16)) * 8
        baseline_bits = int(rng.integers(0, 512))
        nbytes = (baseline_bits + 7) // 8
        baseline = rng.integers(0, 256, size=nbytes, dtype=np.uint8).tobytes()
        if nbytes:
            pad = nbytes * 8 - baseline_bits
            baseline = baseline[:-1] + bytes([baseline[-1] & (0xFF << pad) & 0xFF])
        records = []
        for _r in range(int(rng.integers(0, 6))):
            tag = int(rng.integers(1, 200))
            bits = int(rng.integers(0, 300))
            rbytes = (bits + 7) // 8
            payload = rng.integers(0, 256, size=rbytes, dtype=np.uint8).tobytes()
            if rbytes:
                pad = rbytes * 8 - bits
                payload = payload[:-1] + bytes([payload[-1] & (0xFF << pad) & 0xFF])
            records.append(AuxStreamRecord(tag, int(rng.integers(0, 256)), bits, payload))
        header = ClipHeader(frames, height, width, 0, len(records), baseline_bits)
        data = mux(header, baseline, records)
        h2, b2, r2 = demux(data)
        assert (h2, b2, tuple(r2)) == (header, baseline, tuple(records))
        assert mux(h2, b2, r2) == data
        assert all(rec.is_known == (rec.type_tag <= 5) for rec in r2)
        checked += 1
    # nonzero padding is detected
    rec = AuxStreamRecord(1, 0, 5, bytes([0b10110_000]))
    data = mux(ClipHeader(1, 8, 8, 0, 1, 0), b"", [rec])
    with pytest.raises(StructuralError):
        demux(data[:-1] + bytes([data[-1] | 0b1]))
    _ok("container roundtrip", f"{checked} randomized streams byte-identical; "
        "zero-pad verified; unknown tags preserved")


def test_fsq_suite():
    spec = FsqSpec((8, 8, 8, 8))
    idx = np.arange(4096)
    codes = code_of(idx, spec)
    assert np.array_equal(index_of(codes, spec), idx)
    assert np.array_equal(quantize(dequantize(codes, spec), spec), codes)
    assert FsqSpec((8, 8, 8, 5, 5, 5)).codebook_size == 64_000
    rng = np.random.default_rng(5)
    wide = FsqSpec((8, 8, 8, 5, 5, 5))
    samples = rng.uniform(-1, 1, size=(100_000, 6))
    recon = dequantize(quantize(samples, wide), wide)
    bound = 1.0 / np.asarray(wide.levels)
    assert np.all(np.abs(samples - recon) <= bound + 1e-12)
    _ok("fsq", "4,096-code bijection + idempotence; capacity 64,000; "
        "1/L error bound on 100,000 samples")


def test_prompt_search_oracle():
    params = SceneParams(
        kind_weights=(("ring", 0.4), ("ellipse", 0.3), ("lshape", 0.3)),
        min_shapes=1,
        max_shapes=2,
    )
    rois = []
    seed = 0
    while len(rois) < 200:
        clip, gt = generate_scene(seed, params)
        for t in (2, 6):
            for k in range(gt.shape_count):
                box = expand_box(Box(*gt.boxes[t][k]), 2.0, gt.height, gt.width)
                rois.append((clip[t], box, gt.masks[t][k]))
        seed += 1
    rois = rois[:200]

    fg_match = bg_match = 0
    for frame, box, target in rois:
        oracle = lambda _f, _b: target
        sel = select_fg(frame, frame, box, oracle, MODELS.segment)
        best_iou, best_idx = -1.0, None
        for i in range(CODEBOOK_SIZE):
            m = MODELS.segment(frame, box, [point_of(i, box)], [])
            iou = mask_iou(m, target)
            if iou > best_iou:
                best_iou, best_idx = iou, i
        fg_match += sel.token.index == best_idx

        bg = select_bg(frame, frame, box, oracle, MODELS.segment, sel.token)
        fg_point = point_of(sel.token.index, box)
        best_iou, best_bg = -1.0, None
        for i in range(CODEBOOK_SIZE):
            if i == sel.token.index:
                continue
            m = MODELS.segment(frame, box, [fg_point], [point_of(i, box)])
            iou = mask_iou(m, target)
            if iou > best_iou:
                best_iou, best_bg = iou, i
        bg_match += bg.token.bg_index == best_bg
    assert fg_match == 200
    assert bg_match == 200

    # constructed ties resolve to the lowest index
    frame = np.zeros((32, 32, 3), dtype=np.uint8)
    box = Box(4, 4, 24, 24, 0.5)
    target = np.zeros((32, 32), dtype=bool)
    target[8:20, 8:20] = True
    tie_segment = lambda _f, _b, _p, _n: target
    sel = select_fg(frame, frame, box, lambda _f, _b: target, tie_segment)
    assert sel.token.index == 0
    bg = select_bg(frame, frame, box, lambda _f, _b: target, tie_segment, sel.token)
    assert bg.token.bg_index == 1
    _ok("prompt search oracle", "FG and BG argmax equal brute force on 200/200 "
        "seeded ROIs; ties resolve to the lower index")


def test_roi_determinism_50_clips():
    cfg = PipelineConfig(det=True, seg=True)
    agree = 0
    for seed in E2E_SEEDS:
        clip, gt = generate_scene(seed, E2E_PARAMS)
        enc = pipeline_encode(clip, cfg, MODELS, gt)
        dec = pipeline_decode(enc.data, MODELS)
        assert enc.rois1.canonical_bytes() == dec.rois1.canonical_bytes()
        assert enc.rois2.canonical_bytes() == dec.rois2.canonical_bytes()
        agree += 1
    assert agree == 50

    # confidence boundary cases
    dets = [[Box(0, 0, 8, 8, c) for c in (0.049, 0.05, 0.3, 0.499, 0.5)]]
    stage1 = select_stage1(dets, 64, 64)
    assert sorted(b.confidence for b in stage1.frames[0]) == [0.05, 0.3, 0.499]
    stage2 = select_stage2(dets, 64, 64)
    assert sorted(b.confidence for b in stage2.frames[0]) == [0.3, 0.499, 0.5]
    _ok("roi determinism", "stage-1/stage-2 sets byte-identical on 50/50 clips; "
        "0.05 / 0.5 / 0.3 boundaries honored")


def test_metrics_suite():
    rng = np.random.default_rng(11)
    d_star = rng.uniform(0.3, 1.5, size=(24, 24))
    distorted = -1.7 * d_star + 4.2
    aligned = align_scale_shift(distorted, d_star).apply(distorted)
    val = absrel(aligned, d_star)
    assert val <= 1e-9

    ramp = np.tile(np.arange(16, dtype=np.float64), (16, 1))
    normals = normals_from_depth(ramp)
    expected = np.array([-1.0, 0.0, 1.0]) / np.sqrt(2)
    assert np.max(np.abs(normals - expected)) <= 1e-6

    def optimal(gt, pred):
        best = 0.0
        for k in range(min(len(gt), len(pred)) + 1):
            for gsub in itertools.combinations(range(len(gt)), k):
                for psub in itertools.permutations(range(len(pred)), k):
                    best = max(best, sum(gt[g].iou(pred[p]) for g, p in zip(gsub, psub)))
        return best / len(gt)

    diverged = 0
    for _ in range(500):
        gt = [
            Box(int(rng.integers(0, 30)), int(rng.integers(0, 30)),
                int(rng.integers(4, 18)), int(rng.integers(4, 18)), 1.0)
            for _ in range(int(rng.integers(1, 4)))
        ]
        pred = [
            Box(int(rng.integers(0, 30)), int(rng.integers(0, 30)),
                int(rng.integers(4, 18)), int(rng.integers(4, 18)), 1.0)
            for _ in range(int(rng.integers(0, 4)))
        ]
        greedy = match_detections(gt, pred).matched_iou
        opt = optimal(gt, pred)
        assert greedy <= opt + 1e-12
        diverged += abs(greedy - opt) > 1e-12

    assert difficulty_bin(0.30, "segmentation") == "medium"
    assert difficulty_bin(0.75, "segmentation") == "easy"
    assert difficulty_bin(0.299999, "segmentation") == "hard"
    assert difficulty_bin(0.05, "depth") == "medium"
    assert difficulty_bin(0.20, "depth") == "hard"
    assert difficulty_bin(0.049999, "depth") == "easy"
    _ok("metrics", f"aligned AbsRel <= 1e-9; planar normals within 1e-6; "
        f"greedy-vs-optimal divergence {diverged}/500; bin boundaries exact")


def test_skeleton_token_bounds():
    rng = np.random.default_rng(21)
    worst_ratio = 0.0
    for _ in range(1000):
        w = int(rng.integers(1, 180))
        h = int(rng.integers(1, 180))
        box = Box(int(rng.integers(0, 40)), int(rng.integers(0, 40)), w, h, 0.5)
        kpts = rng.uniform((box.x0, box.y0), (box.x0 + w, box.y0 + h), size=(17, 2))
        token = quantize_skeleton(kpts, box)
        assert token.bits == 102
        back = dequantize_skeleton(token, box)
        err = mke(back, kpts)
        bound = (np.sqrt(2) / 16) * max(w, h)
        assert err <= bound + 1e-9
        worst_ratio = max(worst_ratio, err / bound)
    _ok("skeleton token", f"102 bits each; MKE bound held on 1000/1000 "
        f"(worst err/bound {worst_ratio:.3f})")


def test_adaptive_policy_arithmetic():
    solids = SceneParams(kind_weights=(("rect", 0.5), ("ellipse", 0.5)),
                         min_shapes=1, max_shapes=1, min_size=28, max_size=38,
                         speed_min=0.2, speed_max=0.6, contrast_min=120.0)
    cfg = PipelineConfig(det=True, seg=True, text="adaptive")

    def run_corpus(params, seeds):
        total_rois = transmitted = text_bits = 0
        for seed in seeds:
            clip, gt = generate_scene(seed, params)
            enc = pipeline_encode(clip, cfg, MODELS, gt)
            rec = {r.type_name: r for r in enc.bitstream.aux_records}
            n = len(enc.rois2.flat())
            total_rois += n
            transmitted += sum(t.present for t in enc.text_tokens)
            text_bits += rec["TEXT"].payload_bits
            for est, tok in zip(enc.text_estimates, enc.text_tokens):
                assert tok.present == (est < 0.30)
        return total_rois, transmitted, text_bits

    n0, h0, bits0 = run_corpus(solids, range(400, 408))
    assert n0 > 0 and h0 == 0
    assert Fraction(bits0, n0) == 1  # p = 0 -> exactly 1 bit per ROI

    n1, h1, bits1 = run_corpus(TEXT_PARAMS, range(100, 112))
    assert h1 > 0
    p = Fraction(h1, n1)
    assert Fraction(bits1, n1) == 1 + 152 * p
    _ok("adaptive policy arithmetic",
        f"avg bits/ROI exactly 1 + 152p (p=0 corpus: 1; mixed corpus p={float(p):.3f}); "
        "transmit iff estimate < 0.30")


def test_e2e_directional_properties(e2e_report):
    report = e2e_report

    def per_clip_iou(label):
        per: dict[str, list[float]] = {}
        for (c, _t, _k), inst in report.per_config[label].instances.items():
            per.setdefault(c, []).append(inst.seg_iou)
        return {c: float(np.mean(v)) for c, v in per.items()}

    base = per_clip_iou("baseline")
    seg = per_clip_iou("det+seg")
    fgbg = per_clip_iou("det+seg+fgbg")
    names = sorted(base)
    assert len(names) == 50
    d1 = [seg[c] - base[c] for c in names]
    d2 = [fgbg[c] - seg[c] for c in names]
    p1 = stats.wilcoxon(d1, alternative="greater").pvalue
    p2 = stats.wilcoxon(d2, alternative="greater").pvalue
    m_base = float(np.mean(list(base.values())))
    m_seg = float(np.mean(list(seg.values())))
    m_fgbg = float(np.mean(list(fgbg.values())))
    assert m_base < m_seg < m_fgbg
    assert p1 < 0.01 and p2 < 0.01

    b = report.per_config["baseline"]
    d = report.per_config["det"]
    dd = report.per_config["det+depth"]
    assert dd.mean_clip("absrel_roi") < b.mean_clip("absrel_roi")
    assert d.mean_clip("matched_iou") > b.mean_clip("matched_iou")
    assert d.mean_clip("recall") > b.mean_clip("recall")

    text_clips = [(f"clip{s}", *generate_scene(s, TEXT_PARAMS)) for s in TEXT_SEEDS]
    text_report = evaluate(
        text_clips,
        [
            PipelineConfig(label="no-text", det=True, seg=True),
            PipelineConfig(label="uniform", det=True, seg=True, text="uniform"),
            PipelineConfig(label="adaptive", det=True, seg=True, text="adaptive"),
        ],
        MODELS,
    )
    no_text = text_report.per_config["no-text"].mean_seg_iou()
    uniform = text_report.per_config["uniform"].mean_seg_iou()
    adaptive = text_report.per_config["adaptive"].mean_seg_iou()
    assert adaptive >= no_text
    assert adaptive >= uniform
    _ok(
        "e2e directional",
        f"seg IoU {m_base:.4f} < {m_seg:.4f} < {m_fgbg:.4f} "
        f"(p={p1:.1e}, {p2:.1e}); ROI AbsRel {b.mean_clip('absrel_roi'):.4f} -> "
        f"{dd.mean_clip('absrel_roi'):.4f}; matched IoU "
        f"{b.mean_clip('matched_iou'):.4f} -> {d.mean_clip('matched_iou'):.4f}; "
        f"recall {b.mean_clip('recall'):.4f} -> {d.mean_clip('recall'):.4f}; "
        f"text IoU none/uniform/adaptive = {no_text:.4f}/{uniform:.4f}/{adaptive:.4f}",
    )


def test_rate_sweep_monotone():
    clips = [(f"c{s}", generate_scene(s, SWEEP_PARAMS)[0]) for s in SWEEP_SEEDS]
    profiles = [PROFILES[n] for n in ("default", "medium", "coarse", "tiny")]
    rows, monotone = rate_sweep(clips, profiles)
    assert monotone["bpp"] and monotone["PSNR"]
    bpps = [r.bpp for r in rows]
    psnrs = [r.value for r in rows]
    assert all(a > b for a, b in zip(bpps, bpps[1:]))
    _ok("rate sweep", "bpp " + " > ".join(f"{v:.4f}" for v in bpps)
        + "; PSNR " + " >= ".join(f"{v:.2f}" for v in psnrs))
