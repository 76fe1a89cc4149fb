import numpy as np
import pytest

from patvcm.aux_visual import (
    TASK_DET,
    TASK_SEG,
    AuxVisualStream,
    aux_bits,
    chain,
    compand,
    decode_aux,
    encode_aux,
    expand,
    stream_from_payload,
    stream_to_payload,
    _roi_mask,
)
from patvcm.baseline import PROFILES, decode_clip, encode_clip
from patvcm.errors import StructuralError
from patvcm.roi import Box, RoiSet, roi_cells, select_stage1, select_stage2

DEFAULT = PROFILES["default"]


def recon_of(clip):
    return decode_clip(encode_clip(clip, DEFAULT), DEFAULT, clip.shape[0])


def single_roi(frames=1, box=Box(8, 8, 24, 24, 0.2)):
    return RoiSet(1, tuple((box,) for _ in range(frames)))


def test_companding_inverse():
    m = np.linspace(-255, 255, 201)
    assert np.allclose(expand(compand(m)), m, atol=1e-9)


def test_zero_residual_floor(scene_cache):
    clip, _ = scene_cache(2)
    recon = recon_of(clip)
    rois = single_roi(frames=clip.shape[0])
    stream = encode_aux(recon.astype(np.uint8), recon, rois, DEFAULT, TASK_DET)
    refined = decode_aux(stream, recon, rois, DEFAULT)
    delta = np.abs(refined - recon)
    assert delta.max() <= 255.0 / 8 + 1e-9  # no-zero-center floor bound


def test_bits_arithmetic(scene_cache):
    clip, _ = scene_cache(2)
    recon = recon_of(clip)
    rois = single_roi(frames=clip.shape[0])
    stream = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
    n = len(roi_cells(rois, (3, 12, 12), DEFAULT))
    assert stream.cell_count == n
    assert aux_bits(stream) == 12 * n
    empty = AuxVisualStream(1, TASK_DET, np.zeros((0, 4), dtype=np.int64))
    assert aux_bits(empty) == 0


def test_ten_cells_is_120_bits():
    codes = np.zeros((10, 4), dtype=np.int64)
    assert aux_bits(AuxVisualStream(2, TASK_SEG, codes)) == 120


def test_saturated_residual_hits_top_code():
    # +255 residual in one channel within the ROI
    orig = np.zeros((1, 8, 8, 3), dtype=np.uint8)
    orig[..., 0] = 255
    recon = np.zeros((1, 8, 8, 3), dtype=np.float64)
    rois = RoiSet(1, ((Box(0, 0, 8, 8, 0.2),),))
    stream = encode_aux(orig, recon, rois, DEFAULT, TASK_DET)
    assert stream.codes[0, 0] == 7  # center 0.875 on the red dim


def test_payload_roundtrip(scene_cache):
    clip, _ = scene_cache(4)
    recon = recon_of(clip)
    rois = single_roi(frames=clip.shape[0])
    stream = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
    payload, bits = stream_to_payload(stream)
    assert bits == aux_bits(stream)
    back = stream_from_payload(payload, bits, stream.stage, stream.task_id)
    assert np.array_equal(back.codes, stream.codes)


def test_bad_payload_bit_count():
    with pytest.raises(StructuralError):
        stream_from_payload(b"\x00", 7, 1, TASK_DET)


def test_empty_stream_is_identity(scene_cache):
    clip, _ = scene_cache(4)
    recon = recon_of(clip)
    rois = RoiSet(1, tuple(() for _ in range(clip.shape[0])))
    stream = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
    refined = decode_aux(stream, recon, rois, DEFAULT)
    assert np.array_equal(refined, recon)


def test_locality(scene_cache):
    clip, _ = scene_cache(4)
    recon = recon_of(clip)
    rois = single_roi(frames=clip.shape[0])
    stream = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
    refined = decode_aux(stream, recon, rois, DEFAULT)
    outside = ~_roi_mask(rois, *clip.shape[:3])
    assert np.array_equal(refined[outside], recon[outside])


def test_cell_count_mismatch_is_structural(scene_cache):
    clip, _ = scene_cache(4)
    recon = recon_of(clip)
    rois = single_roi(frames=clip.shape[0])
    stream = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
    other = RoiSet(1, tuple((Box(0, 0, 48, 48, 0.2),) for _ in range(clip.shape[0])))
    with pytest.raises(StructuralError, match="stage-1"):
        decode_aux(stream, recon, other, DEFAULT)


def test_error_reduction_on_seeded_corpus(scene_cache, models):
    improved = []
    for seed in range(8):
        clip, _gt = scene_cache(seed)
        recon = recon_of(clip)
        dets = [models.detect(recon[t]) for t in range(clip.shape[0])]
        rois = select_stage1(dets, clip.shape[1], clip.shape[2])
        if rois.box_count == 0:
            continue
        stream = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
        refined = decode_aux(stream, recon, rois, DEFAULT)
        mask = _roi_mask(rois, *clip.shape[:3])
        before = np.abs(clip.astype(np.float64) - recon)[mask].mean()
        after = np.abs(clip.astype(np.float64) - refined)[mask].mean()
        improved.append(after <= before)
    assert improved and np.mean(improved) >= 0.9


def test_encode_idempotent_given_fixed_inputs(scene_cache):
    clip, _ = scene_cache(4)
    recon = recon_of(clip)
    rois = single_roi(frames=clip.shape[0])
    a = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
    b = encode_aux(clip, recon, rois, DEFAULT, TASK_DET)
    assert np.array_equal(a.codes, b.codes)


def test_chain_single_stream_equals_decode(scene_cache, models):
    clip, _ = scene_cache(0)
    recon = recon_of(clip)
    frames, height, width = clip.shape[:3]
    dets = [models.detect(recon[t]) for t in range(frames)]
    rois1 = select_stage1(dets, height, width)
    stream = encode_aux(clip, recon, rois1, DEFAULT, TASK_DET)
    direct = decode_aux(stream, recon, rois1, DEFAULT)
    chained, c_rois1, _c_rois2 = chain([stream], recon, models.detect, DEFAULT)
    assert np.array_equal(chained, direct)
    assert c_rois1.canonical_bytes() == rois1.canonical_bytes()


def test_chain_determinism_and_stage2_agreement(scene_cache, models):
    clip, _ = scene_cache(0)
    recon = recon_of(clip)
    frames, height, width = clip.shape[:3]
    dets = [models.detect(recon[t]) for t in range(frames)]
    rois1 = select_stage1(dets, height, width)
    det_stream = encode_aux(clip, recon, rois1, DEFAULT, TASK_DET)
    refined1 = decode_aux(det_stream, recon, rois1, DEFAULT)
    dets2 = [models.detect(refined1[t]) for t in range(frames)]
    rois2 = select_stage2(dets2, height, width)
    seg_stream = encode_aux(clip, refined1, rois2, DEFAULT, TASK_SEG)

    out1, _r1, c_rois2 = chain([det_stream, seg_stream], recon, models.detect, DEFAULT)
    out2, _r1b, _c2b = chain([det_stream, seg_stream], recon, models.detect, DEFAULT)
    assert np.array_equal(out1, out2)
    assert c_rois2.canonical_bytes() == rois2.canonical_bytes()


def test_chain_requires_stage1_first(scene_cache, models):
    clip, _ = scene_cache(0)
    recon = recon_of(clip)
    stream = AuxVisualStream(2, TASK_SEG, np.zeros((0, 4), dtype=np.int64))
    with pytest.raises(StructuralError):
        chain([stream], recon, models.detect, DEFAULT)
