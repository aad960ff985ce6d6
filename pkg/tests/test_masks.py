import random

import numpy as np
import pytest

from regiongen.errors import FormatError, InvalidArgumentError
from regiongen.masks import (
    AffineTransform,
    GrayImage,
    RasterMask,
    Region,
    RegionSketch,
    apply_transform,
    background_mask,
    compose_anchor,
    downsample_majority,
    extract_regions,
    iou,
    joint_mask,
    mask_difference,
    render_regions,
    resize_mask,
)
from regiongen.palette import PALETTE, LegendEntry, hex_to_rgb

from .reference import (
    int_to_mask,
    mask_to_int,
    ref_downsample,
    ref_difference_int,
    ref_iou_arrays,
    ref_iou_ints,
    ref_union_int,
)


def rand_mask(rng: random.Random, w: int, h: int, density: float = 0.5) -> RasterMask:
    bits = np.array(
        [[rng.random() < density for _ in range(w)] for _ in range(h)], dtype=bool
    )
    return RasterMask(w, h, bits)


class TestRasterMask:
    def test_empty_and_full(self):
        e = RasterMask.empty(4, 3)
        f = RasterMask.full(4, 3)
        assert e.popcount() == 0
        assert e.is_empty()
        assert f.popcount() == 12
        assert not f.is_empty()

    def test_dims_validated(self):
        with pytest.raises(InvalidArgumentError):
            RasterMask(0, 3, np.zeros((3, 0), dtype=bool))
        with pytest.raises(InvalidArgumentError):
            RasterMask(3, 3, np.zeros((2, 3), dtype=bool))

    def test_bits_write_protected(self):
        m = RasterMask.empty(3, 3)
        with pytest.raises(ValueError):
            m.bits[0, 0] = True

    def test_equality_and_hash(self):
        a = RasterMask.from_array(np.eye(3, dtype=bool))
        b = RasterMask.from_array(np.eye(3, dtype=bool))
        c = RasterMask.empty(3, 3)
        assert a == b
        assert hash(a) == hash(b)
        assert a != c

    def test_centroid(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[2, 1] = True
        bits[2, 3] = True
        m = RasterMask.from_array(bits)
        assert m.centroid() == (2.0, 2.0)
        assert RasterMask.empty(5, 5).centroid() is None


class TestAlgebra:
    def test_known_values(self):
        a = RasterMask.from_array(np.array([[1, 1], [0, 0]], dtype=bool))
        b = RasterMask.from_array(np.array([[0, 1], [0, 1]], dtype=bool))
        assert iou(a, b) == pytest.approx(1 / 3)
        assert joint_mask(a, b).popcount() == 3
        assert mask_difference(a, b).popcount() == 1

    def test_empty_union_iou_is_zero(self):
        e = RasterMask.empty(4, 4)
        assert iou(e, e) == 0.0

    def test_dim_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            iou(RasterMask.empty(2, 2), RasterMask.empty(3, 3))
        with pytest.raises(InvalidArgumentError):
            joint_mask(RasterMask.empty(2, 2), RasterMask.empty(3, 2))
        with pytest.raises(InvalidArgumentError):
            mask_difference(RasterMask.empty(2, 2), RasterMask.empty(2, 3))

    def test_exhaustive_3x3_sample_against_int_oracle(self):
        # full 2^9 x 2^9 sweep lives in the acceptance suite; spot-check a
        # random slice here to keep the module run quick
        rng = random.Random(11)
        for _ in range(2000):
            va, vb = rng.randrange(512), rng.randrange(512)
            a = RasterMask.from_array(int_to_mask(va))
            b = RasterMask.from_array(int_to_mask(vb))
            assert mask_to_int(joint_mask(a, b).bits) == ref_union_int(va, vb)
            assert mask_to_int(mask_difference(a, b).bits) == ref_difference_int(va, vb)
            assert iou(a, b) == ref_iou_ints(va, vb)

    def test_random_arrays_against_counting_oracle(self, rng_seed):
        rng = random.Random(rng_seed)
        for _ in range(25):
            a = rand_mask(rng, 17, 13, rng.random())
            b = rand_mask(rng, 17, 13, rng.random())
            assert iou(a, b) == ref_iou_arrays(a.bits, b.bits)


class TestAffineTransform:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            AffineTransform(scale=0.0)
        with pytest.raises(InvalidArgumentError):
            AffineTransform(scale=-1.0)
        with pytest.raises(InvalidArgumentError):
            AffineTransform(scale=16.5)
        assert AffineTransform().is_identity()
        assert not AffineTransform(dx=1).is_identity()

    def test_compose_matches_sequential_mapping(self):
        # verify the algebraic law on the coordinate map itself: applying
        # f1 then f2 equals applying the composed transform
        rng = random.Random(5)
        for _ in range(200):
            t1 = AffineTransform(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(0.3, 3))
            t2 = AffineTransform(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(0.3, 3))
            tc = t1.compose(t2)
            c = 16.0
            for _ in range(5):
                x = rng.uniform(-40, 40)
                y1 = (x - c) * t1.scale + c + t1.dx
                y2 = (y1 - c) * t2.scale + c + t2.dx
                yc = (x - c) * tc.scale + c + tc.dx
                assert y2 == pytest.approx(yc, abs=1e-9)

    def test_identity_returns_input_verbatim(self):
        m = RasterMask.full(8, 8)
        assert apply_transform(m, AffineTransform()) is m

    def test_double_scale_centered_square(self):
        # centered 4x4 block in 32x32 scaled by 2 becomes an 8x8 block
        bits = np.zeros((32, 32), dtype=bool)
        bits[14:18, 14:18] = True
        out = apply_transform(RasterMask.from_array(bits), AffineTransform(scale=2.0))
        assert out.popcount() == 64
        ys, xs = np.nonzero(out.bits)
        assert (ys.min(), ys.max(), xs.min(), xs.max()) == (12, 19, 12, 19)

    def test_translation_moves_pixels(self):
        bits = np.zeros((16, 16), dtype=bool)
        bits[4, 4] = True
        out = apply_transform(RasterMask.from_array(bits), AffineTransform(dx=3, dy=2))
        assert out.bits[6, 7]
        assert out.popcount() == 1

    def test_offcanvas_clipped(self):
        m = RasterMask.full(8, 8)
        out = apply_transform(m, AffineTransform(dx=100))
        assert out.is_empty()

    def test_popcount_scales_quadratically(self):
        bits = np.zeros((64, 64), dtype=bool)
        bits[24:40, 24:40] = True  # 16x16 centered
        m = RasterMask.from_array(bits)
        for s in (0.5, 2.0, 3.0):
            out = apply_transform(m, AffineTransform(scale=s))
            assert out.popcount() == int(16 * s) ** 2


class TestResizeAndDownsample:
    def test_resize_nearest(self):
        bits = np.array([[1, 0], [0, 1]], dtype=bool)
        out = resize_mask(RasterMask.from_array(bits), 4, 4)
        assert out.bits[0, 0] and out.bits[0, 1] and out.bits[1, 1]
        assert not out.bits[0, 2]
        assert out.popcount() == 8

    def test_resize_same_dims_is_noop(self):
        m = RasterMask.full(3, 3)
        assert resize_mask(m, 3, 3) is m

    def test_resize_validates(self):
        with pytest.raises(InvalidArgumentError):
            resize_mask(RasterMask.empty(2, 2), 0, 2)

    def test_downsample_majority_threshold(self):
        # each 2x2 block needs >= 2 set pixels to survive
        bits = np.array(
            [
                [1, 0, 1, 1],
                [0, 0, 1, 1],
                [1, 1, 0, 0],
                [1, 1, 0, 1],
            ],
            dtype=bool,
        )
        out = downsample_majority(RasterMask.from_array(bits), 2, 2)
        assert out.bits.tolist() == [[False, True], [True, False]]

    def test_downsample_against_loop_oracle(self, rng_seed):
        rng = random.Random(rng_seed + 1)
        for _ in range(20):
            w = rng.randrange(3, 40)
            h = rng.randrange(3, 40)
            ow = rng.randrange(1, w + 1)
            oh = rng.randrange(1, h + 1)
            m = rand_mask(rng, w, h, rng.random())
            out = downsample_majority(m, ow, oh)
            assert np.array_equal(out.bits, ref_downsample(m.bits, ow, oh))


class TestRegions:
    def sketch_two(self) -> RegionSketch:
        red = hex_to_rgb(PALETTE[0][0])
        green = hex_to_rgb(PALETTE[1][0])
        px = np.full((20, 20, 3), 255, dtype=np.uint8)
        px[2:8, 2:8] = red
        px[12:18, 3:9] = red  # second blob, same color: must merge
        px[5:15, 12:19] = green
        legend = {
            PALETTE[0][0]: LegendEntry("girl", "girl"),
            PALETTE[1][0]: LegendEntry("cat", "cat"),
        }
        return RegionSketch(20, 20, px, legend)

    def test_extract_merges_and_orders(self):
        regions = extract_regions(self.sketch_two())
        assert [r.region_id for r in regions] == ["girl", "cat"]
        assert regions[0].palette_index == 0
        assert regions[0].mask.popcount() == 36 + 36
        assert regions[1].z == 1

    def test_unlabeled_color_gets_color_name(self):
        px = np.full((4, 4, 3), 255, dtype=np.uint8)
        px[0, 0] = hex_to_rgb(PALETTE[2][0])
        regions = extract_regions(RegionSketch(4, 4, px, {}))
        assert regions[0].region_id == PALETTE[2][1]
        assert regions[0].object_type is None

    def test_non_palette_color_rejected_with_hex(self):
        px = np.full((4, 4, 3), 255, dtype=np.uint8)
        px[1, 1] = (1, 2, 3)
        with pytest.raises(FormatError, match="#010203"):
            extract_regions(RegionSketch(4, 4, px, {}))

    def test_render_roundtrip(self):
        sketch = self.sketch_two()
        regions = extract_regions(sketch)
        px = render_regions(regions, 20, 20)
        assert np.array_equal(px, sketch.pixels)

    def test_background_mask_is_complement(self):
        regions = extract_regions(self.sketch_two())
        bg = background_mask(regions, 20, 20)
        total = sum(r.mask.popcount() for r in regions)
        assert bg.popcount() == 400 - total
        for r in regions:
            assert (bg.bits & r.mask.bits).sum() == 0


class TestComposeAnchor:
    def test_higher_z_occludes_mask_and_edges(self):
        w = h = 10
        low_mask = np.zeros((h, w), dtype=bool)
        low_mask[2:8, 2:8] = True
        low_edges = np.zeros((h, w), dtype=bool)
        low_edges[2, 2:8] = True
        high_mask = np.zeros((h, w), dtype=bool)
        high_mask[0:5, 0:5] = True
        high_edges = np.zeros((h, w), dtype=bool)
        high_edges[4, 0:5] = True

        anchor, masks = compose_anchor(
            [
                (RasterMask.from_array(low_edges), RasterMask.from_array(low_mask), 0),
                (RasterMask.from_array(high_edges), RasterMask.from_array(high_mask), 1),
            ]
        )
        # low layer's row-2 edge pixels under the high square vanish
        assert not anchor.bits[2, 2:5].any()
        assert anchor.bits[2, 5:8].all()
        assert anchor.bits[4, 0:5].all()
        # visible masks are disjoint
        assert (masks[0].bits & masks[1].bits).sum() == 0
        assert not masks[0].bits[2:5, 2:5].any()
        assert masks[1].bits[0:5, 0:5].all()

    def test_equal_z_later_wins(self):
        m = RasterMask.full(4, 4)
        e = RasterMask.empty(4, 4)
        _, masks = compose_anchor([(e, m, 3), (e, m, 3)])
        assert masks[0].is_empty()
        assert masks[1].popcount() == 16

    def test_empty_placements_rejected(self):
        with pytest.raises(InvalidArgumentError):
            compose_anchor([])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            compose_anchor(
                [
                    (RasterMask.empty(4, 4), RasterMask.empty(4, 4), 0),
                    (RasterMask.empty(5, 4), RasterMask.empty(5, 4), 1),
                ]
            )


class TestGrayImage:
    def test_bounds_checked(self):
        with pytest.raises(InvalidArgumentError):
            GrayImage.from_array(np.array([[0.0, 1.2]]))
        with pytest.raises(InvalidArgumentError):
            GrayImage.from_array(np.array([[-0.1, 0.5]]))

    def test_from_array_shape(self):
        img = GrayImage.from_array(np.zeros((3, 5)))
        assert (img.width, img.height) == (5, 3)
