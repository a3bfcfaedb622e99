"""
Foveal glimpse geometry: concentric multi-resolution boxes, noise-filled
extraction, the context patch and the composite rendering.

Locations are normalized: (-1, -1) is the top-left pixel, (0, 0) the
image center and (+1, +1) the bottom-right pixel.  Boxes are integer
pixel squares and may extend past the image.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

from collections import OrderedDict, namedtuple

import numpy as np

from fovea import utils
from fovea import validate
from fovea.cexceptions import CX

# ladder order, finest first
RESOLUTIONS = ("high", "medium", "low")

MASK_NONE = -1
MASK_CODES = dict((name, index) for (index, name) in enumerate(RESOLUTIONS))

CONTEXT_MODES = ("centered", "random")


class Location(namedtuple("Location", ["row", "col"])):
    __slots__ = ()

    @classmethod
    def clamped(cls, row, col):
        return cls(float(min(1.0, max(-1.0, row))), float(min(1.0, max(-1.0, col))))

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls.clamped(values[0], values[1])

    def as_array(self):
        return np.array([self.row, self.col], dtype=np.float64)


CENTER = Location(0.0, 0.0)


class Box(namedtuple("Box", ["top", "left", "size"])):
    """
    Square source rectangle: rows [top, top + size), cols [left, left + size).
    """
    __slots__ = ()

    @property
    def bottom(self):
        return self.top + self.size

    @property
    def right(self):
        return self.left + self.size

    def center(self):
        return (self.top + self.size // 2, self.left + self.size // 2)

    def inside(self, height, width):
        return self.top >= 0 and self.left >= 0 and self.bottom <= height and self.right <= width


class PatchLadder(object):

    def __init__(self, base_fraction=0.25, scale_factor=2.0, resolutions=RESOLUTIONS, out_size=96):
        if not 0.0 < base_fraction <= 1.0:
            raise CX("base_fraction must be in (0, 1], got %s" % base_fraction)
        if not scale_factor > 1.0:
            raise CX("scale_factor must be > 1, got %s" % scale_factor)
        if out_size < 1:
            raise CX("patch size must be positive, got %s" % out_size)
        self.base_fraction = float(base_fraction)
        self.scale_factor = float(scale_factor)
        self.resolutions = validate.resolutions(resolutions)
        self.out_size = int(out_size)

    def levels(self):
        return [RESOLUTIONS.index(r) for r in self.resolutions]

    def __repr__(self):
        return "PatchLadder(base_fraction=%s, scale_factor=%s, resolutions=%s, out_size=%s)" % (
            self.base_fraction, self.scale_factor, ",".join(self.resolutions), self.out_size)


class GlimpseBundle(object):

    def __init__(self, location, boxes, patches):
        self.location = location
        self.boxes = boxes
        self.patches = patches

    @property
    def resolutions(self):
        return list(self.patches.keys())


def location_to_pixel(height, width, loc):
    row = utils.round_half_up((loc.row + 1.0) / 2.0 * (height - 1))
    col = utils.round_half_up((loc.col + 1.0) / 2.0 * (width - 1))
    return (row, col)


def ladder_sides(height, width, ladder):
    """
    Box side per ladder level, finest first.
    """
    sides = [utils.round_half_up(ladder.base_fraction * min(height, width))]
    sides[0] = max(1, sides[0])
    for _ in RESOLUTIONS[1:]:
        sides.append(utils.round_half_up(sides[-1] * ladder.scale_factor))
    return sides


def compute_patch_boxes(height, width, loc, ladder):
    """
    Concentric square boxes for the ladder's selected resolutions, in
    high -> low order.
    """
    if height < 1 or width < 1:
        raise CX("image must be at least 1x1, got %sx%s" % (height, width))
    loc = Location.clamped(loc[0], loc[1])
    (row, col) = location_to_pixel(height, width, loc)
    sides = ladder_sides(height, width, ladder)
    return [Box(row - sides[level] // 2, col - sides[level] // 2, sides[level]) for level in ladder.levels()]


def sample_bilinear(image, rows, cols):
    """
    Separable bilinear sampling of a C x H x W array at fractional row and
    column coordinates; returns C x len(rows) x len(cols).
    """
    (c, h, w) = image.shape
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    r0 = np.clip(np.floor(rows).astype(np.int64), 0, h - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    wr = (rows - r0)[None, :, None]
    top = image[:, r0, :]
    vertical = top + wr * (image[:, r1, :] - top)
    c0 = np.clip(np.floor(cols).astype(np.int64), 0, w - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    wc = (cols - c0)[None, None, :]
    left = vertical[:, :, c0]
    return left + wc * (vertical[:, :, c1] - left)


def _corner_grid(src, dst):
    if dst == 1:
        return np.array([(src - 1) / 2.0])
    return np.linspace(0.0, src - 1.0, dst)


def resize_bilinear(image, out_h, out_w=None):
    """
    Corner-aligned bilinear resize of a C x H x W array.
    """
    if out_w is None:
        out_w = out_h
    (c, h, w) = image.shape
    if (h, w) == (out_h, out_w):
        return np.array(image, dtype=np.float64)
    return sample_bilinear(image, _corner_grid(h, out_h), _corner_grid(w, out_w))


def extract_resize_patch(image, box, out_size, rng):
    """
    Copy the box out of the image, fill whatever lies off the image with
    uniform noise over the image's value range, then resize.
    """
    (c, h, w) = image.shape
    side = box.size
    if box.inside(h, w):
        crop = image[:, box.top:box.bottom, box.left:box.right]
    else:
        (low, high) = (float(image.min()), float(image.max()))
        crop = rng.uniform(low, high, size=(c, side, side))
        (r0, r1) = (max(0, box.top), min(h, box.bottom))
        (c0, c1) = (max(0, box.left), min(w, box.right))
        if r0 < r1 and c0 < c1:
            crop[:, r0 - box.top:r1 - box.top, c0 - box.left:c1 - box.left] = image[:, r0:r1, c0:c1]
    return resize_bilinear(crop, out_size)


def extract_glimpse(image, loc, ladder, rng):
    (c, h, w) = image.shape
    boxes = compute_patch_boxes(h, w, loc, ladder)
    patches = OrderedDict()
    box_map = OrderedDict()
    for (name, box) in zip(ladder.resolutions, boxes):
        patches[name] = extract_resize_patch(image, box, ladder.out_size, rng)
        box_map[name] = box
    return GlimpseBundle(Location.clamped(loc[0], loc[1]), box_map, patches)


def assemble_glimpse(bundle):
    """
    Side-by-side strip, high -> low: C x S x (S * R).
    """
    names = [r for r in RESOLUTIONS if r in bundle.patches]
    if not names:
        raise CX("glimpse bundle has no patches")
    return np.concatenate([bundle.patches[r] for r in names], axis=2)


def build_context(image, mode, rng, out_size=96):
    """
    Square crop with the side of the image's short dimension: centered at
    inference, uniformly placed fully inside the image in training.
    """
    (c, h, w) = image.shape
    side = min(h, w)
    if mode == "centered":
        (top, left) = ((h - side) // 2, (w - side) // 2)
    elif mode == "random":
        top = int(rng.integers(0, h - side + 1))
        left = int(rng.integers(0, w - side + 1))
    else:
        raise CX("unknown context mode '%s' (expected one of %s)" % (mode, ", ".join(CONTEXT_MODES)))
    box = Box(top, left, side)
    return resize_bilinear(image[:, top:top + side, left:left + side], out_size), box


def center_square_patch(image, out_size):
    """
    Zero-pad to a centered square and resize: the whole-image input of the
    non-attention baseline.
    """
    (c, h, w) = image.shape
    side = max(h, w)
    canvas = np.zeros((c, side, side))
    (top, left) = ((side - h) // 2, (side - w) // 2)
    canvas[:, top:top + h, left:left + w] = image
    return resize_bilinear(canvas, out_size)


def render_composite(image_shape, glimpses, rng, value_range=(0.0, 1.0)):
    """
    Every pixel shows the finest glimpse pixel covering it, sampled back
    from that patch; uncovered pixels are noise.

    :return: (C x H x W composite, H x W int mask of MASK_CODES / MASK_NONE)
    """
    (c, h, w) = image_shape
    composite = rng.uniform(value_range[0], value_range[1], size=(c, h, w))
    mask = np.full((h, w), MASK_NONE, dtype=np.int64)

    layers = []
    for (order, bundle) in enumerate(glimpses):
        for name in bundle.patches:
            layers.append((bundle.boxes[name].size, order, name, bundle))
    # coarse first, so finer boxes (and later glimpses on ties) paint over
    layers.sort(key=lambda layer: (-layer[0], layer[1]))

    for (side, order, name, bundle) in layers:
        box = bundle.boxes[name]
        patch = bundle.patches[name]
        (r0, r1) = (max(0, box.top), min(h, box.bottom))
        (c0, c1) = (max(0, box.left), min(w, box.right))
        if r0 >= r1 or c0 >= c1:
            continue
        out = patch.shape[1]
        step = (out - 1.0) / (side - 1.0) if side > 1 else 0.0
        rows = (np.arange(r0, r1) - box.top) * step
        cols = (np.arange(c0, c1) - box.left) * step
        composite[:, r0:r1, c0:c1] = sample_bilinear(patch, rows, cols)
        mask[r0:r1, c0:c1] = MASK_CODES[name]
    return composite, mask
