"""
Dataset ingestion: IDX digit files, class-per-directory PGM/PPM trees, the
cluttered digit synthesizer and the stratified train/validation split.

Pixels are stored as C x H x W float64 arrays scaled by exactly 1/255.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os
import struct

import numpy as np

from fovea import utils
from fovea import validate
from fovea.cexceptions import CX, FileNotFoundException

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

PNM_MAGICS = {b"P5": 1, b"P6": 3}
PNM_EXTENSIONS = (".pgm", ".ppm", ".pnm")

PLACEMENTS = ("random", "centered")


class LabeledImageSet(object):

    def __init__(self, images, labels, class_names):
        if len(images) != len(labels):
            raise CX("%d images but %d labels" % (len(images), len(labels)))
        num_classes = len(class_names)
        for label in labels:
            if not 0 <= int(label) < num_classes:
                raise CX("label %s out of range [0, %d)" % (label, num_classes))
        self.images = list(images)
        self.labels = [int(label) for label in labels]
        self.class_names = list(class_names)

    def __len__(self):
        return len(self.images)

    @property
    def num_classes(self):
        return len(self.class_names)

    def subset(self, indices):
        return LabeledImageSet([self.images[i] for i in indices], [self.labels[i] for i in indices], self.class_names)

    def class_counts(self):
        return np.bincount(np.asarray(self.labels, dtype=np.int64), minlength=self.num_classes)


def _read_bytes(path):
    if not os.path.isfile(path):
        raise FileNotFoundException("file not found: %s" % path)
    with open(path, "rb") as fh:
        return fh.read()


def _idx_header(data, path, expected_magic, dims):
    size = 4 + 4 * dims
    if len(data) < size:
        raise CX("%s: truncated IDX header (%d bytes)" % (path, len(data)))
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise CX("%s: bad IDX magic, expected 0x%08x, found 0x%08x" % (path, expected_magic, magic))
    return struct.unpack(">%dI" % dims, data[4:size]), size


def load_idx(images_path, labels_path):
    """
    Parse a big-endian IDX image/label file pair.  Digit classes are named
    "0".."9" (or up to the largest label seen).
    """
    image_data = _read_bytes(images_path)
    label_data = _read_bytes(labels_path)
    ((count, rows, cols), offset) = _idx_header(image_data, images_path, IDX_IMAGES_MAGIC, 3)
    ((label_count,), label_offset) = _idx_header(label_data, labels_path, IDX_LABELS_MAGIC, 1)
    if count != label_count:
        raise CX("count mismatch: %d images in %s, %d labels in %s" % (count, images_path, label_count, labels_path))
    if len(image_data) - offset < count * rows * cols:
        raise CX("%s: truncated, expected %d pixel bytes, found %d"
                 % (images_path, count * rows * cols, len(image_data) - offset))
    if len(label_data) - label_offset < count:
        raise CX("%s: truncated, expected %d labels, found %d" % (labels_path, count, len(label_data) - label_offset))

    pixels = np.frombuffer(image_data, dtype=np.uint8, count=count * rows * cols, offset=offset)
    pixels = pixels.reshape(count, 1, rows, cols).astype(np.float64) / 255.0
    labels = np.frombuffer(label_data, dtype=np.uint8, count=count, offset=label_offset).astype(np.int64)
    num_classes = max(10, int(labels.max()) + 1) if count else 10
    return LabeledImageSet([pixels[i] for i in range(count)], labels.tolist(), [str(i) for i in range(num_classes)])


def write_idx(images_path, labels_path, images, labels):
    """
    Write uint8 IDX files; images are H x W (or 1 x H x W) arrays in [0, 1].
    """
    arrays = [np.asarray(image, dtype=np.float64).reshape(np.shape(image)[-2:]) for image in images]
    (rows, cols) = arrays[0].shape if arrays else (0, 0)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(arrays), rows, cols))
        for array in arrays:
            fh.write(_to_bytes(array).tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


# ---------------------------------------------------------------------------
# netpbm

def _next_token(data, pos):
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def read_pnm(path):
    """
    Read a binary P5 (gray) or P6 (RGB) file with maxval 255.

    :return: C x H x W float64 array in [0, 1]
    """
    data = _read_bytes(path)
    (magic, pos) = _next_token(data, 0)
    if magic not in PNM_MAGICS:
        raise CX("%s: unsupported image magic %r (only P5/P6)" % (path, magic.decode("latin-1")))
    fields = []
    for _ in range(3):
        (token, pos) = _next_token(data, pos)
        if not token.isdigit():
            raise CX("%s: malformed header field %r" % (path, token.decode("latin-1")))
        fields.append(int(token))
    (width, height, maxval) = fields
    if maxval != 255:
        raise CX("%s: unsupported maxval %d (only 255)" % (path, maxval))
    if width < 1 or height < 1:
        raise CX("%s: bad size %dx%d" % (path, width, height))
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    channels = PNM_MAGICS[magic]
    size = width * height * channels
    if len(data) - pos < size:
        raise CX("%s: truncated raster, expected %d bytes, found %d" % (path, size, len(data) - pos))
    raster = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos).reshape(height, width, channels)
    return raster.transpose(2, 0, 1).astype(np.float64) / 255.0


def _to_bytes(array):
    scaled = np.floor(np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5)
    return scaled.astype(np.uint8)


def write_pnm(path, image):
    """
    Write a C x H x W array in [0, 1] (C = 1 or 3) as P5/P6; values are
    rounded half up to 0..255.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[None]
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise CX("cannot write image of shape %s as PGM/PPM" % list(image.shape))
    (c, h, w) = image.shape
    header = ("%s\n%d %d\n255\n" % ("P5" if c == 1 else "P6", w, h)).encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(_to_bytes(image).transpose(1, 2, 0).tobytes())
    except (IOError, OSError) as e:
        raise CX("cannot write %s: %s" % (path, e))
    return path


def load_image_dir(root):
    """
    One subdirectory per class, sorted names -> label ids; images keep
    their own sizes.
    """
    if not os.path.isdir(root):
        raise FileNotFoundException("image directory not found: %s" % root)
    class_names = sorted(d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if not class_names:
        raise CX("%s: no class directories" % root)
    images = []
    labels = []
    for (label, name) in enumerate(class_names):
        folder = os.path.join(root, name)
        for filename in sorted(os.listdir(folder)):
            if os.path.splitext(filename)[1].lower() in PNM_EXTENSIONS:
                images.append(read_pnm(os.path.join(folder, filename)))
                labels.append(label)
    if not images:
        raise CX("%s: no P5/P6 images found" % root)
    return LabeledImageSet(images, labels, class_names)


def write_image_dir(root, dataset, logger=None):
    """
    Inverse of load_image_dir: <root>/<class>/<index>.pgm|ppm.  Classes
    without images get no directory.
    """
    utils.mkdir(root, logger=logger)
    for label in sorted(set(dataset.labels)):
        utils.mkdir(os.path.join(root, dataset.class_names[label]), logger=logger)
    width = len(str(max(0, len(dataset) - 1)))
    for (index, (image, label)) in enumerate(zip(dataset.images, dataset.labels)):
        ext = "pgm" if image.shape[0] == 1 else "ppm"
        write_pnm(os.path.join(root, dataset.class_names[label], "%0*d.%s" % (width, index, ext)), image)
    return root


# ---------------------------------------------------------------------------
# synthesis and splitting

def synth_cluttered(base, rng, canvas=100, clutter_count=4, clutter_size=8, placement="random", sources=None):
    """
    Paste each source digit onto an empty canvas over clutter_count random
    sub-patches cropped from digits of other classes.  The digit goes in
    last, at a uniform position (random) or the middle (centered).

    :param sources: indices of the digits to place, one canvas each
                    (default: every digit once, in order)
    """
    if placement not in PLACEMENTS:
        raise CX("unknown placement '%s' (expected one of %s)" % (placement, ", ".join(PLACEMENTS)))
    validate.non_negative("clutter_count", clutter_count)
    validate.positive("clutter_size", clutter_size)
    if len(base) == 0:
        raise CX("no source digits to synthesize from")
    labels = np.asarray(base.labels, dtype=np.int64)
    sources = range(len(base)) if sources is None else sources

    images = []
    out_labels = []
    for source in sources:
        source = int(source)
        digit = base.images[source]
        (c, h, w) = digit.shape
        if canvas < h or canvas < w:
            raise CX("canvas %d smaller than digit %dx%d" % (canvas, h, w))
        out = np.zeros((c, canvas, canvas))
        others = np.flatnonzero(labels != labels[source])
        for _ in range(clutter_count if len(others) else 0):
            donor = base.images[int(others[rng.integers(0, len(others))])]
            size = min(clutter_size, donor.shape[1], donor.shape[2])
            top = int(rng.integers(0, donor.shape[1] - size + 1))
            left = int(rng.integers(0, donor.shape[2] - size + 1))
            row = int(rng.integers(0, canvas - size + 1))
            col = int(rng.integers(0, canvas - size + 1))
            out[:, row:row + size, col:col + size] = donor[:c, top:top + size, left:left + size]
        if placement == "random":
            row = int(rng.integers(0, canvas - h + 1))
            col = int(rng.integers(0, canvas - w + 1))
        else:
            (row, col) = ((canvas - h) // 2, (canvas - w) // 2)
        region = out[:, row:row + h, col:col + w]
        # digit strokes win; its background lets clutter show through
        np.maximum(region, digit, out=region)
        images.append(out)
        out_labels.append(int(labels[source]))
    return LabeledImageSet(images, out_labels, base.class_names)


def balanced_sources(dataset, per_class, rng):
    """
    per_class random indices (with replacement) of every class present,
    class by class.
    """
    labels = np.asarray(dataset.labels, dtype=np.int64)
    picked = []
    for label in range(dataset.num_classes):
        members = np.flatnonzero(labels == label)
        if len(members):
            picked.extend(members[rng.integers(0, len(members), size=per_class)].tolist())
    return picked


def split_train_val(dataset, fraction, seed):
    """
    Per-class stratified split after a seeded shuffle: round(fraction * n_c)
    (at least 1, at most n_c - 1) examples of each class go to train.

    :return: (train, val)
    """
    validate.open_fraction("train fraction", fraction)
    rng = np.random.default_rng(seed)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    train = []
    val = []
    for label in range(dataset.num_classes):
        members = np.flatnonzero(labels == label)
        if len(members) == 0:
            continue
        if len(members) < 2:
            raise CX("class '%s' has %d example(s); at least 2 are needed to split"
                     % (dataset.class_names[label], len(members)))
        members = members[rng.permutation(len(members))]
        cut = min(len(members) - 1, max(1, utils.round_half_up(fraction * len(members))))
        train.extend(members[:cut].tolist())
        val.extend(members[cut:].tolist())
    return dataset.subset(sorted(train)), dataset.subset(sorted(val))
