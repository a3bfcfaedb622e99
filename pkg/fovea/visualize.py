"""
Fixation overlays, composites and glimpse strips written as PPM/PGM.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

import numpy as np

from fovea import dataio
from fovea import glimpse
from fovea import utils
from fovea.cexceptions import CX

DOT_COLOR = (255, 255, 0)
OUTLINE_COLOR = (0, 128, 255)
CORRECT_COLOR = (0, 255, 0)
WRONG_COLOR = (255, 0, 0)
BORDER = 2


def _rgb(image):
    image = np.asarray(image, dtype=np.float64)
    if image.shape[0] == 1:
        return np.repeat(image, 3, axis=0)
    return image.copy()


def _color(rgb):
    return np.asarray(rgb, dtype=np.float64).reshape(3, 1, 1) / 255.0


def draw_border(image, correct, width=BORDER):
    color = _color(CORRECT_COLOR if correct else WRONG_COLOR)
    image[:, :width, :] = color
    image[:, -width:, :] = color
    image[:, :, :width] = color
    image[:, :, -width:] = color
    return image


def draw_outline(image, box, rgb=OUTLINE_COLOR):
    """
    One-pixel outline of the box, clipped to the image.
    """
    (c, h, w) = image.shape
    color = _color(rgb)[:, :, 0]
    (r0, r1) = (max(0, box.top), min(h, box.bottom))
    (c0, c1) = (max(0, box.left), min(w, box.right))
    if r0 >= r1 or c0 >= c1:
        return image
    for row in (box.top, box.bottom - 1):
        if 0 <= row < h:
            image[:, row, c0:c1] = color
    for col in (box.left, box.right - 1):
        if 0 <= col < w:
            image[:, r0:r1, col] = color
    return image


def draw_dot(image, row, col, rgb=DOT_COLOR, radius=1):
    (c, h, w) = image.shape
    image[:, max(0, row - radius):min(h, row + radius + 1), max(0, col - radius):min(w, col + radius + 1)] = \
        _color(rgb)
    return image


def fixation_overlay(image, episode, correct):
    """
    The original image with the high-resolution box outlined and a dot at
    every glimpse center, framed green or red.
    """
    overlay = _rgb(image)
    (c, h, w) = overlay.shape
    for step in episode.trace:
        finest = step.bundle.resolutions[0]
        draw_outline(overlay, step.boxes[finest])
    for step in episode.trace:
        (row, col) = glimpse.location_to_pixel(h, w, step.location)
        draw_dot(overlay, row, col)
    return draw_border(overlay, correct)


def emit_visuals(image, episode, correct, out_dir, ident, seed=0, logger=None):
    """
    Write <ident>_overlay.ppm, <ident>_composite.ppm and one
    <ident>_glimpse<n>.ppm strip per step.  Composite noise comes from a
    private generator seeded with `seed`.

    :return: list of written paths
    """
    if not episode.trace:
        raise CX("cannot visualize an episode with no glimpses")
    image = np.asarray(image, dtype=np.float64)
    if not os.path.isdir(out_dir):
        utils.mkdir(out_dir, logger=logger)
    written = []

    path = os.path.join(out_dir, "%s_overlay.ppm" % ident)
    written.append(dataio.write_pnm(path, fixation_overlay(image, episode, correct)))

    rng = np.random.default_rng(seed)
    (composite, mask) = glimpse.render_composite(image.shape, [s.bundle for s in episode.trace], rng,
                                                 (float(image.min()), float(image.max())))
    path = os.path.join(out_dir, "%s_composite.ppm" % ident)
    written.append(dataio.write_pnm(path, draw_border(_rgb(composite), correct)))

    for step in episode.trace:
        path = os.path.join(out_dir, "%s_glimpse%d.ppm" % (ident, step.step))
        written.append(dataio.write_pnm(path, _rgb(glimpse.assemble_glimpse(step.bundle))))

    if logger is not None:
        logger.debug("wrote %d visuals for %s" % (len(written), ident))
    return written
