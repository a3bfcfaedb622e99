"""
Checkpoint persistence.

Layout (all integers uint32 little-endian):

    b"FOVCKPT1" | version | header length | header (JSON, sorted keys)
    | tensor count | per tensor: name length, name, ndim, dims..., float64 LE values

Tensors are written in sorted name order, so equal state gives equal bytes.
Writes go to a temp file in the target directory, renamed over the target
while holding an exclusive flock on <dir>/.lock.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import fcntl
import os
import struct
from collections import OrderedDict

import numpy as np
import simplejson

from fovea.cexceptions import CX, FileNotFoundException

MAGIC = b"FOVCKPT1"
VERSION = 1
LOCK_NAME = ".lock"


class Checkpoint(object):

    def __init__(self, tensors, config=None, rng_state=None, epoch=0, baseline=None, kind="full"):
        self.tensors = OrderedDict((name, np.array(tensors[name], dtype=np.float64)) for name in sorted(tensors))
        self.config = dict(config or {})
        self.rng_state = rng_state
        self.epoch = int(epoch)
        self.baseline = baseline
        self.kind = kind

    def header(self):
        return {
            "kind": self.kind,
            "config": self.config,
            "rng_state": self.rng_state,
            "epoch": self.epoch,
            "baseline": self.baseline,
        }

    def param_tensors(self):
        return OrderedDict((n, v) for (n, v) in self.tensors.items() if not n.startswith("opt."))

    def optimizer_tensors(self):
        return OrderedDict((n, v) for (n, v) in self.tensors.items() if n.startswith("opt."))


def encode(checkpoint):
    header = simplejson.dumps(checkpoint.header(), sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(header)), header, struct.pack("<I", len(checkpoint.tensors))]
    for (name, value) in checkpoint.tensors.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<%dI" % (1 + value.ndim), value.ndim, *value.shape))
        chunks.append(value.astype("<f8").tobytes())
    return b"".join(chunks)


class _Reader(object):

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, count):
        if self.pos + count > len(self.data):
            raise CX("%s: truncated checkpoint (needed %d bytes at offset %d, file has %d)"
                     % (self.path, count, self.pos, len(self.data)))
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def uint32(self, count=1):
        values = struct.unpack("<%dI" % count, self.take(4 * count))
        return values if count > 1 else values[0]


def decode(data, path="<bytes>"):
    reader = _Reader(data, path)
    magic = reader.take(len(MAGIC))
    if magic != MAGIC:
        raise CX("%s: bad checkpoint magic, expected %r, found %r" % (path, MAGIC, magic))
    version = reader.uint32()
    if version != VERSION:
        raise CX("%s: checkpoint version %d not supported (expected %d)" % (path, version, VERSION))
    try:
        header = simplejson.loads(reader.take(reader.uint32()).decode("utf-8"))
    except ValueError as e:
        raise CX("%s: corrupt checkpoint header: %s" % (path, e))
    tensors = OrderedDict()
    for _ in range(reader.uint32()):
        name = reader.take(reader.uint32()).decode("utf-8")
        ndim = reader.uint32()
        shape = reader.uint32(ndim) if ndim > 1 else ((reader.uint32(),) if ndim == 1 else ())
        count = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(reader.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if reader.pos != len(data):
        raise CX("%s: %d trailing bytes after the last tensor" % (path, len(data) - reader.pos))
    return Checkpoint(tensors, header.get("config"), header.get("rng_state"), header.get("epoch", 0),
                      header.get("baseline"), header.get("kind", "full"))


def _grab_lock(directory):
    handle = open(os.path.join(directory, LOCK_NAME), "a+")
    fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
    return handle


def _release_lock(handle):
    fcntl.flock(handle.fileno(), fcntl.LOCK_UN)
    handle.close()


def save(path, checkpoint):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise CX("checkpoint directory does not exist: %s" % directory)
    data = encode(checkpoint)
    lock = _grab_lock(directory)
    try:
        tmp = "%s.tmp.%d" % (path, os.getpid())
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except (IOError, OSError) as e:
        raise CX("cannot write checkpoint %s: %s" % (path, e))
    finally:
        _release_lock(lock)
    return path


def load(path):
    if not os.path.isfile(path):
        raise FileNotFoundException("checkpoint not found: %s" % path)
    with open(path, "rb") as fh:
        return decode(fh.read(), path)


def restore_params(params, checkpoint, names=None):
    """
    Copy checkpoint tensors into a ParameterSet.  Every requested name must
    be present with the right shape; nothing is copied unless all are.
    """
    names = list(names if names is not None else params.names())
    stored = checkpoint.param_tensors()
    for name in names:
        if name not in stored:
            raise CX("checkpoint has no tensor '%s'" % name)
        if tuple(stored[name].shape) != params[name].shape:
            raise CX("checkpoint tensor '%s' has shape %s, model expects %s"
                     % (name, list(stored[name].shape), list(params[name].shape)))
    for name in names:
        params[name].value[...] = stored[name]
    return params
