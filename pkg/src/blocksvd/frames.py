"""Grayscale frame-stack ingestion and export.

A sequence of same-size PGM (binary "P5") frames becomes one
(width*height)-by-frames matrix: frame t is column t, pixels flattened
column-major within the frame.  A JSON sidecar records the geometry and
the column order so round trips are lossless at the stored bit depth.
"""

import json
import os
import re
from dataclasses import dataclass

import numpy as np

from .store import MatrixStore

__all__ = [
    "FrameStack",
    "read_pgm",
    "write_pgm",
    "ingest_frames",
    "export_frames",
    "frame_to_column",
    "column_to_frame",
]


@dataclass
class FrameStack:
    """Geometry of a vectorized frame sequence."""

    width: int
    height: int
    count: int
    filenames: list
    maxval: int = 255
    scale: float = None  # set when exporting in rescale mode

    @property
    def rows(self):
        return self.width * self.height

    def to_json(self):
        return json.dumps({
            "width": self.width,
            "height": self.height,
            "frames": self.count,
            "filenames": self.filenames,
            "maxval": self.maxval,
            "scale": self.scale,
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(width=d["width"], height=d["height"], count=d["frames"],
                   filenames=d["filenames"], maxval=d["maxval"],
                   scale=d.get("scale"))


_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def read_pgm(path):
    """Binary PGM (P5) -> (array of shape (height, width), maxval)."""
    with open(path, "rb") as f:
        data = f.read()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        mobj = _PGM_TOKEN.match(data, pos)
        if mobj is None:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(mobj.group(1))
        pos = mobj.end()
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    count = width * height
    pixels = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    if pixels.size != count:
        raise ValueError(f"{path}: truncated PGM payload")
    return pixels.reshape((height, width)).astype(np.uint16), maxval


def write_pgm(path, frame, maxval=255):
    """Write an integer (height, width) array as binary PGM."""
    frame = np.asarray(frame)
    h, w = frame.shape
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        f.write(frame.astype(dtype).tobytes())


def frame_to_column(frame):
    """Flatten a (height, width) frame column-major."""
    return np.asarray(frame).flatten(order="F")


def column_to_frame(column, height, width):
    return np.asarray(column).reshape((height, width), order="F")


def ingest_frames(directory, out_path, pattern=".pgm"):
    """Vectorize a directory of PGM frames into a store.

    Frames are taken in sorted filename order; pixels are scaled to
    [0, 1] by the stack's maxval.  Returns (MatrixStore, FrameStack);
    the sidecar JSON is written next to the store.
    """
    names = sorted(f for f in os.listdir(directory) if f.endswith(pattern))
    if not names:
        raise FileNotFoundError(f"no '{pattern}' frames in {directory}")
    first, maxval = read_pgm(os.path.join(directory, names[0]))
    h, w = first.shape
    store = MatrixStore.create(out_path, h * w, len(names), np.float64,
                               overwrite=True)
    for t, name in enumerate(names):
        frame, mv = read_pgm(os.path.join(directory, name))
        if frame.shape != (h, w) or mv != maxval:
            raise ValueError(
                f"{name}: geometry {frame.shape}/maxval {mv} differs from "
                f"first frame {(h, w)}/{maxval}"
            )
        col = frame_to_column(frame).astype(np.float64) / maxval
        store.write_block(t, t + 1, col[:, None])
    stack = FrameStack(width=w, height=h, count=len(names),
                       filenames=names, maxval=maxval)
    with open(out_path + ".json", "w") as f:
        f.write(stack.to_json())
    store.reset_stats()
    return store, stack


def export_frames(source, stack, directory, clamp=True, prefix="frame"):
    """Write each column of a matrix (or store) back out as PGM frames.

    With clamp=True values are clipped to [0, 1]; otherwise they are
    linearly rescaled to the full range and the (offset, scale) is
    recorded in the sidecar.
    """
    os.makedirs(directory, exist_ok=True)
    if isinstance(source, MatrixStore):
        mat = source.read_full()
    else:
        mat = np.asarray(source)
    if mat.shape[0] != stack.rows:
        raise ValueError(
            f"matrix has {mat.shape[0]} rows, stack needs {stack.rows}"
        )
    if clamp:
        scaled = np.clip(mat, 0.0, 1.0)
        offset, scale = 0.0, 1.0
    else:
        lo = float(mat.min())
        hi = float(mat.max())
        scale = hi - lo if hi > lo else 1.0
        offset = lo
        scaled = (mat - lo) / scale
    stack.scale = scale
    names = []
    for t in range(mat.shape[1]):
        frame = column_to_frame(scaled[:, t], stack.height, stack.width)
        quant = np.rint(frame * stack.maxval).astype(np.uint16)
        name = f"{prefix}_{t:05d}.pgm"
        write_pgm(os.path.join(directory, name), quant, stack.maxval)
        names.append(name)
    sidecar = FrameStack(width=stack.width, height=stack.height,
                         count=mat.shape[1], filenames=names,
                         maxval=stack.maxval, scale=scale)
    meta = json.loads(sidecar.to_json())
    meta["offset"] = offset
    with open(os.path.join(directory, "frames.json"), "w") as f:
        json.dump(meta, f, indent=2)
