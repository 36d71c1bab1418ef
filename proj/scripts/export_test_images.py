#!/usr/bin/env python3
"""Export the bundled scikit-image sample pictures as 8-bit binary PGMs.

Writes data/camera.pgm (the held-out test image) plus a small grayscale
training corpus under data/corpus/. Run once; the outputs are committed so
the test suite does not depend on Python.
"""

import pathlib

import numpy as np
import skimage.data as sd
from skimage.color import rgb2gray

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"

CORPUS = ["moon", "coins", "text", "page", "astronaut", "chelsea", "coffee"]
HELD_OUT = "camera"


def to_gray_u8(img):
    arr = np.asarray(img)
    if arr.ndim == 3:
        arr = rgb2gray(arr)  # float in [0,1]
        arr = np.round(arr * 255.0)
    return arr.astype(np.uint8)


def write_pgm(arr, path):
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(arr.tobytes())
    print(f"{path} {w}x{h}")


def main():
    OUT.mkdir(exist_ok=True)
    (OUT / "corpus").mkdir(exist_ok=True)
    write_pgm(to_gray_u8(getattr(sd, HELD_OUT)()), OUT / f"{HELD_OUT}.pgm")
    for name in CORPUS:
        write_pgm(to_gray_u8(getattr(sd, name)()), OUT / "corpus" / f"{name}.pgm")


if __name__ == "__main__":
    main()
