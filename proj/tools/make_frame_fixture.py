#!/usr/bin/env python3
"""Writes a small synthetic grayscale clip as raw 8-bit planes (frame-major, row-major)."""
import argparse

import numpy as np


def render(height, width, frames, seed):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    # Static scene: lit floor gradient, painted lines and fixed texture.
    background = 0.35 + 0.25 * (y / height) + 0.1 * np.cos(2 * np.pi * x / width)
    background[:, width // 2] = 0.9
    background[height - 6, :] = 0.85
    background += 0.03 * rng.standard_normal((height, width))
    clip = np.empty((frames, height, width))
    for k in range(frames):
        t = k / max(frames - 1, 1)
        frame = background.copy()
        # Two figures moving across the scene.
        for cx, cy, r, v in ((8 + 40 * t, 20.0, 4.0, 0.15), (54 - 30 * t, 14 + 6 * t, 3.5, 0.2)):
            body = ((x - cx) / r) ** 2 + ((y - cy) / (2 * r)) ** 2 <= 1.0
            frame[body] = v
        # A ball on a parabolic path.
        bx, by = 10 + 44 * t, 6 + 24 * (2 * t - 1) ** 2
        frame[(x - bx) ** 2 + (y - by) ** 2 <= 2.25] = 0.95
        clip[k] = frame
    return np.clip(np.floor(clip * 255 + 0.5), 0, 255).astype(np.uint8)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--height", type=int, default=36)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--frames", type=int, default=10)
    parser.add_argument("--seed", type=int, default=4)
    parser.add_argument("output")
    args = parser.parse_args()
    render(args.height, args.width, args.frames, args.seed).tofile(args.output)


if __name__ == "__main__":
    main()
