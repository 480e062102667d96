"""
Synthetic test images with a planted, known anomaly.

A spec is a plain dict (JSON-compatible)::

    {
      "width": 64, "height": 64, "seed": 3,
      "background": {"kind": "gaussian", "mean": 0.5, "sd": 0.1},
      "plant": {"origin": [20, 31], "width": 8, "height": 8,
                "patch": {"kind": "checker", "low": 0.0, "high": 1.0, "cell": 1}}
    }

Backgrounds: ``gaussian`` (mean, sd), ``constant`` (value) and ``periodic``
(period, optional explicit ``tile``; a uniform random tile is drawn when
absent).  Patches: ``gaussian`` (mean, sd), ``checker`` (low, high, cell) and
``inverted-tile`` (one minus the background under the plant).
"""

import numpy as np

BACKGROUNDS = ("gaussian", "constant", "periodic")
PATCHES = ("gaussian", "checker", "inverted-tile")


class SynthError(ValueError):
    pass


def _rng(spec, stream):
    return np.random.default_rng([int(spec.get("seed", 0)), stream])


def _background(spec, h, w):
    bg = spec.get("background", {"kind": "constant", "value": 0.5})
    kind = bg.get("kind")
    if kind == "constant":
        return np.full((h, w), float(bg.get("value", 0.5)))
    if kind == "gaussian":
        rng = _rng(spec, 0)
        return rng.normal(float(bg.get("mean", 0.5)), float(bg.get("sd", 0.1)), size=(h, w))
    if kind == "periodic":
        if "tile" in bg:
            tile = np.asarray(bg["tile"], dtype=np.float64)
            if tile.ndim != 2:
                raise SynthError("periodic tile must be 2-D")
        else:
            period = int(bg.get("period", 8))
            if period < 1:
                raise SynthError("period must be >= 1")
            tile = _rng(spec, 0).uniform(0.0, 1.0, size=(period, period))
        th, tw = tile.shape
        return np.tile(tile, (-(-h // th), -(-w // tw)))[:h, :w]
    raise SynthError(f"unknown background kind {kind!r}; expected one of {BACKGROUNDS}")


def _patch(spec, plant, region):
    p = plant.get("patch", {"kind": "checker"})
    kind = p.get("kind")
    ph, pw = region.shape
    if kind == "checker":
        cell = int(p.get("cell", 1))
        if cell < 1:
            raise SynthError("checker cell must be >= 1")
        yy, xx = np.mgrid[0:ph, 0:pw]
        on = ((yy // cell) + (xx // cell)) % 2 == 0
        return np.where(on, float(p.get("high", 1.0)), float(p.get("low", 0.0)))
    if kind == "gaussian":
        rng = _rng(spec, 1)
        return rng.normal(float(p.get("mean", 0.5)), float(p.get("sd", 0.3)), size=(ph, pw))
    if kind == "inverted-tile":
        return 1.0 - region
    raise SynthError(f"unknown patch kind {kind!r}; expected one of {PATCHES}")


def generate(spec):
    """Render ``spec``; returns ``(image, truth)`` with ``truth`` the plant origin or None.

    Intensities are clamped to [0, 1] after planting.
    """
    try:
        w = int(spec["width"])
        h = int(spec["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SynthError(f"spec needs integer width and height: {exc}") from None
    if w < 1 or h < 1:
        raise SynthError("width and height must be >= 1")
    img = _background(spec, h, w)
    truth = None
    plant = spec.get("plant")
    if plant:
        x, y = (int(v) for v in plant["origin"])
        pw = int(plant.get("width", 8))
        ph = int(plant.get("height", pw))
        if pw < 1 or ph < 1 or x < 0 or y < 0 or x + pw > w or y + ph > h:
            raise SynthError(
                f"plant {pw}x{ph} at ({x}, {y}) does not fit in a {w}x{h} image")
        region = img[y:y + ph, x:x + pw]
        img[y:y + ph, x:x + pw] = _patch(spec, plant, region.copy())
        truth = (x, y)
    return np.clip(img, 0.0, 1.0), truth


def planted_spec(seed, size=64, patch=8, sd=0.1, margin=0):
    """Gaussian background with a checker plant at a seed-dependent origin."""
    rng = np.random.default_rng([int(seed), 99])
    hi = size - patch - margin
    x, y = (int(v) for v in rng.integers(margin, hi + 1, size=2))
    return {
        "width": size, "height": size, "seed": int(seed),
        "background": {"kind": "gaussian", "mean": 0.5, "sd": sd},
        "plant": {"origin": [x, y], "width": patch, "height": patch,
                  "patch": {"kind": "checker", "low": 0.0, "high": 1.0, "cell": 1}},
    }
