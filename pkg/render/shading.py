import numpy as np

from worldgen.classes import BASE_COLORS, CLASS_NAMES

AMBIENT = 0.3
DIFFUSE = 0.7


def lambert(base, normals, light):
    """Flat Lambert over arrays: base (..., 3), normals (..., 3), light (3,)."""
    base = np.asarray(base, dtype=np.float64)
    ndotl = np.asarray(normals, dtype=np.float64) @ np.asarray(light, dtype=np.float64)
    factor = np.asarray(AMBIENT + DIFFUSE * np.maximum(ndotl, 0.0))
    return np.clip(np.rint(base * factor[..., None]), 0, 255).astype(np.uint8)


def shade(class_id, normal, sun, base=None):
    """RGB of one flat-shaded surface; base defaults to the class colour."""
    if base is None:
        base = BASE_COLORS[CLASS_NAMES[class_id]]
    return tuple(int(c) for c in lambert(base, normal, sun))
