"""Synthetic Manhattan-grid city, the default map when no map file is given."""

import logging

from paralleleye import seeds

from .layout import Layout, make_footprint, make_road

logger = logging.getLogger(__name__)

SIDEWALK = 3.0


def _block_buildings(x0, y0, x1, y1, rand):
    # split the block into 2..4 lots along its longer side
    lots = int(rand.integers(2, 5))
    horizontal = (x1 - x0) >= (y1 - y0)
    span = (x1 - x0) if horizontal else (y1 - y0)
    step = span / lots
    for k in range(lots):
        gap = float(rand.uniform(1.0, 4.0))
        if horizontal:
            bx0, bx1 = x0 + k * step + gap / 2, x0 + (k + 1) * step - gap / 2
            depth = float(rand.uniform(0.5, 1.0)) * (y1 - y0)
            by0, by1 = (y0, y0 + depth) if k % 2 == 0 else (y1 - depth, y1)
        else:
            by0, by1 = y0 + k * step + gap / 2, y0 + (k + 1) * step - gap / 2
            depth = float(rand.uniform(0.5, 1.0)) * (x1 - x0)
            bx0, bx1 = (x0, x0 + depth) if k % 2 == 0 else (x1 - depth, x1)
        if rand.random() < 0.25:
            # L-shaped lot
            cx = bx0 + (bx1 - bx0) * 0.5
            cy = by0 + (by1 - by0) * 0.5
            yield [(bx0, by0), (bx1, by0), (bx1, cy), (cx, cy), (cx, by1), (bx0, by1)]
        else:
            yield [(bx0, by0), (bx1, by0), (bx1, by1), (bx0, by1)]


def synthetic_grid(blocks_x=3, blocks_y=3, block_size=80.0, seed=0):
    """Grid of blocks_x by blocks_y city blocks separated by two-way streets.

    Perimeter streets are primary roads, inner streets residential.
    """
    rand = seeds.rng(seeds.derive(seed, 'synthetic-grid'))
    widths = {'primary': 9.0, 'residential': 6.0}
    pitch = block_size + widths['primary']
    width_x, width_y = blocks_x * pitch, blocks_y * pitch

    layout = Layout(roads=[], footprints=[])
    for i in range(blocks_x + 1):
        kind = 'primary' if i in (0, blocks_x) else 'residential'
        w = widths[kind]
        layout.roads.append(make_road([(i * pitch, 0.0), (i * pitch, width_y)], w, round(w / 3), way_id=len(layout.roads)))
    for j in range(blocks_y + 1):
        kind = 'primary' if j in (0, blocks_y) else 'residential'
        w = widths[kind]
        layout.roads.append(make_road([(0.0, j * pitch), (width_x, j * pitch)], w, round(w / 3), way_id=len(layout.roads)))

    for i in range(blocks_x):
        for j in range(blocks_y):
            inset = widths['primary'] / 2 + SIDEWALK
            x0, y0 = i * pitch + inset, j * pitch + inset
            x1, y1 = (i + 1) * pitch - inset, (j + 1) * pitch - inset
            for polygon in _block_buildings(x0, y0, x1, y1, rand):
                tags = {'building': 'yes'}
                if rand.random() < 0.5:
                    tags['building:levels'] = str(int(rand.integers(2, 10)))
                layout.footprints.append(make_footprint(polygon, tags, way_id=len(layout.footprints)))
    logger.debug("synthetic grid %dx%d: %d roads, %d footprints",
                 blocks_x, blocks_y, len(layout.roads), len(layout.footprints))
    return layout
