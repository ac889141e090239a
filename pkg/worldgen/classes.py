"""Fixed class table shared by rendering, annotation and dataset export."""

# 0 is background in class and instance buffers
CLASS_IDS = {
    'car': 1,
    'bus': 2,
    'truck': 3,
    'building': 4,
    'road': 5,
    'vegetation': 6,
    'fence': 7,
    'traffic_sign': 8,
    'traffic_light': 9,
    'ground': 10,
}
CLASS_NAMES = {v: k for k, v in CLASS_IDS.items()}

VEHICLE_CLASSES = ('car', 'bus', 'truck')
VEHICLE_CLASS_IDS = frozenset(CLASS_IDS[c] for c in VEHICLE_CLASSES)

# shading base colours; vehicles in a world get seeded colours instead
BASE_COLORS = {
    'car': (160, 30, 30),
    'bus': (220, 170, 20),
    'truck': (60, 90, 140),
    'building': (176, 168, 158),
    'road': (70, 70, 74),
    'vegetation': (64, 128, 48),
    'fence': (150, 120, 90),
    'traffic_sign': (200, 200, 210),
    'traffic_light': (40, 40, 40),
    'ground': (118, 130, 96),
}

# segmentation palette, index = class id
SEGMENTATION_PALETTE = [
    (0, 0, 0),
    (0, 0, 142),
    (0, 60, 100),
    (0, 0, 70),
    (70, 70, 70),
    (128, 64, 128),
    (107, 142, 35),
    (190, 153, 153),
    (220, 220, 0),
    (250, 170, 30),
    (152, 251, 152),
]

SKY_COLOR = (150, 190, 230)
