import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase, override_settings

from paralleleye.exceptions import ConfigError
from render.camera import intrinsics_from_fov
from render.raster import RenderSettings, rasterize
from render.tests import quad, scene
from worldgen import meshes
from worldgen.classes import CLASS_IDS, VEHICLE_CLASSES
from worldgen.tests import small_world
from worldgen.world import Entity, World, camera_pose

from .annotate import annotate, annotate_frame
from .classify import ClassThresholds, classify_area, classify_occlusion
from .exceptions import EmptyMask, FullyOutOfView
from .flow import compute_flow, warp_consistency
from .masks import MaskExtent, instance_masks, tight_bbox
from .occlusion import occlusion_rate, truncation_flag

IDENTITY = np.eye(4)
SETTINGS = RenderSettings(draw_distance=100.0)


def translation(x=0.0, y=0.0, z=0.0):
    m = np.eye(4)
    m[:3, 3] = (x, y, z)
    return m


def car(entity_id, position, size=2.0):
    """Cube 'car' whose near face sits at position's z, camera-aligned under the identity camera."""
    mesh = meshes.box((0.0, 0.0), (size, size, size)).with_ids(CLASS_IDS['car'], entity_id)
    return Entity(entity_id, 'car', mesh, position=tuple(float(p) for p in position))


def garage(*vehicles, static=()):
    return World(static=tuple(static), vehicles=tuple(vehicles), agents=(), roads=(), rig=None, preset=None, seed=0)


def scan_extents(instance):
    """Full-image double loop over the instance buffer."""
    found = {}
    for row in range(instance.shape[0]):
        for col in range(instance.shape[1]):
            i = int(instance[row, col])
            if i == 0:
                continue
            n, r0, r1, c0, c1 = found.get(i, (0, row, row, col, col))
            found[i] = (n + 1, min(r0, row), max(r1, row), min(c0, col), max(c1, col))
    return {i: MaskExtent(*v) for i, v in found.items()}


class MaskTests(SimpleTestCase):

    def test_background_only(self):
        self.assertEqual(instance_masks(np.zeros((48, 64), dtype=np.uint32)), {})

    def test_constructed_block(self):
        instance = np.zeros((20, 20), dtype=np.uint32)
        instance[9:11, 4:8] = 3
        self.assertEqual(instance_masks(instance), {3: MaskExtent(8, 9, 10, 4, 7)})

    def test_random_masks_match_scan(self):
        rand = np.random.default_rng(3)
        for _ in range(20):
            instance = rand.integers(0, 5, size=(15, 20)).astype(np.uint32)
            instance[rand.random((15, 20)) < 0.5] = 0
            self.assertEqual(instance_masks(instance), scan_extents(instance))

    def test_single_pixel_box(self):
        instance = np.zeros((20, 20), dtype=np.uint32)
        instance[7, 5] = 1
        self.assertEqual(tight_bbox(instance_masks(instance)[1]), (6, 8, 6, 8))

    def test_full_frame_box(self):
        extent = instance_masks(np.ones((480, 640), dtype=np.uint32))[1]
        self.assertEqual(extent.count, 640 * 480)
        self.assertEqual(tight_bbox(extent), (1, 1, 640, 480))

    def test_l_shape_box(self):
        instance = np.zeros((30, 30), dtype=np.uint32)
        instance[5:25, 3:6] = 2
        instance[22:25, 3:18] = 2
        extent = scan_extents(instance)[2]
        self.assertEqual(tight_bbox(instance_masks(instance)[2]), tight_bbox(extent))
        self.assertEqual(tight_bbox(extent), (4, 6, 18, 25))

    def test_empty_mask(self):
        with self.assertRaises(EmptyMask):
            tight_bbox(None)
        with self.assertRaises(EmptyMask):
            tight_bbox(MaskExtent(0, 0, 0, 0, 0))


class ClassifyTests(SimpleTestCase):

    def test_area_classes(self):
        self.assertEqual(classify_area((1, 1, 31, 31)), 'Small')
        self.assertEqual(classify_area((1, 1, 32, 32)), 'Medium')
        self.assertEqual(classify_area((1, 1, 96, 96)), 'Medium')
        self.assertEqual(classify_area((1, 1, 97, 96)), 'Large')
        self.assertEqual(classify_area((11, 21, 41, 51)), 'Small')

    def test_occlusion_classes(self):
        self.assertEqual(classify_occlusion(0.0), 'Slightly')
        self.assertEqual(classify_occlusion(0.0999), 'Slightly')
        self.assertEqual(classify_occlusion(0.1), 'Partly')
        self.assertEqual(classify_occlusion(0.35), 'Partly')
        self.assertEqual(classify_occlusion(0.5), 'Largely')
        self.assertEqual(classify_occlusion(1.0), 'Largely')

    def test_partition(self):
        th = ClassThresholds()
        for rate in np.linspace(0, 1, 101):
            labels = {classify_occlusion(rate, th)}
            self.assertEqual(len(labels), 1)
        areas = {classify_area((1, 1, side, side), th) for side in range(1, 200)}
        self.assertEqual(areas, {'Small', 'Medium', 'Large'})

    def test_threshold_validation(self):
        with self.assertRaises(ConfigError):
            ClassThresholds(small_area=9216, large_area=1024)
        with self.assertRaises(ConfigError):
            ClassThresholds(occ_low=0.5, occ_high=0.35)

    @override_settings(PARALLELEYE={'CLASS_THRESHOLDS': (100, 400, 0.2, 0.5)})
    def test_thresholds_from_settings(self):
        self.assertEqual(ClassThresholds.from_settings(), ClassThresholds(100, 400, 0.2, 0.5))
        self.assertEqual(classify_area((1, 1, 20, 20)), 'Medium')
        self.assertEqual(classify_occlusion(0.15), 'Slightly')


class OcclusionTests(SimpleTestCase):

    def setUp(self):
        self.K = intrinsics_from_fov(90, 64, 64)

    def test_lone_object(self):
        world = scene(quad(-2, 2, -2, 2, 10.0))
        self.assertEqual(occlusion_rate(world, IDENTITY, self.K, SETTINGS, 1), 0.0)

    def test_behind_wall(self):
        world = scene(quad(-1, 1, -1, 1, 10.0), quad(-5, 5, -5, 5, 5.0))
        self.assertEqual(occlusion_rate(world, IDENTITY, self.K, SETTINGS, 1), 1.0)

    def test_half_covered(self):
        # target spans 16 columns; the occluder hides the right 8
        world = scene(quad(-2.5, 2.5, -2.5, 2.5, 10.0), quad(0, 5, -5, 5, 5.0))
        self.assertAlmostEqual(occlusion_rate(world, IDENTITY, self.K, SETTINGS, 1), 0.5, delta=2 / 16)

    def test_solo_render_is_unoccluded(self):
        world = scene(quad(-2.5, 2.5, -2.5, 2.5, 10.0), quad(0, 5, -5, 5, 5.0))
        self.assertEqual(occlusion_rate(world.isolate(1), IDENTITY, self.K, SETTINGS, 1), 0.0)

    def test_fully_out_of_view(self):
        world = scene(quad(-2, 2, -2, 2, -10.0))
        with self.assertRaises(FullyOutOfView):
            occlusion_rate(world, IDENTITY, self.K, SETTINGS, 1)


class TruncationTests(SimpleTestCase):

    def setUp(self):
        self.K = intrinsics_from_fov(90, 64, 64)

    def flag(self, triangles):
        return truncation_flag(scene(triangles), IDENTITY, self.K, 1)

    def test_inside(self):
        self.assertFalse(self.flag(quad(-2.5, 2.5, -2.5, 2.5, 10.0)))

    def test_left_edge(self):
        self.assertTrue(self.flag(quad(-15, -5, -1, 1, 10.0)))

    def test_tangent_to_right_edge(self):
        # extreme vertex projects to u = W, beyond the last pixel centre
        self.assertTrue(self.flag(quad(0, 10, -1, 1, 10.0)))

    def test_near_plane(self):
        p0, p1, p2, p3 = (-1, 2, 0.1), (1, 2, 0.1), (1, 2, 40), (-1, 2, 40)
        self.assertTrue(self.flag(np.array([(p0, p1, p2), (p0, p2, p3)], dtype=np.float64)))

    def test_vehicle_pose_applied(self):
        world = garage(car(1, (0.0, 0.0, 10.0)), car(2, (9.5, 0.0, 10.0)))
        self.assertFalse(truncation_flag(world, IDENTITY, self.K, 1))
        self.assertTrue(truncation_flag(world, IDENTITY, self.K, 2))


class FlowTests(SimpleTestCase):

    def setUp(self):
        self.K = intrinsics_from_fov(90, 64, 64)

    def test_static_scene_static_camera(self):
        world = scene(quad(-20, 20, -20, 20, 10.0), quad(-2, 2, -2, 2, 5.0))
        bufs = rasterize(world, IDENTITY, self.K, SETTINGS)
        flow = compute_flow(world, world, IDENTITY, IDENTITY, self.K, bufs)
        np.testing.assert_array_equal(flow.valid, bufs.instance != 0)
        self.assertTrue(np.all(np.abs(flow.u[flow.valid]) < 1e-9))
        self.assertTrue(np.all(np.abs(flow.v[flow.valid]) < 1e-9))

    def test_camera_translation(self):
        dx, z = 0.2, 10.0
        world = scene(quad(-20, 20, -20, 20, z))
        camera = translation(x=dx)
        bufs = rasterize(world, camera, self.K, SETTINGS)
        flow = compute_flow(world, world, camera, IDENTITY, self.K, bufs)
        self.assertGreater(int(flow.valid.sum()), 60 * 60)
        # moving right makes the scene flow left
        np.testing.assert_allclose(flow.u[flow.valid], -self.K.fx * dx / z, atol=1e-3)
        np.testing.assert_allclose(flow.v[flow.valid], 0.0, atol=1e-3)
        # the right edge has no source pixel in the previous frame
        self.assertFalse(flow.valid[:, -1].any())

    def test_object_translation(self):
        dx, z = 0.5, 9.0
        now = garage(car(1, (dx, 0.0, z)))
        before = garage(car(1, (0.0, 0.0, z)))
        bufs = rasterize(now, IDENTITY, self.K, SETTINGS)
        flow = compute_flow(now, before, IDENTITY, IDENTITY, self.K, bufs)
        np.testing.assert_array_equal(flow.valid, bufs.instance == 1)
        np.testing.assert_allclose(flow.u[flow.valid], self.K.fx * dx / z, atol=1e-3)
        np.testing.assert_allclose(flow.v[flow.valid], 0.0, atol=1e-3)
        prev = rasterize(before, IDENTITY, self.K, SETTINGS)
        self.assertGreaterEqual(warp_consistency(flow, bufs.instance, prev.instance), 0.99)

    def test_missing_previous_pose(self):
        now = garage(car(2, (0.0, 0.0, 9.0)), static=scene(quad(-20, 20, -20, 20, 20.0)).static)
        before = garage(static=now.static)
        bufs = rasterize(now, IDENTITY, self.K, SETTINGS)
        flow = compute_flow(now, before, IDENTITY, IDENTITY, self.K, bufs)
        self.assertFalse(flow.valid[bufs.instance == 2].any())
        self.assertTrue(flow.valid[bufs.instance == 1].all())

    def test_warp_consistency_rigid_scene(self):
        world = scene(quad(-20, 20, -20, 20, 10.0), quad(-2, 2, -2, 2, 5.0), quad(1, 3, -3, 0, 4.0))
        camera = translation(x=0.05, y=-0.03)
        bufs = rasterize(world, camera, self.K, SETTINGS)
        prev = rasterize(world, IDENTITY, self.K, SETTINGS)
        flow = compute_flow(world, world, camera, IDENTITY, self.K, bufs)
        self.assertGreaterEqual(warp_consistency(flow, bufs.instance, prev.instance), 0.99)

    def test_warp_consistency_moving_cars(self):
        K = intrinsics_from_fov(90, 128, 128)
        wall = scene(quad(-40, 40, -40, 40, 30.0)).static
        rand = np.random.default_rng(2017)
        for trial in range(20):
            before, now = [], []
            for k, x in enumerate((-5.0, 0.0, 5.0), start=2):
                position = np.array([x + rand.uniform(-0.5, 0.5), rand.uniform(-3, 3), rand.uniform(8, 14)])
                yaw = rand.uniform(-math.pi, math.pi)
                before.append(replace(car(k, position), yaw=yaw))
                step = rand.uniform(-0.08, 0.08, 3)
                now.append(replace(car(k, position + step), yaw=yaw + rand.uniform(-0.02, 0.02)))
            angle = rand.uniform(-0.01, 0.01)
            camera = translation(*rand.uniform(-0.05, 0.05, 3))
            camera[:3, :3] = [[math.cos(angle), 0, math.sin(angle)], [0, 1, 0], [-math.sin(angle), 0, math.cos(angle)]]
            world, world_prev = garage(*now, static=wall), garage(*before, static=wall)

            bufs = rasterize(world, camera, K, SETTINGS)
            prev = rasterize(world_prev, IDENTITY, K, SETTINGS)
            flow = compute_flow(world, world_prev, camera, IDENTITY, K, bufs)
            on_cars = flow.valid & (bufs.instance > 1)
            self.assertTrue(on_cars.any(), f"scene {trial}")
            self.assertGreaterEqual(warp_consistency(flow, bufs.instance, prev.instance), 0.99, f"scene {trial}")

    def test_nothing_valid(self):
        world = scene()
        bufs = rasterize(world, IDENTITY, self.K, SETTINGS)
        flow = compute_flow(world, world, IDENTITY, IDENTITY, self.K, bufs)
        self.assertFalse(flow.valid.any())
        self.assertEqual(warp_consistency(flow, bufs.instance, bufs.instance), 1.0)


class AnnotateTests(SimpleTestCase):

    def setUp(self):
        self.K = intrinsics_from_fov(90, 128, 128)

    def observe(self, world, **kwargs):
        bufs = rasterize(world, IDENTITY, self.K, SETTINGS)
        return bufs, annotate_frame(world, IDENTITY, self.K, SETTINGS, bufs, **kwargs)

    def test_three_unobstructed_cars(self):
        world = garage(car(1, (-4.0, 0.0, 10.0)), car(2, (0.0, 0.0, 10.0)), car(3, (4.0, 0.0, 10.0)))
        bufs, observations = self.observe(world)
        self.assertEqual([o.instance_id for o in observations], [1, 2, 3])
        extents = scan_extents(bufs.instance)
        for obs in observations:
            self.assertEqual(obs.occlusion_rate, 0.0)
            self.assertEqual(obs.visible_pixels, obs.solo_pixels)
            self.assertEqual(obs.bbox_visible, tight_bbox(extents[obs.instance_id]))
            self.assertEqual(obs.bbox_full, obs.bbox_visible)
            self.assertFalse(obs.truncated)
            self.assertEqual((obs.cls, obs.area_class, obs.occlusion_class), ('car', 'Small', 'Slightly'))

    def test_tiny_car_excluded(self):
        world = garage(car(1, (0.0, 0.0, 10.0), size=0.5))
        bufs = rasterize(world, IDENTITY, self.K, SETTINGS)
        self.assertLess(int((bufs.instance == 1).sum()), 20)
        result = annotate(world, IDENTITY, self.K, SETTINGS, bufs)
        self.assertEqual(result.observations, ())
        self.assertEqual(result.filtered, 1)

    def test_filter_thresholds_configurable(self):
        world = garage(car(1, (0.0, 0.0, 10.0), size=0.5))
        _, observations = self.observe(world, min_visible=1, min_side=1)
        self.assertEqual(len(observations), 1)

    def test_static_classes_not_boxed(self):
        world = scene(quad(-2, 2, -2, 2, 10.0))
        bufs = rasterize(world, IDENTITY, self.K, SETTINGS)
        result = annotate(world, IDENTITY, self.K, SETTINGS, bufs)
        self.assertEqual(result.observations, ())
        self.assertEqual(result.class_pixels, {'building': int((bufs.instance == 1).sum())})

    def test_partly_hidden_car(self):
        wall = scene(quad(0, 6, -6, 6, 6.0)).static[0]
        world = garage(car(2, (0.0, 0.0, 10.0)), static=(wall,))
        _, observations = self.observe(world)
        (obs,) = observations
        self.assertAlmostEqual(obs.occlusion_rate, 0.5, delta=0.1)
        self.assertEqual(obs.occlusion_class, 'Largely')
        self.assertLess(obs.bbox_visible[2], obs.bbox_full[2])
        self.assertEqual(obs.bbox_visible[:2], obs.bbox_full[:2])

    def test_crowded_frame_matches_mask_oracle(self):
        world = small_world('PE03')
        camera = camera_pose(world.rig, world, 0)
        K = intrinsics_from_fov(60, 160, 120)
        settings = RenderSettings(draw_distance=world.preset.draw_distance)
        bufs = rasterize(world, camera, K, settings)
        observations = annotate_frame(world, camera, K, settings, bufs)

        extents = scan_extents(bufs.instance)
        expected = sorted(
            i for i, e in extents.items()
            if world.entity(i).cls in VEHICLE_CLASSES and e.count >= 20
            and e.col_max - e.col_min + 1 >= 2 and e.row_max - e.row_min + 1 >= 2
        )
        self.assertEqual([o.instance_id for o in observations], expected)
        for obs in observations:
            self.assertEqual(obs.bbox_visible, tight_bbox(extents[obs.instance_id]))
            self.assertTrue(0.0 <= obs.occlusion_rate <= 1.0)
            self.assertLessEqual(obs.visible_pixels, obs.solo_pixels)
        for obs in observations[:3]:
            self.assertEqual(occlusion_rate(world.isolate(obs.instance_id), camera, K, settings, obs.instance_id), 0.0)
