import datetime
import math

import numpy as np
from django.test import SimpleTestCase

from mapio.synthetic import synthetic_grid
from worldgen import meshes
from worldgen.classes import CLASS_IDS, SKY_COLOR
from worldgen.scenario import get_preset
from worldgen.world import Entity, World, build_world, camera_pose

from .camera import (
    intrinsics_from_fov, pixel_rays, project_point, transform_points, unproject_point, world_to_camera,
)
from .culling import frustum_cull, select_lod
from .exceptions import BehindCamera, InvalidRenderSettings
from .raster import FrameBuffers, RenderSettings, clip_near, pack_entities, rasterize, row_spans, setup_triangles
from .shading import shade
from .sun import capture_datetime, elevation_degrees, ephemeris_direction, julian, sun_direction
from .weather import apply_weather, fog_factor

IDENTITY = np.eye(4)


def quad(x0, x1, y0, y1, z):
    """Camera-facing rectangle at constant depth z, as two triangles."""
    p0, p1, p2, p3 = (x0, y0, z), (x1, y0, z), (x1, y1, z), (x0, y1, z)
    return np.array([(p0, p3, p2), (p0, p2, p1)], dtype=np.float64)


def scene(*parts, cls='building'):
    """Static-only world; each part is an (n, 3, 3) triangle array becoming one entity."""
    entities = []
    for entity_id, triangles in enumerate(parts, start=1):
        triangles = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
        mesh = meshes.Mesh(triangles.reshape(-1, 3), np.arange(3 * len(triangles)).reshape(-1, 3))
        entities.append(Entity(entity_id, cls, mesh.with_ids(CLASS_IDS[cls], entity_id), color=(100, 150, 200)))
    return World(static=tuple(entities), vehicles=(), agents=(), roads=(), rig=None, preset=None, seed=0)


def raycast(triangles, ids, K, far):
    """Per-pixel nearest front-facing hit by brute-force ray/triangle intersection."""
    rays = pixel_rays(K).reshape(-1, 3)
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    normal = np.cross(b - a, c - a)
    front = np.einsum('ij,ij->i', normal, a) < 0
    with np.errstate(divide='ignore', invalid='ignore'):
        t = np.einsum('ij,ij->i', normal, a)[None, :] / (rays @ normal.T)
        hit = rays[:, None, :] * t[..., None]

        def side(p, q):
            return np.einsum('tk,ptk->pt', normal, np.cross(q - p, hit - p))

        valid = (front[None, :] & np.isfinite(t) & (t >= K.near) & (t <= far)
                 & (side(a, b) >= 0) & (side(b, c) >= 0) & (side(c, a) >= 0))
    depth32 = np.where(valid, t, np.inf).astype(np.float32)
    best = depth32.min(axis=1)
    tied = valid & (depth32 == best[:, None])
    instance = np.where(tied, ids[None, :], np.iinfo(np.int64).max).min(axis=1)
    instance[~valid.any(axis=1)] = 0
    depth = np.where(tied, t, np.inf).min(axis=1)
    return instance.reshape(K.height, K.width), depth.reshape(K.height, K.width)


def random_scene(rand, count):
    centers = np.column_stack([rand.uniform(-6, 6, count), rand.uniform(-6, 6, count), rand.uniform(0.2, 18, count)])
    return centers[:, None, :] + rand.uniform(-4, 4, size=(count, 3, 3))


def small_world(seed=7, preset='PE01'):
    return build_world(synthetic_grid(blocks_x=1, blocks_y=1, seed=seed), get_preset(preset), seed=seed)


class IntrinsicsTests(SimpleTestCase):

    def test_fov_90(self):
        K = intrinsics_from_fov(90, 640, 480)
        self.assertAlmostEqual(K.fx, 320.0)
        self.assertEqual(K.fx, K.fy)
        self.assertEqual((K.cx, K.cy), (320.0, 240.0))
        self.assertEqual(K.near, 0.5)

    def test_fov_60(self):
        self.assertAlmostEqual(intrinsics_from_fov(60, 640, 480).fx, 554.256, delta=1e-3)

    def test_fov_limit(self):
        with self.assertRaises(ValueError):
            intrinsics_from_fov(180, 640, 480)
        with self.assertRaises(ValueError):
            intrinsics_from_fov(0, 640, 480)


class ProjectionTests(SimpleTestCase):

    def setUp(self):
        self.K = intrinsics_from_fov(90, 640, 480)

    def test_optical_axis(self):
        self.assertEqual(project_point(self.K, (0.0, 0.0, 5.0)), (self.K.cx, self.K.cy))

    def test_similar_triangles(self):
        u, v = project_point(self.K, (1.0, 0.0, 2.0))
        self.assertAlmostEqual(u, self.K.cx + 160.0)
        self.assertEqual(v, self.K.cy)

    def test_behind_camera(self):
        with self.assertRaises(BehindCamera):
            project_point(self.K, (0.0, 0.0, 0.1))

    def test_unproject_round_trip(self):
        rand = np.random.default_rng(1)
        for _ in range(200):
            p = (rand.uniform(-20, 20), rand.uniform(-20, 20), rand.uniform(0.5, 300))
            back = unproject_point(self.K, project_point(self.K, p), p[2])
            np.testing.assert_allclose(back, p, rtol=1e-6, atol=1e-9)

    def test_world_to_camera_inverts_pose(self):
        world = small_world()
        pose = camera_pose(world.rig, world, 0)
        np.testing.assert_allclose(world_to_camera(pose) @ pose, np.eye(4), atol=1e-12)
        # the ego camera looks along its forward axis
        ahead = pose[:3, 3] + 10 * pose[:3, 2]
        np.testing.assert_allclose(transform_points(world_to_camera(pose), ahead), (0, 0, 10), atol=1e-9)


class RasterizeTests(SimpleTestCase):

    def setUp(self):
        self.K = intrinsics_from_fov(90, 64, 64)
        self.settings = RenderSettings(draw_distance=100.0)

    def test_empty_world(self):
        bufs = rasterize(scene(), IDENTITY, self.K, self.settings)
        self.assertTrue(np.all(bufs.instance == 0))
        self.assertTrue(np.all(np.isposinf(bufs.depth)))
        self.assertTrue(np.all(bufs.rgb == SKY_COLOR))
        self.assertEqual(bufs.rgb.shape, (64, 64, 3))

    def test_fronto_parallel_quad(self):
        bufs = rasterize(scene(quad(-2.5, 2.5, -2.5, 2.5, 10.0)), IDENTITY, self.K, self.settings)
        covered = bufs.instance == 1
        self.assertEqual(int(covered.sum()), 256)
        self.assertTrue(np.all(bufs.depth[covered] == 10.0))
        self.assertTrue(np.all(np.isinf(bufs.depth[~covered])))
        self.assertTrue(np.all(bufs.classes[covered] == CLASS_IDS['building']))

    def test_nearer_quad_wins(self):
        world = scene(quad(-5, 5, -5, 5, 10.0), quad(-1, 3, -1, 3, 5.0))
        bufs = rasterize(world, IDENTITY, self.K, self.settings)
        near = bufs.instance == 2
        self.assertTrue(near.any())
        self.assertTrue(np.all(bufs.depth[near] == 5.0))
        self.assertTrue(np.all(bufs.depth[bufs.instance == 1] == 10.0))
        # submission order does not matter
        swapped = rasterize(scene(quad(-1, 3, -1, 3, 5.0), quad(-5, 5, -5, 5, 10.0)), IDENTITY, self.K, self.settings)
        np.testing.assert_array_equal(swapped.instance == 1, near)

    def test_depth_tie_goes_to_lower_id(self):
        bufs = rasterize(scene(quad(-1, 1, -1, 1, 4.0), quad(-1, 1, -1, 1, 4.0)), IDENTITY, self.K, self.settings)
        self.assertTrue(np.all(bufs.instance[bufs.instance != 0] == 1))

    def test_back_faces_dropped(self):
        back = quad(-2, 2, -2, 2, 6.0)[:, ::-1]
        bufs = rasterize(scene(back), IDENTITY, self.K, self.settings)
        self.assertTrue(np.all(bufs.instance == 0))

    def test_draw_distance(self):
        bufs = rasterize(scene(quad(-50, 50, -50, 50, 120.0)), IDENTITY, self.K, self.settings)
        self.assertTrue(np.all(bufs.instance == 0))

    def test_shared_edge_covers_each_pixel_once(self):
        # the quad diagonal runs through pixel centres; coverage must be gap- and overlap-free
        bufs = rasterize(scene(quad(-1, 1, -1, 1, 2.0)), IDENTITY, self.K, self.settings)
        self.assertEqual(int((bufs.instance == 1).sum()), 32 * 32)

    def test_adjacent_quads_tile_exactly(self):
        world = scene(quad(-1, 0, -1, 1, 2.0), quad(0, 1, -1, 1, 2.0))
        bufs = rasterize(world, IDENTITY, self.K, self.settings)
        self.assertEqual(int((bufs.instance == 1).sum()), 16 * 32)
        self.assertEqual(int((bufs.instance == 2).sum()), 16 * 32)

    def test_row_spans_follow_thin_triangles(self):
        a, b, c = (-9, -6.9, 10.0), (9, 6.9, 10.0), (9, 6.0, 10.0)
        world = scene(np.array([(a, b, c)]), np.array([(a, c, b)]))
        covered = rasterize(world, IDENTITY, self.K, self.settings).instance != 0
        self.assertGreater(int(covered.sum()), 40)
        packed = pack_entities(world.static)
        s = setup_triangles(packed, np.arange(len(packed)), world_to_camera(IDENTITY), self.K, 100.0)
        self.assertEqual(len(s), 1)
        _, rows, starts, widths = row_spans(s, np.arange(len(s)), s.y0, s.y1)
        candidates = np.zeros_like(covered)
        for row, start, width in zip(rows, starts, widths):
            candidates[row, start:start + width] = True
        self.assertTrue(np.all(candidates[covered]))
        bbox = (s.x1[0] - s.x0[0] + 1) * (s.y1[0] - s.y0[0] + 1)
        self.assertLess(int(candidates.sum()), 0.2 * bbox)

    def test_ray_cast_oracle(self):
        rand = np.random.default_rng(2017)
        far = 16.0
        settings = RenderSettings(draw_distance=far)
        for trial in range(200):
            triangles = random_scene(rand, int(rand.integers(1, 21)))
            ids = np.arange(1, len(triangles) + 1)
            bufs = rasterize(scene(*triangles[:, None]), IDENTITY, self.K, settings)
            instance, depth = raycast(triangles, ids, self.K, far)
            np.testing.assert_array_equal(bufs.instance, instance, err_msg=f"scene {trial}")
            hit = instance != 0
            np.testing.assert_allclose(bufs.depth[hit], depth[hit], rtol=1e-4, err_msg=f"scene {trial}")

    def test_culling_invariance_random(self):
        rand = np.random.default_rng(5)
        for _ in range(50):
            triangles = random_scene(rand, 20) + (0, 0, rand.uniform(-10, 10))
            world = scene(*triangles[:, None])
            on = rasterize(world, IDENTITY, self.K, RenderSettings(draw_distance=12.0, culling=True))
            off = rasterize(scene(*triangles[:, None]), IDENTITY, self.K, RenderSettings(draw_distance=12.0, culling=False))
            for name in ('rgb', 'depth', 'instance', 'classes'):
                np.testing.assert_array_equal(getattr(on, name), getattr(off, name))

    def test_oblique_ground_plane(self):
        # floor 2 m below the camera (camera y points down)
        p0, p1, p2, p3 = (-60, 2, 1), (60, 2, 1), (60, 2, 60), (-60, 2, 60)
        floor = np.array([(p0, p1, p2), (p0, p2, p3)], dtype=np.float64)
        bufs = rasterize(scene(floor), IDENTITY, self.K, self.settings)
        hit = bufs.instance == 1
        self.assertTrue(hit.any())
        rays = pixel_rays(self.K)
        expected = 2.0 / rays[..., 1]
        np.testing.assert_allclose(bufs.depth[hit], expected[hit], rtol=1e-3)


class ClipNearTests(SimpleTestCase):

    def test_one_vertex_behind(self):
        tri = np.array([(0.0, 0.0, 0.0), (1.0, 0.0, 2.0), (0.0, 1.0, 2.0)])
        pieces = clip_near(tri, 1.0)
        self.assertEqual(len(pieces), 2)
        self.assertTrue(all(p[2] >= 1.0 for piece in pieces for p in piece))

    def test_two_vertices_behind(self):
        tri = np.array([(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 2.0)])
        pieces = clip_near(tri, 1.0)
        self.assertEqual(len(pieces), 1)
        np.testing.assert_allclose(pieces[0][0], (0.5, 0.5, 1.0))

    def test_straddling_quad_renders_near_part(self):
        K = intrinsics_from_fov(90, 64, 64)
        p0, p1, p2, p3 = (-1, 2, 0.1), (1, 2, 0.1), (1, 2, 40), (-1, 2, 40)
        floor = np.array([(p0, p1, p2), (p0, p2, p3)], dtype=np.float64)
        bufs = rasterize(scene(floor), IDENTITY, K, RenderSettings(draw_distance=100.0))
        hit = bufs.instance == 1
        self.assertTrue(hit.any())
        self.assertGreaterEqual(float(bufs.depth[hit].min()), 0.5)


class WorldRenderTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.world = small_world()
        cls.camera = camera_pose(cls.world.rig, cls.world, 0)
        cls.K = intrinsics_from_fov(60, 96, 72)

    def render(self, **kwargs):
        kwargs.setdefault('draw_distance', 300.0)
        return rasterize(self.world, self.camera, self.K, RenderSettings(**kwargs))

    def assertSameBuffers(self, a, b):
        for name in ('rgb', 'depth', 'instance', 'classes'):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_culling_invariance(self):
        self.assertSameBuffers(self.render(culling=True), self.render(culling=False))

    def test_culling_invariance_with_lod(self):
        self.assertSameBuffers(self.render(culling=True, lod=True), self.render(culling=False, lod=True))

    def test_band_count_invariance(self):
        one = self.render(bands=1)
        for bands in (2, 5, 72):
            self.assertSameBuffers(one, self.render(bands=bands))

    def test_buffers_consistent(self):
        bufs = self.render()
        hit = bufs.instance != 0
        self.assertTrue(hit.any())
        np.testing.assert_array_equal(hit, np.isfinite(bufs.depth))
        for entity_id in np.unique(bufs.instance[hit]):
            entity = self.world.entity(int(entity_id))
            self.assertTrue(entity.visible)
            self.assertTrue(np.all(bufs.classes[bufs.instance == entity_id] == entity.class_id))
        self.assertTrue(np.all(bufs.classes[~hit] == 0))
        self.assertNotIn(self.world.rig.ego_id, set(np.unique(bufs.instance).tolist()))

    def test_deterministic(self):
        self.assertSameBuffers(self.render(), rasterize(small_world(), self.camera, self.K, RenderSettings(draw_distance=300.0)))

    def test_cloudy_is_ambient(self):
        bufs = self.render(weather='cloudy')
        hit = bufs.instance != 0
        self.assertTrue(hit.any())
        dimmed = apply_weather(bufs, RenderSettings(weather='cloudy'))
        for entity_id in np.unique(bufs.instance[hit]):
            base = np.array(self.world.entity(int(entity_id)).color, dtype=np.float64)
            ambient = np.rint(0.3 * base)
            pixels = bufs.instance == entity_id
            self.assertTrue(np.all(bufs.rgb[pixels] == ambient.astype(np.uint8)))
            self.assertTrue(np.all(dimmed.rgb[pixels] == np.rint(0.7 * ambient).astype(np.uint8)))

    def test_cloudy_is_darker_than_any_sunny_face(self):
        sunny = self.render()
        cloudy = self.render(weather='cloudy')
        hit = sunny.instance != 0
        self.assertTrue(np.all(cloudy.rgb[hit] <= sunny.rgb[hit]))


class CullingTests(SimpleTestCase):

    def setUp(self):
        self.K = intrinsics_from_fov(60, 640, 480)

    def world(self, *positions):
        entities = [
            Entity(i, 'car', meshes.vehicle_lods('car')[0].with_ids(CLASS_IDS['car'], i), position=p)
            for i, p in enumerate(positions, start=1)
        ]
        return World(static=(), vehicles=tuple(entities), agents=(), roads=(), rig=None, preset=None, seed=0)

    def test_behind_camera_excluded(self):
        kept = frustum_cull(self.world((0.0, 0.0, -10.0)), IDENTITY, self.K, 150.0)
        self.assertEqual(kept, [])

    def test_on_axis_included(self):
        kept = frustum_cull(self.world((0.0, 0.0, 75.0)), IDENTITY, self.K, 150.0)
        self.assertEqual([e.id for e in kept], [1])

    def test_beyond_draw_distance_and_sideways(self):
        world = self.world((0.0, 0.0, 400.0), (200.0, 0.0, 10.0), (0.0, 0.0, 20.0))
        self.assertEqual([e.id for e in frustum_cull(world, IDENTITY, self.K, 150.0)], [3])

    def test_select_lod(self):
        self.assertEqual(select_lod(0.0, (50.0, 120.0)), 0)
        self.assertEqual(select_lod(50.0, (50.0, 120.0)), 1)
        self.assertEqual(select_lod(85.0, (50.0, 120.0)), 1)
        self.assertEqual(select_lod(120.0, (50.0, 120.0)), 2)
        with self.assertRaises(ValueError):
            select_lod(-1.0, (50.0, 120.0))


class ShadeTests(SimpleTestCase):
    base = (100, 200, 40)

    def test_perpendicular(self):
        self.assertEqual(shade(CLASS_IDS['car'], (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), self.base), (30, 60, 12))

    def test_aligned(self):
        self.assertEqual(shade(CLASS_IDS['car'], (0.0, 0.0, 1.0), (0.0, 0.0, 1.0), self.base), self.base)

    def test_half(self):
        light = (math.sqrt(3) / 2, 0.0, 0.5)
        rgb = shade(CLASS_IDS['car'], (0.0, 0.0, 1.0), light, self.base)
        for got, base in zip(rgb, self.base):
            self.assertLessEqual(abs(got - 0.65 * base), 1)

    def test_class_colour_default(self):
        self.assertEqual(shade(CLASS_IDS['road'], (0.0, 0.0, 1.0), (0.0, 0.0, 1.0)), (70, 70, 74))


class SunTests(SimpleTestCase):

    def test_noon_zenith(self):
        self.assertAlmostEqual(elevation_degrees(sun_direction(12.0)), 90.0)

    def test_sunrise(self):
        direction = sun_direction(6.0)
        self.assertAlmostEqual(elevation_degrees(direction), 0.0)
        np.testing.assert_allclose(direction, (1.0, 0.0, 0.0), atol=1e-12)

    def test_morning(self):
        self.assertAlmostEqual(elevation_degrees(sun_direction(9.0)), 63.64, delta=0.01)

    def test_sweeps_east_to_west(self):
        self.assertGreater(sun_direction(8.0)[0], 0)
        self.assertLess(sun_direction(16.0)[0], 0)
        self.assertAlmostEqual(elevation_degrees(sun_direction(22.0)), 0.0)
        for t in np.linspace(0, 23.9, 50):
            self.assertAlmostEqual(float(np.linalg.norm(sun_direction(t))), 1.0)

    def test_julian_epoch(self):
        self.assertEqual(julian(2000, 1, 1), 2451544.5)

    def test_ephemeris_beijing_summer_noon(self):
        when = capture_datetime(datetime.date(2017, 6, 21), 12.25, 'Asia/Shanghai')
        direction = ephemeris_direction(when, 39.98, 116.31)
        self.assertAlmostEqual(elevation_degrees(direction), 73.5, delta=1.5)
        self.assertLess(direction[1], 0)
        self.assertAlmostEqual(float(np.linalg.norm(direction)), 1.0)

    def test_ephemeris_night(self):
        when = capture_datetime(datetime.date(2017, 6, 21), 0.5, 'Asia/Shanghai')
        self.assertEqual(ephemeris_direction(when, 39.98, 116.31)[2], 0.0)

    def test_ephemeris_morning_sun_in_east(self):
        when = capture_datetime(datetime.date(2017, 9, 23), 8.0, 'Asia/Shanghai')
        direction = ephemeris_direction(when, 39.98, 116.31)
        self.assertGreater(direction[0], 0.5)
        self.assertGreater(direction[2], 0)

    def test_naive_datetime_rejected(self):
        with self.assertRaises(ValueError):
            ephemeris_direction(datetime.datetime(2017, 6, 21, 12), 39.98, 116.31)

    def test_settings_select_model(self):
        simple = RenderSettings(time_of_day=12.0).sun()
        real = RenderSettings(time_of_day=12.0, sun_model='ephemeris').sun()
        self.assertGreater(simple[2], real[2])


class RenderSettingsTests(SimpleTestCase):

    def test_defaults_from_settings(self):
        settings = RenderSettings()
        self.assertEqual(settings.fog_beta, 0.008)
        self.assertEqual(settings.lod_distances, (50.0, 120.0))
        self.assertEqual(settings.bands, 1)

    def test_validation(self):
        for kwargs in ({'weather': 'snowy'}, {'fog_beta': -1.0}, {'lod_distances': (120.0, 50.0)},
                       {'time_of_day': 24.0}, {'sun_model': 'moon'}, {'timezone': 'Mars/Olympus'}):
            with self.assertRaises(InvalidRenderSettings):
                RenderSettings(**kwargs)


class WeatherTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        K = intrinsics_from_fov(90, 64, 64)
        world = scene(quad(-5, 5, -5, 5, 10.0), quad(-1, 3, -1, 3, 5.0))
        cls.bufs = rasterize(world, IDENTITY, K, RenderSettings(draw_distance=100.0))

    def test_zero_fog_is_identity(self):
        out = apply_weather(self.bufs, RenderSettings(weather='foggy', fog_beta=0.0))
        np.testing.assert_array_equal(out.rgb, self.bufs.rgb)

    def test_fog_factor(self):
        self.assertAlmostEqual(float(fog_factor(np.array([100.0]), 0.01, 150.0)[0]), 0.632, delta=1e-3)
        # background uses the draw distance
        self.assertAlmostEqual(float(fog_factor(np.array([np.inf]), 0.01, 150.0)[0]), 1 - math.exp(-1.5))

    def test_ground_truth_untouched(self):
        before = [self.bufs.depth.copy(), self.bufs.instance.copy(), self.bufs.classes.copy()]
        for weather in ('sunny', 'cloudy', 'rainy', 'foggy'):
            out = apply_weather(self.bufs, RenderSettings(weather=weather, seed=3))
            for got, want in zip((out.depth, out.instance, out.classes), before):
                np.testing.assert_array_equal(got, want)
            for got, want in zip((self.bufs.depth, self.bufs.instance, self.bufs.classes), before):
                np.testing.assert_array_equal(got, want)

    def test_sunny_identity_and_cloudy_dimming(self):
        self.assertIs(apply_weather(self.bufs, RenderSettings()), self.bufs)
        cloudy = apply_weather(self.bufs, RenderSettings(weather='cloudy'))
        np.testing.assert_array_equal(cloudy.rgb, np.rint(self.bufs.rgb * 0.7).astype(np.uint8))

    def test_rain_seeded(self):
        sky = FrameBuffers.empty(320, 240)
        a = apply_weather(sky, RenderSettings(weather='rainy', seed=11))
        b = apply_weather(sky, RenderSettings(weather='rainy', seed=11))
        c = apply_weather(sky, RenderSettings(weather='rainy', seed=12))
        np.testing.assert_array_equal(a.rgb, b.rgb)
        self.assertFalse(np.array_equal(a.rgb, c.rgb))
        self.assertLess(float(a.rgb.mean()), float(sky.rgb.mean()))
