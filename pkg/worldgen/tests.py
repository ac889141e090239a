import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from mapio import geometry
from mapio.layout import Layout, make_footprint, make_road
from mapio.synthetic import synthetic_grid

from . import meshes
from .exceptions import NoRoadSpace, ScenarioError, TriangulationFailure
from .forms import ScenarioForm
from .scenario import PRESETS, get_preset, make_rig, scenario_from_config
from .traffic import FOLLOW_LANE, ROTATE_IN_PLACE, lane_point, place_vehicles
from .triangulate import earclip
from .world import build_world, building_height, camera_pose, step, world_manifest

L_SHAPE = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]


def straight_road(length=100.0, lanes=1, width=3.0):
    return make_road([(0.0, 0.0), (length, 0.0)], width, lanes)


def small_world(preset='PE01', seed=7):
    return build_world(synthetic_grid(blocks_x=1, blocks_y=1, seed=seed), get_preset(preset), seed=seed)


def outward(mesh):
    """True when every face normal points away from the mesh centroid."""
    v = mesh.vertices
    a, b, c = (v[mesh.triangles[:, k]] for k in range(3))
    normals = np.cross(b - a, c - a)
    centers = (a + b + c) / 3.0
    return bool(np.all(np.einsum('ij,ij->i', normals, centers - v.mean(axis=0)) > 0))


class ExtrudeFootprintTests(SimpleTestCase):

    def test_unit_square(self):
        mesh = meshes.extrude_footprint(make_footprint([(0, 0), (1, 0), (1, 1), (0, 1)]), 2.0)
        self.assertEqual(len(mesh), 10)

    def test_pentagon(self):
        pentagon = [(math.cos(2 * math.pi * k / 5), math.sin(2 * math.pi * k / 5)) for k in range(5)]
        mesh = meshes.extrude_footprint(make_footprint(pentagon), 5.0)
        self.assertEqual(len(mesh), 13)

    def test_l_shape_roof_area(self):
        fp = make_footprint(L_SHAPE)
        mesh = meshes.extrude_footprint(fp, 3.0)
        self.assertEqual(len(mesh), 2 * 6 + 4)
        roof = mesh.vertices[mesh.triangles][:, :, 2].min(axis=1) == 3.0
        self.assertAlmostEqual(float(mesh.triangle_areas()[roof].sum()), 3.0, delta=3e-6)
        self.assertAlmostEqual(geometry.signed_area(fp.polygon), 3.0)

    def test_prism_is_wound_outward(self):
        self.assertTrue(outward(meshes.extrude_footprint(make_footprint([(0, 0), (4, 0), (4, 3), (0, 3)]), 2.0)))

    def test_rejects_clockwise(self):
        fp = replace(make_footprint([(0, 0), (1, 0), (1, 1), (0, 1)]), polygon=((0, 0), (0, 1), (1, 1), (1, 0)))
        with self.assertRaises(TriangulationFailure):
            meshes.extrude_footprint(fp, 2.0)


class EarclipTests(SimpleTestCase):

    def test_triangle_count_and_winding(self):
        triangles = earclip(L_SHAPE)
        self.assertEqual(len(triangles), 4)
        for i, j, k in triangles:
            self.assertGreater(geometry.signed_area([L_SHAPE[i], L_SHAPE[j], L_SHAPE[k]]), 0)

    def test_collinear_vertex_dropped(self):
        square = [(0, 0), (1, 0), (2, 0), (2, 2), (0, 2)]
        triangles = earclip(square)
        area = sum(geometry.signed_area([square[i], square[j], square[k]]) for i, j, k in triangles)
        self.assertAlmostEqual(area, 4.0)
        self.assertTrue(all(geometry.signed_area([square[i], square[j], square[k]]) > 0 for i, j, k in triangles))

    def test_clockwise_rejected(self):
        with self.assertRaises(TriangulationFailure):
            earclip([(0, 0), (0, 1), (1, 1)])


class BuildingHeightTests(SimpleTestCase):

    def test_levels(self):
        self.assertEqual(building_height({'building:levels': '4'}, 1), 12.0)

    def test_seeded_draw(self):
        height = building_height({}, 1234)
        self.assertTrue(6.0 <= height <= 30.0)
        self.assertEqual(height, building_height({}, 1234))

    def test_invalid_levels_fall_back(self):
        self.assertEqual(building_height({'building:levels': '0'}, 55), building_height({}, 55))
        self.assertEqual(building_height({'building:levels': 'three'}, 55), building_height({}, 55))


class TessellateRoadTests(SimpleTestCase):

    def test_straight(self):
        mesh = meshes.tessellate_road(straight_road(40.0, width=6.0))
        self.assertEqual(len(mesh), 2)
        self.assertAlmostEqual(float(mesh.triangle_areas().sum()), 240.0)
        self.assertTrue(np.all(mesh.vertices[:, 2] == 0.0))

    def test_collinear_points(self):
        road = make_road([(0.0, 0.0), (15.0, 0.0), (40.0, 0.0)], 6.0, 2)
        mesh = meshes.tessellate_road(road)
        self.assertEqual(len(mesh), 4)
        self.assertAlmostEqual(float(mesh.triangle_areas().sum()), 240.0)

    def test_right_angle_bend(self):
        road = make_road([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)], 2.0, 1)
        mesh = meshes.tessellate_road(road)
        outline = [(0, -1), (11, -1), (11, 10), (9, 10), (9, 1), (0, 1)]
        self.assertAlmostEqual(float(mesh.triangle_areas().sum()), geometry.signed_area(outline), delta=1e-6)

    def test_faces_up(self):
        mesh = meshes.tessellate_road(make_road([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)], 2.0, 1))
        v = mesh.vertices
        a, b, c = (v[mesh.triangles[:, k]] for k in range(3))
        self.assertTrue(np.all(np.cross(b - a, c - a)[:, 2] > 0))


class VehicleMeshTests(SimpleTestCase):

    def test_lods_wound_outward(self):
        for vehicle_class in ('car', 'bus', 'truck'):
            detail, hull, bbox = meshes.vehicle_lods(vehicle_class)
            self.assertTrue(outward(hull))
            self.assertTrue(outward(bbox))
            self.assertEqual(len(bbox), 12)
            self.assertGreater(len(detail), len(bbox))

    def test_bbox_matches_dimensions(self):
        length, width, height = meshes.VEHICLE_DIMENSIONS['bus']
        lo, hi = meshes.vehicle_lods('bus')[2].bounds()
        np.testing.assert_allclose(hi - lo, (length, width, height - meshes.GROUND_CLEARANCE))

    def test_rotated_box(self):
        mesh = meshes.rotated_box((5.0, 5.0), (4.0, 1.0, 1.0), math.pi / 2)
        lo, hi = mesh.bounds()
        np.testing.assert_allclose(lo, (4.5, 3.0, 0.0), atol=1e-12)
        np.testing.assert_allclose(hi, (5.5, 7.0, 1.0), atol=1e-12)


class PlaceVehiclesTests(SimpleTestCase):

    def gaps(self, agents, length):
        spans = sorted(
            (a.arc_position - meshes.VEHICLE_DIMENSIONS[a.vehicle_class][0] / 2,
             a.arc_position + meshes.VEHICLE_DIMENSIONS[a.vehicle_class][0] / 2)
            for a in agents
        )
        gaps = [b[0] - a[1] for a, b in zip(spans, spans[1:])]
        gaps.append(length - spans[-1][1] + spans[0][0])
        return gaps

    def test_sparse_gaps(self):
        agents = place_vehicles([straight_road()], 'sparse', 3)
        self.assertTrue(agents)
        self.assertGreaterEqual(min(self.gaps(agents, 100.0)), 8.0 - 1e-9)

    def test_sparse_gap_over_seeds(self):
        for seed in range(100):
            agents = place_vehicles([straight_road()], 'sparse', seed)
            self.assertGreaterEqual(min(self.gaps(agents, 100.0)), 8.0 - 1e-9, seed)

    def test_dense_gaps(self):
        gaps = self.gaps(place_vehicles([straight_road()], 'dense', 3), 100.0)
        self.assertTrue(all(g >= 0.5 - 1e-9 for g in gaps))
        self.assertTrue(all(g <= 2.0 + 1e-9 for g in gaps[:-1]))

    def test_dense_outnumbers_sparse(self):
        for seed in range(10):
            sparse = place_vehicles([straight_road()], 'sparse', seed)
            dense = place_vehicles([straight_road()], 'dense', seed)
            self.assertGreater(len(dense), len(sparse))

    def test_no_roads(self):
        self.assertEqual(place_vehicles([], 'sparse', 1), [])

    def test_short_lane_skipped(self):
        with self.assertLogs('worldgen.traffic', 'WARNING'):
            agents = place_vehicles([straight_road(3.0), straight_road(100.0)], 'sparse', 1)
        self.assertTrue(agents)
        self.assertTrue(all(a.road == 1 for a in agents))

    def test_deterministic_and_valid(self):
        roads = [straight_road(200.0, lanes=3, width=9.0)]
        first = place_vehicles(roads, 'sparse', 11)
        self.assertEqual(first, place_vehicles(roads, 'sparse', 11))
        for agent in first:
            self.assertTrue(0 <= agent.arc_position < 200.0)
            self.assertIn(agent.vehicle_class, ('car', 'bus', 'truck'))
            self.assertTrue(5.0 <= agent.speed <= 15.0)
        self.assertEqual(len({a.entity_id for a in first}), len(first))

    def test_rotating_agents_spin(self):
        agents = place_vehicles([straight_road()], 'sparse', 2, behavior=ROTATE_IN_PLACE)
        for agent in agents:
            self.assertEqual(agent.speed, 0.0)
            self.assertTrue(0.3 <= abs(agent.spin_rate) <= 1.2)


class LanePointTests(SimpleTestCase):

    def test_start(self):
        (x, y), (tx, ty) = lane_point(make_road([(1.0, 2.0), (1.0, 12.0)], 3.0, 1), 0, 0.0)
        self.assertEqual((x, y), (1.0, 2.0))
        self.assertEqual((tx, ty), (0.0, 1.0))

    def test_wraps(self):
        road = straight_road(50.0)
        self.assertEqual(lane_point(road, 0, 50.0), lane_point(road, 0, 0.0))
        self.assertEqual(lane_point(road, 0, -10.0), lane_point(road, 0, 40.0))

    def test_midpoint(self):
        (x, y), tangent = lane_point(make_road([(0.0, 0.0), (30.0, 40.0)], 3.0, 1), 0, 25.0)
        self.assertAlmostEqual(x, 15.0, delta=1e-9)
        self.assertAlmostEqual(y, 20.0, delta=1e-9)
        self.assertAlmostEqual(math.hypot(*tangent), 1.0)

    def test_lane_offset(self):
        road = straight_road(50.0, lanes=2, width=6.0)
        (_, y0), _ = lane_point(road, 0, 10.0)
        (_, y1), _ = lane_point(road, 1, 10.0)
        self.assertAlmostEqual(y0, -1.5)
        self.assertAlmostEqual(y1, 1.5)

    def test_polyline_corner(self):
        road = make_road([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)], 3.0, 1)
        (x, y), tangent = lane_point(road, 0, 15.0)
        self.assertAlmostEqual(x, 10.0)
        self.assertAlmostEqual(y, 5.0)
        self.assertEqual(tangent, (0.0, 1.0))


class ScenarioTests(SimpleTestCase):

    def test_presets(self):
        pe01, pe02, pe03 = PRESETS['PE01'], PRESETS['PE02'], PRESETS['PE03']
        np.testing.assert_allclose(np.degrees(pe01.yaw_offsets), [0, 15, -15, 30, -30])
        np.testing.assert_allclose(np.degrees(pe02.yaw_offsets), [90, -90])
        np.testing.assert_allclose(np.degrees(pe03.yaw_offsets), [0])
        self.assertEqual((pe01.traffic_density, pe01.per_frame_color_change, pe01.rotate_vehicles), ('sparse', False, False))
        self.assertEqual((pe02.traffic_density, pe02.per_frame_color_change, pe02.rotate_vehicles), ('sparse', False, True))
        self.assertEqual((pe03.traffic_density, pe03.per_frame_color_change, pe03.rotate_vehicles), ('dense', True, False))

    def test_pe01_sees_furthest(self):
        self.assertEqual(PRESETS['PE01'].draw_distance, 300.0)
        self.assertGreater(PRESETS['PE01'].draw_distance, PRESETS['PE02'].draw_distance)
        self.assertGreater(PRESETS['PE01'].draw_distance, PRESETS['PE03'].draw_distance)

    def test_sequence_conditions_cycle(self):
        preset = PRESETS['PE01']
        self.assertEqual(preset.sequence_conditions(0)[:2], ('sunny', 12.0))
        self.assertEqual(preset.sequence_conditions(4)[0], 'sunny')
        self.assertEqual(preset.sequence_conditions(4)[1], 17.0)

    def test_unknown_preset(self):
        with self.assertRaises(ScenarioError):
            get_preset('PE04')

    def test_rig_validation(self):
        with self.assertRaises(ScenarioError):
            make_rig(PRESETS['PE01'], 1, fov_h=180.0)
        with self.assertRaises(ScenarioError):
            make_rig(PRESETS['PE01'], 1, resolution=(8, 480))
        rig = make_rig(PRESETS['PE03'], 1)
        self.assertEqual((rig.height, rig.fov_h, rig.resolution), (1.5, 60.0, (640, 480)))


class ScenarioFormTests(SimpleTestCase):

    def test_preset_override(self):
        form = ScenarioForm({'preset': 'PE02', 'draw_distance': 90})
        self.assertTrue(form.is_valid(), form.errors)
        preset = scenario_from_config(form.cleaned_data)
        self.assertEqual(preset.name, 'custom')
        self.assertEqual(preset.draw_distance, 90.0)
        self.assertTrue(preset.rotate_vehicles)

    def test_custom_scenario(self):
        form = ScenarioForm({'yaw_offsets': [0, 45], 'traffic_density': 'dense', 'draw_distance': 80})
        self.assertTrue(form.is_valid(), form.errors)
        preset = scenario_from_config(form.cleaned_data)
        self.assertAlmostEqual(preset.yaw_offsets[1], math.pi / 4)
        self.assertFalse(preset.per_frame_color_change)

    def test_custom_scenario_needs_density(self):
        form = ScenarioForm({'yaw_offsets': [0]})
        self.assertTrue(form.is_valid(), form.errors)
        with self.assertRaises(ScenarioError):
            scenario_from_config(form.cleaned_data)

    def test_invalid_fields(self):
        self.assertFalse(ScenarioForm({'preset': 'PE02', 'weathers': ['snowy']}).is_valid())
        self.assertFalse(ScenarioForm({'preset': 'PE02', 'times_of_day': [25]}).is_valid())
        self.assertFalse(ScenarioForm({'preset': 'PE02', 'resolution': [640]}).is_valid())
        self.assertFalse(ScenarioForm({'traffic_density': 'dense'}).is_valid())


class WorldTests(SimpleTestCase):

    def test_deterministic_build(self):
        a, b = small_world(seed=3), small_world(seed=3)
        self.assertEqual(world_manifest(a), world_manifest(b))
        self.assertEqual(a.agents, b.agents)
        for ea, eb in zip(a.entities, b.entities):
            self.assertEqual((ea.id, ea.cls, ea.position, ea.yaw, ea.color), (eb.id, eb.cls, eb.position, eb.yaw, eb.color))
            np.testing.assert_array_equal(ea.mesh.vertices, eb.mesh.vertices)
            np.testing.assert_array_equal(ea.mesh.triangles, eb.mesh.triangles)

    def test_unique_ids_and_ego(self):
        world = small_world()
        ids = [e.id for e in world.entities]
        self.assertEqual(len(ids), len(set(ids)))
        ego = world.entity(world.rig.ego_id)
        self.assertFalse(ego.visible)
        self.assertEqual(ego.cls, 'car')
        for entity in world.entities:
            self.assertEqual(entity.mesh.instance_id, entity.id)
            self.assertEqual(entity.mesh.class_id, entity.class_id)

    def test_manifest(self):
        world = small_world()
        manifest = world_manifest(world)
        self.assertEqual(manifest['preset'], 'PE01')
        self.assertEqual(manifest['entities']['road'], 4)
        self.assertEqual(manifest['entities']['ground'], 1)
        self.assertAlmostEqual(manifest['total_lane_length'], 4 * 3 * 89.0)
        self.assertEqual(manifest['entity_count'], len(world.entities) - 1)

    def test_conservation_under_step(self):
        world = small_world('PE03')
        ids = [e.id for e in world.entities]
        for _ in range(5):
            world = step(world)
            self.assertEqual([e.id for e in world.entities], ids)
        self.assertEqual(world.frame, 5)

    def test_follow_lane_advance(self):
        world = small_world()
        target = next(a for a in world.agents if a.behavior == FOLLOW_LANE)
        agents = tuple(replace(a, speed=10.0) if a is target else a for a in world.agents)
        stepped = step(replace(world, agents=agents), 0.1)
        moved = next(a for a in stepped.agents if a.entity_id == target.entity_id)
        advance = (moved.arc_position - target.arc_position) % 89.0
        self.assertAlmostEqual(advance, 1.0, delta=1e-9)

    def test_rotate_in_place(self):
        world = small_world('PE02')
        target = next(a for a in world.agents if a.behavior == ROTATE_IN_PLACE)
        agents = tuple(replace(a, spin_rate=math.pi) if a is target else a for a in world.agents)
        before = world.entity(target.entity_id).yaw
        stepped = step(replace(world, agents=agents), 1.0)
        self.assertAlmostEqual(stepped.entity(target.entity_id).yaw - before, math.pi)
        self.assertEqual(stepped.entity(target.entity_id).position, world.entity(target.entity_id).position)

    def test_step_rejects_non_positive_dt(self):
        with self.assertRaises(ValueError):
            step(small_world(), 0.0)

    def test_pe03_recolors_every_frame(self):
        def colors(w):
            return [e.color for e in w.vehicles if e.visible]
        world = small_world('PE03')
        one, two = step(world), step(step(world))
        self.assertNotEqual(colors(one), colors(two))
        self.assertEqual(colors(step(small_world('PE03'))), colors(one))

    def test_colors_fixed_without_recolor(self):
        world = small_world('PE01')
        self.assertEqual([e.color for e in world.vehicles], [e.color for e in step(world).vehicles])

    def test_ego_headway(self):
        world = small_world('PE03')
        ego = next(a for a in world.agents if a.entity_id == world.rig.ego_id)
        for agent in world.agents:
            if agent.road == ego.road and agent.lane == ego.lane and agent is not ego:
                self.assertGreater(agent.arc_position - ego.arc_position, 15.0)
                self.assertEqual(agent.speed, ego.speed)

    def test_isolate(self):
        world = small_world()
        vehicle = world.vehicles[0]
        solo = world.isolate(vehicle.id)
        self.assertEqual([e.id for e in solo.entities], [vehicle.id])
        self.assertEqual(len(world.without([vehicle.id]).entities), len(world.entities) - 1)

    def test_no_roads(self):
        with self.assertRaises(ScenarioError):
            build_world(Layout(roads=[], footprints=[]), PRESETS['PE01'])


class CameraPoseTests(SimpleTestCase):

    def setUp(self):
        world = small_world()
        ego = world.entity(world.rig.ego_id)
        vehicles = tuple(replace(e, position=(0.0, 0.0, 0.0), yaw=0.0) if e is ego else e for e in world.vehicles)
        self.world = replace(world, vehicles=vehicles)
        self.rig = replace(world.rig, yaw_offsets=(0.0, math.pi / 2, math.radians(15)))

    def test_forward(self):
        pose = camera_pose(self.rig, self.world, 0)
        np.testing.assert_allclose(pose[:3, 3], (0.0, 0.0, 1.5))
        np.testing.assert_allclose(pose[:3, 2], (1.0, 0.0, 0.0), atol=1e-12)
        # right-handed rotation
        self.assertAlmostEqual(np.linalg.det(pose[:3, :3]), 1.0)

    def test_side_offset(self):
        np.testing.assert_allclose(camera_pose(self.rig, self.world, 1)[:3, 2], (0.0, 1.0, 0.0), atol=1e-12)

    def test_angle_addition(self):
        ego = self.world.entity(self.rig.ego_id)
        vehicles = tuple(replace(e, yaw=math.radians(30)) if e is ego else e for e in self.world.vehicles)
        pose = camera_pose(self.rig, replace(self.world, vehicles=vehicles), 2)
        forward = pose[:3, 2]
        self.assertAlmostEqual(math.atan2(forward[1], forward[0]), math.radians(45), delta=1e-9)
        self.assertEqual(forward[2], 0.0)

    def test_index_out_of_range(self):
        with self.assertRaises(IndexError):
            camera_pose(self.rig, self.world, 3)
