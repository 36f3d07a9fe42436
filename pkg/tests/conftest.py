"""Shared fixtures: cached synthetic scenes, rendered pairs, prepared clouds."""

import math

import numpy as np
import pytest

from geodispose import se3_exp, Twist
from geodispose.pipeline import prepare_cloud, FramePair
from geodispose import synthetic_scenes as scenes


def small_motion() -> "RigidMotion":
    """2 degree / 2 cm true motion used by the rigid-recovery checks."""
    axis = np.array([0.3, 1.0, 0.2])
    axis /= np.linalg.norm(axis)
    direction = np.array([1.0, 0.5, -0.3])
    direction /= np.linalg.norm(direction)
    return se3_exp(Twist(axis * math.radians(2.0), direction * 0.02))


def low_overlap_motion() -> "RigidMotion":
    """42 degree yaw plus 0.35 m lateral shift: ~17% frame overlap."""
    return se3_exp(Twist(np.radians([0.0, 42.0, 0.0]), [0.35, 0.0, 0.1]))


@pytest.fixture(scope="session")
def corner_pair():
    scene = scenes.corner_scene()
    da, db, gt = scenes.make_pair(scene, small_motion())
    return scene, da, db, gt


@pytest.fixture(scope="session")
def ball_pit_pair():
    scene = scenes.ball_pit_scene()
    da, db, gt = scenes.make_pair(scene, small_motion())
    return scene, da, db, gt


@pytest.fixture(scope="session")
def low_overlap_pair():
    scene = scenes.ball_pit_scene()
    da, db, gt = scenes.make_pair(scene, low_overlap_motion())
    return scene, da, db, gt


def clouds_for(scene, depth_a, depth_b):
    k = scene.intrinsics
    return prepare_cloud(depth_a, k), prepare_cloud(depth_b, k)


def pair_of(scene, depth_a, depth_b, gt, stride=1) -> FramePair:
    return FramePair("a", "b", depth_a, depth_b, scene.intrinsics,
                     stride=stride, gt_motion=gt)
