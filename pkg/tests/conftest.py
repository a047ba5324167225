import numpy as np
import pytest

from sensorium.avatar import Agent
from sensorium.physics import Collider, PhysicsWorld, Plane, RigidBody, Sphere


@pytest.fixture
def flat_world():
    """Ground plane only."""
    world = PhysicsWorld()
    ground = RigidBody("ground", kinematic=True, structural=True)
    world.add_body(ground, [Collider(Plane([0, 1, 0], 0.0), "ground")])
    return world


@pytest.fixture
def agent_world(flat_world):
    """Ground + one animation-mode agent registered with the world."""
    agent = Agent("agent0", position=(0.0, 0.0, 0.0))
    _register(flat_world, agent)
    return flat_world, agent


def _register(world, agent):
    world.add_body(agent.root_body, agent.colliders)
    for side in ("l", "r"):
        world.add_body(agent.hand_bodies[side])
    for hc in agent.hand_colliders:
        world.add_collider(hc)
    world.agent_groups.add(agent.agent_id)
    return agent


@pytest.fixture
def register_agent():
    return _register


def add_ball(world, body_id="ball", position=(0.0, 0.12, 1.0), radius=0.12,
             mass=0.5, color=(0.9, 0.1, 0.1)):
    body = RigidBody(body_id, mass=mass, position=np.asarray(position, float),
                     color=np.asarray(color, float))
    world.add_body(body, [Collider(Sphere(radius), body_id)])
    return body
