"""Ego drivers that speak the environment's action interface.

Rule-based drivers compute an acceleration and translate it into the target
speed that the ego's speed tracker would turn back into that acceleration.
"""
from __future__ import annotations

import numpy as np

from .behavior import AEBParams, IDMParams, aeb_detect, find_lead, idm_accel
from .env import MAX_TARGET_SPEED, encode_target_speed


class ConstantAgent:
    """Always requests the same target speed."""

    def __init__(self, target_speed: float = MAX_TARGET_SPEED, label: str | None = None):
        self.target_speed = target_speed
        self.label = label or f"constant:{target_speed:g}"

    def act(self, obs, env):
        return encode_target_speed(self.target_speed)


class IDMAgent:
    label = "idm"

    def __init__(self, params: IDMParams = IDMParams(v0=MAX_TARGET_SPEED)):
        self.params = params

    def act(self, obs, env):
        ego = env.ego
        lead = find_lead(env.world, ego, self.params.horizon)
        accel = idm_accel(ego.v, lead, self.params)
        return encode_target_speed(ego.v + accel / env.sim.speed_gain)


class AEBAgent:
    """Cruise at the speed limit; request a stop while the detection box is occupied."""

    label = "aeb"

    def __init__(self, params: AEBParams = AEBParams(), cruise: float = MAX_TARGET_SPEED):
        self.params = params
        self.cruise = cruise

    def act(self, obs, env):
        if aeb_detect(env.world, env.ego, self.params):
            return encode_target_speed(0.0)
        return encode_target_speed(self.cruise)


class ActorAgent:
    """Deterministic evaluation of a trained actor network (no exploration noise)."""

    def __init__(self, actor, label: str = "td3"):
        self.actor = actor
        self.label = label

    def act(self, obs, env):
        return np.clip(self.actor.forward(obs), 0.0, 1.0)
