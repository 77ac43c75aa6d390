from .network import Adam, Network, backward, forward
from .td3 import (LearningCurve, ReplayBuffer, TD3Agent, TD3Config, load_actor, save_actor,
                  td3_update, train)

__all__ = ["Adam", "Network", "backward", "forward", "LearningCurve", "ReplayBuffer",
           "TD3Agent", "TD3Config", "load_actor", "save_actor", "td3_update", "train"]
