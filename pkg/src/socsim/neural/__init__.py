from .agent import Environment, NeuralScheduler, episode_seed, train
from .features import build_observation, observation_size
from .model import Adam, PolicyValueNet, actor_critic_loss, sample_masked
from .returns import eim_returns, standard_returns

__all__ = [
    "Environment", "NeuralScheduler", "episode_seed", "train", "build_observation",
    "observation_size", "Adam", "PolicyValueNet", "actor_critic_loss", "sample_masked",
    "eim_returns", "standard_returns",
]
