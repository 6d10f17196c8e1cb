from skillgraph.physics.env import EnvConfig, EnvState, PlanarEnv, check_stagnation
from skillgraph.physics.model import ContactParams, Joint, Link, RobotModel, five_link, single_link

__all__ = [
    "ContactParams", "EnvConfig", "EnvState", "Joint", "Link", "PlanarEnv", "RobotModel",
    "check_stagnation", "five_link", "single_link",
]
