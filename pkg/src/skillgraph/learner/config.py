from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 1e-3
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    minibatch_size: int = 1024
    rollout_horizon: int = 32
    episode_length: int = 600
    num_envs: int = 64
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    bound_coef: float = 0.01
    epochs: int = 5
    hidden: tuple[int, ...] = (256, 128, 64, 32)
    init_log_std: float = -0.5
    kl_target: float | None = 0.008
    max_grad_norm: float = 1.0
    reward_scale: float = 0.1
    total_env_steps: int = 2_000_000
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if not 0 < self.clip_epsilon < 1:
            raise ValueError("clip_epsilon must lie in (0, 1)")
        for name in ("minibatch_size", "rollout_horizon", "episode_length", "num_envs", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def batch_size(self) -> int:
        return self.num_envs * self.rollout_horizon

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        known = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in known}
        if "hidden" in kw:
            kw["hidden"] = tuple(kw["hidden"])
        return cls(**kw)


PROFILES: dict[str, TrainerConfig] = {
    # Paper-scale constants, kept for reference; far beyond a desktop CPU.
    "paper": TrainerConfig(
        learning_rate=5e-3, gamma=0.99, minibatch_size=65536, rollout_horizon=32,
        episode_length=3000, num_envs=4096, hidden=(800, 400, 200, 100),
    ),
    "desk": TrainerConfig(entropy_coef=0.01),  # without it the policy narrows onto a jammed pose
    "smoke": TrainerConfig(
        num_envs=16, episode_length=200, minibatch_size=256, hidden=(64, 64),
        total_env_steps=200_000, learning_rate=3e-3, reward_scale=0.1, init_log_std=-0.5,
    ),
}


def profile(name: str, **overrides) -> TrainerConfig:
    try:
        base = PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown trainer profile {name!r}; choose from {sorted(PROFILES)}") from None
    return replace(base, **overrides) if overrides else base
