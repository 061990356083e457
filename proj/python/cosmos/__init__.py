"""World-model-infused planning and execution over simulated tool servers."""

from ._cosmos import (
    SPEC_FORMAT,
    TRAJ_FORMAT,
    CosmosError,
    SimEnv,
    WorldModel,
    aggregate_groups,
    decode_trajectory,
    encode_run,
    execution_quality,
    make_world_model,
    normalize_avg_calls,
    overall_new,
    overall_original,
    round1,
    run_wm_agent,
)

__all__ = [
    "SPEC_FORMAT",
    "TRAJ_FORMAT",
    "CosmosError",
    "SimEnv",
    "WorldModel",
    "aggregate_groups",
    "decode_trajectory",
    "encode_run",
    "execution_quality",
    "make_world_model",
    "normalize_avg_calls",
    "overall_new",
    "overall_original",
    "round1",
    "run_wm_agent",
]
