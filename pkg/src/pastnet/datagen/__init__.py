"""Synthetic trajectory generators and the on-disk container format."""

from .bounce import gen_bouncing
from .container import TrajectoryDataset, read_dataset, write_dataset
from .navier_stokes import NSEConfig, simulate_nse
from .shallow_water import SWEConfig, simulate_swe

__all__ = [
    "TrajectoryDataset",
    "read_dataset",
    "write_dataset",
    "gen_bouncing",
    "NSEConfig",
    "simulate_nse",
    "SWEConfig",
    "simulate_swe",
]
