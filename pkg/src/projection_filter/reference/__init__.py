"""Ground-truth and baseline solvers used to assess the projection filter."""
from .grid import DensityGrid
from .kalman import GaussianBelief, KalmanBucy, kalman_bucy_step, linear_system
from .kde import bandwidth_factor, kde_density
from .ks import GridTrajectory, KSSolver, ks_cn_step, ks_fd_step_explicit
from .particle import (ParticleEnsemble, ParticleTrajectory, particle_filter_step, run_particle_filter,
                       systematic_resample)
from .sde import STREAM_PARTICLES, STREAM_SIMULATION, make_rng, simulate_sde

__all__ = [
    "DensityGrid", "GaussianBelief", "KalmanBucy", "kalman_bucy_step", "linear_system", "bandwidth_factor",
    "kde_density", "GridTrajectory", "KSSolver", "ks_cn_step", "ks_fd_step_explicit", "ParticleEnsemble",
    "ParticleTrajectory", "particle_filter_step", "run_particle_filter", "systematic_resample",
    "STREAM_PARTICLES", "STREAM_SIMULATION", "make_rng", "simulate_sde",
]
