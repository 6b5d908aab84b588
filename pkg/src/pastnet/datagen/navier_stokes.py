"""Pseudo-spectral 2D vorticity solver on the unit torus.

State is the scalar vorticity w with velocity recovered through the
streamfunction (spectral Poisson solve). Advection is evaluated
pseudo-spectrally with 2/3-rule dealiasing and stepped explicitly; diffusion
is integrated semi-implicitly, so the per-step update is

    w_hat <- (w_hat + dt * (-advection_hat + f_hat)) / (1 + dt * nu * k^2).

The advection DC mode is zeroed each step (transport cannot change the mean),
so zero-mean forcing conserves the spatial mean of vorticity exactly.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, SolverDivergedError
from .container import TrajectoryDataset

__all__ = ["NSEConfig", "SpectralOperators", "nse_step", "random_vorticity", "simulate_nse"]


@dataclass
class NSEConfig:
    grid: int = 64
    viscosity: float = 1e-3
    forcing_amplitude: float = 0.1
    forcing_wavenumber: int = 1
    init_alpha: float = 2.5
    init_tau: float = 7.0
    dt_solver: float = 1e-3
    dt_record: float = 0.05
    n_frames: int = 20
    warmup_steps: int = 0

    def validate(self) -> list[str]:
        problems = []
        if self.grid < 4:
            problems.append(f"grid must be >= 4, got {self.grid}")
        if self.viscosity <= 0:
            problems.append(f"viscosity must be > 0, got {self.viscosity}")
        if self.dt_solver <= 0:
            problems.append(f"dt_solver must be > 0, got {self.dt_solver}")
        if self.dt_record <= 0:
            problems.append(f"dt_record must be > 0, got {self.dt_record}")
        else:
            ratio = self.dt_record / self.dt_solver
            if abs(ratio - round(ratio)) > 1e-9:
                problems.append(
                    f"dt_record={self.dt_record} must be an integer multiple of dt_solver={self.dt_solver}"
                )
        if self.n_frames < 1:
            problems.append(f"n_frames must be >= 1, got {self.n_frames}")
        if self.warmup_steps < 0:
            problems.append(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        return problems

    @property
    def record_every(self) -> int:
        return int(round(self.dt_record / self.dt_solver))


@dataclass
class SpectralOperators:
    """Precomputed wavenumber grids, inverse Laplacian, and dealias mask."""

    kx: np.ndarray
    ky: np.ndarray
    ksq: np.ndarray
    ksq_inv: np.ndarray
    dealias: np.ndarray

    @classmethod
    def build(cls, n: int) -> "SpectralOperators":
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
        kx = np.broadcast_to(k[:, None], (n, n)).copy()
        ky = np.broadcast_to(k[None, :], (n, n)).copy()
        ksq = kx**2 + ky**2
        ksq_inv = np.zeros_like(ksq)
        ksq_inv[ksq > 0] = 1.0 / ksq[ksq > 0]
        kcut = (2.0 / 3.0) * (n // 2) * 2.0 * np.pi
        dealias = ((np.abs(kx) < kcut) & (np.abs(ky) < kcut)).astype(np.float64)
        return cls(kx=kx, ky=ky, ksq=ksq, ksq_inv=ksq_inv, dealias=dealias)


def nse_step(
    w_hat: np.ndarray,
    dt: float,
    nu: float,
    f_hat: np.ndarray,
    ops: SpectralOperators,
) -> np.ndarray:
    """One semi-implicit step of the vorticity equation in spectral space."""
    w_da = w_hat * ops.dealias
    psi_hat = w_da * ops.ksq_inv
    u = np.real(np.fft.ifft2(1j * ops.ky * psi_hat))
    v = np.real(np.fft.ifft2(-1j * ops.kx * psi_hat))
    wx = np.real(np.fft.ifft2(1j * ops.kx * w_da))
    wy = np.real(np.fft.ifft2(1j * ops.ky * w_da))
    adv_hat = np.fft.fft2(u * wx + v * wy) * ops.dealias
    adv_hat[0, 0] = 0.0
    return (w_hat + dt * (-adv_hat + f_hat)) / (1.0 + dt * nu * ops.ksq)


def random_vorticity(n: int, rng: np.random.Generator, alpha: float, tau: float) -> np.ndarray:
    """Gaussian random field with power spectrum ~ (|k|^2 + tau^2)^(-alpha), unit std."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    amplitude = (k2 + tau**2) ** (-alpha / 2.0)
    amplitude[0, 0] = 0.0
    noise = rng.normal(size=(n, n))
    w = np.real(np.fft.ifft2(np.fft.fft2(noise) * amplitude))
    std = w.std()
    return w / std if std > 0 else w


def default_forcing(n: int, amplitude: float, wavenumber: int) -> np.ndarray:
    x = np.arange(n) / n
    grid_x, grid_y = np.meshgrid(x, x, indexing="ij")
    phase = 2.0 * np.pi * wavenumber * (grid_x + grid_y)
    return amplitude * (np.sin(phase) + np.cos(phase))


def _probe_stability(w_hat, cfg: NSEConfig, f_hat, ops) -> None:
    """Step-halving probe: one dt step vs two dt/2 steps must agree roughly."""
    full = nse_step(w_hat, cfg.dt_solver, cfg.viscosity, f_hat, ops)
    half = nse_step(w_hat, cfg.dt_solver / 2, cfg.viscosity, f_hat, ops)
    half = nse_step(half, cfg.dt_solver / 2, cfg.viscosity, f_hat, ops)
    ref = np.abs(np.fft.ifft2(w_hat)).max()
    gap = np.abs(np.fft.ifft2(full - half)).max()
    if not np.isfinite(gap) or gap > 0.5 * max(ref, 1.0):
        raise ConfigurationError(
            f"dt_solver={cfg.dt_solver} looks unstable for grid {cfg.grid} "
            f"(step-halving gap {gap:.3e}); reduce dt_solver"
        )


def simulate_nse(config: NSEConfig, n_trajectories: int, seed: int = 0) -> TrajectoryDataset:
    """Simulate vorticity trajectories, recording every dt_record from t=0.

    Output shape (n_trajectories, n_frames, 1, grid, grid); the first recorded
    frame is the (post-warmup) initial condition.
    """
    problems = config.validate()
    if problems:
        raise ConfigurationError("; ".join(problems))
    n = config.grid
    ops = SpectralOperators.build(n)
    forcing = default_forcing(n, config.forcing_amplitude, config.forcing_wavenumber)
    f_hat = np.fft.fft2(forcing)

    frames = np.zeros((n_trajectories, config.n_frames, 1, n, n), dtype=np.float32)
    for traj in range(n_trajectories):
        rng = np.random.default_rng([seed, traj])
        w = random_vorticity(n, rng, config.init_alpha, config.init_tau)
        w_hat = np.fft.fft2(w)
        if traj == 0:
            _probe_stability(w_hat, config, f_hat, ops)
        for _ in range(config.warmup_steps):
            w_hat = nse_step(w_hat, config.dt_solver, config.viscosity, f_hat, ops)

        for frame in range(config.n_frames):
            if frame > 0:
                for _ in range(config.record_every):
                    w_hat = nse_step(w_hat, config.dt_solver, config.viscosity, f_hat, ops)
            w_phys = np.real(np.fft.ifft2(w_hat))
            if not np.isfinite(w_phys).all():
                raise SolverDivergedError(
                    f"trajectory {traj} diverged by frame {frame} "
                    f"(dt_solver={config.dt_solver}, nu={config.viscosity}); aborted"
                )
            frames[traj, frame, 0] = w_phys.astype(np.float32)

    params = {
        "grid": n,
        "viscosity": config.viscosity,
        "forcing_amplitude": config.forcing_amplitude,
        "forcing_wavenumber": config.forcing_wavenumber,
        "init_alpha": config.init_alpha,
        "init_tau": config.init_tau,
        "dt_solver": config.dt_solver,
        "dt_record": config.dt_record,
        "n_frames": config.n_frames,
        "warmup_steps": config.warmup_steps,
    }
    return TrajectoryDataset(data=frames, generator="nse", params=params, seed=seed)
