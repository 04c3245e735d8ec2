"""Run a whole configured experiment: one record per drive phase plus spin-pulse runs."""

from __future__ import annotations

import cmath
from concurrent.futures import ThreadPoolExecutor

from .config import TomographyConfig
from .measurement import STREAM_PHASE, STREAM_PULSE, RngSpec, analytic_record, cutoff_margin, sample_events
from .states import SpinRotation, apply_spin_rotation
from .tomography import phase_grid


def sim_cutoff(cfg: TomographyConfig) -> int:
    return max(cfg.n, cfg.state_cutoff + cutoff_margin(cfg.state_cutoff, cfg.alpha_mod))


def simulate(cfg: TomographyConfig, replicate: int = 0, workers: int | None = None, exact: bool | None = None):
    """Records for every phase and pulse of ``cfg``.

    Monte-Carlo runs draw from per-run streams, so ``workers`` changes only
    wall time, never the output.
    """
    exact = cfg.exact_mode if exact is None else exact
    state = cfg.true_state()
    kmax = sim_cutoff(cfg)
    rng = RngSpec(cfg.seed, replicate)
    grid = phase_grid(cfg.phases)

    def phase_run(j):
        alpha = cfg.alpha_mod * cmath.exp(1j * grid[j])
        if exact:
            return analytic_record(state, alpha, cfg.eta, kmax, phase_index=j, phase=float(grid[j]))
        return sample_events(state, alpha, cfg.eta, cfg.events, rng.generator(j, STREAM_PHASE), kmax,
                             phase_index=j, phase=float(grid[j]))

    def pulse_run(i):
        pulse = cfg.spin_pulses[i]
        rotated = apply_spin_rotation(state, SpinRotation(pulse["chi"], pulse["phi_d"]))
        if exact:
            rec = analytic_record(rotated, 0.0, cfg.eta, kmax, phase_index=i, phase=0.0)
        else:
            rec = sample_events(rotated, 0.0, cfg.eta, cfg.events, rng.generator(i, STREAM_PULSE), kmax,
                                phase_index=i, phase=0.0)
        rec.chi = float(pulse["chi"])
        rec.phi_d = float(pulse["phi_d"])
        return rec

    with ThreadPoolExecutor(max_workers=workers) as pool:
        phase_recs = list(pool.map(phase_run, range(cfg.phases)))
        pulse_recs = list(pool.map(pulse_run, range(len(cfg.spin_pulses))))
    return phase_recs + pulse_recs
