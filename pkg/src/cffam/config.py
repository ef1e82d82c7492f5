"""Tolerances, truncation bounds and experiment sizes in one place.

Acceptance tests read these values; a JSON file can override any field.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class Config:
    # truncation of Euler products and moment sums
    prime_bound: int = 10**6
    c2_prime_bound: int = 10**5
    # largest |z| accepted by log_moment
    z_cap: float = 40.0
    # bisection on L'(kappa)
    kappa_tol: float = 1e-9
    kappa_bracket: tuple[float, float] = (1e-6, 200.0)
    # class numbers
    l1_exact_cap: int = 10**7
    rounding_guard: float = 0.25
    rounding_headroom: float = 0.05
    # Monte Carlo
    mc_samples: int = 10**7
    mc_exact_primes: int = 1000  # primes below this are drawn exactly
    mc_chunk: int = 10**6
    seed: int = 20240601
    # experiment grids
    density_x: tuple[int, ...] = (10**5, 10**6, 10**7)
    moment_x: int = 10**7
    moment_z: tuple[float, ...] = (1.0, -1.0, 2.0, -2.0)
    census_x_cap: int = 10**8
    tau_grid: tuple[float, ...] = (1.0, 1.2, 1.5, 2.0, 2.5, 3.0, 4.0)
    # acceptance tolerances
    density_rel_tol: float = 0.01
    char_avg_tol: float = 0.01
    moment_tol_1: float = 0.01
    moment_tol_2: float = 0.03
    ks_tol: float = 0.05
    phi_mc_rel_tol: float = 0.10
    phi_asym_band: tuple[float, float] = (0.65, 1.35)
    c0_tol: float = 5e-4
    c2_catalan_tol: float = 1e-2
    c2_yokoi_tol: float = 1e-3
    c2_closed_tol: float = 1e-2
    census_band: tuple[float, float] = (0.75, 1.25)
    # perturbation guard |Phi(e^-l tau)/Phi(tau) - 1| <= K l e^tau, K frozen
    perturbation_K: float = 1.0

    def to_json(self) -> dict:
        return asdict(self)


def load_config(path: str | Path | None = None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    data = json.loads(Path(path).read_text())
    known = {f.name: f for f in fields(Config)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return replace(cfg, **coerced)


DEFAULT = Config()
