"""Named, reproducible parameter presets.

Each preset fixes every physical and sampling parameter (including the
master seed) so that rerunning it reproduces identical files.  Sample
spacing is chosen automatically as a quarter of the two-excitation beat
period, which puts classifier-ready sampling on the stored grid.

Scenario presets:

``fig1``   lossless two-site blockade, J = 0.03, at zero detuning and at
           detuning 0.9 (one deterministic trajectory each).
``fig2``   damped two-site transfer, J = 0.03, gamma = 0.05: the pinned
           one-excitation-per-site population plateaus while the initial
           doubly-excited state drains; negativity + conditional columns.
``fig3``   J = 0.06 below (gamma = 0.02) and above (gamma = 0.06) the
           critical damping; negativity + conditional columns.
``n3``     three sites, initial |3-, G, G>, populations + conditional.
``n4``     four sites, initial |4-, G, G, G>, populations + conditional
           (no negativity: the averaged-state stack would exceed the
           memory budget at this dimension).

Sweep preset:

``fig4``   the critical-damping sweep over J in {0.02, 0.04, 0.06, 0.08}
           at zero detuning, classified from the deterministic
           master-equation trace.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .config import (
    CriticalitySweepConfig,
    ScenarioConfig,
    scenario_from_mapping,
    sweep_from_mapping,
)
from .errors import ConfigError

__all__ = ["PresetBundle", "PRESET_NAMES", "load_preset"]

_BASE_SEED = 20260825


def _scenario(name: str, seed_offset: int, *, n_sites: int, n_max: int,
              hop: float, gamma: float, omega_a: float, initial: str,
              projectors: str, t_end: float, negativity: bool,
              conditional: bool, n_traj: int) -> ScenarioConfig:
    return scenario_from_mapping({
        "model": {"n_sites": n_sites, "n_max": n_max, "hop": hop,
                  "gamma": gamma, "omega_a": omega_a, "omega_c": 0.0},
        "initial": {"labels": initial},
        "grid": {"t_end": t_end, "dt": 0.005, "spacing": "auto"},
        "run": {"n_traj": n_traj, "master_seed": _BASE_SEED + seed_offset,
                "n_threads": 1},
        "observables": {"projectors": projectors, "negativity": negativity,
                        "bipartition_cut": 1, "conditional": conditional},
        "output": {"name": name, "format": "csv"},
    })


def _build_fig1() -> tuple:
    common = dict(n_sites=2, n_max=2, hop=0.03, gamma=0.0, initial="2-, G",
                  projectors="P20, P02, P11", t_end=1500.0, negativity=True,
                  conditional=False, n_traj=1)
    return (
        _scenario("fig1_delta0", 1, omega_a=0.0, **common),
        _scenario("fig1_delta09", 2, omega_a=0.9, **common),
    )


def _build_fig2() -> tuple:
    return (_scenario("fig2", 3, n_sites=2, n_max=2, hop=0.03, gamma=0.05,
                      omega_a=0.0, initial="2-, G", projectors="P20, P02, P11",
                      t_end=1500.0, negativity=True, conditional=True,
                      n_traj=2000),)


def _build_fig3() -> tuple:
    common = dict(n_sites=2, n_max=2, hop=0.06, omega_a=0.0, initial="2-, G",
                  projectors="P20, P02, P11", t_end=150.0, negativity=True,
                  conditional=True, n_traj=2000)
    return (
        _scenario("fig3_below_critical", 4, gamma=0.02, **common),
        _scenario("fig3_above_critical", 5, gamma=0.06, **common),
    )


def _build_n3() -> tuple:
    return (_scenario("n3", 6, n_sites=3, n_max=3, hop=0.03, gamma=0.05,
                      omega_a=0.0, initial="3-, G, G",
                      projectors="P300, P111", t_end=1500.0,
                      negativity=False, conditional=True, n_traj=2000),)


def _build_n4() -> tuple:
    return (_scenario("n4", 7, n_sites=4, n_max=4, hop=0.03, gamma=0.05,
                      omega_a=0.0, initial="4-, G, G, G",
                      projectors="P4000, P1111", t_end=1500.0,
                      negativity=False, conditional=True, n_traj=2000),)


def _build_fig4() -> CriticalitySweepConfig:
    return sweep_from_mapping({
        "sweep": {"j_values": "0.02, 0.04, 0.06, 0.08", "delta": 0.0,
                  "source": "oracle"},
        "model": {"n_max": 2},
        "grid": {"t_end": 150.0, "dt": 0.005},
        "run": {"n_traj": 2000, "master_seed": _BASE_SEED + 8, "n_threads": 1},
        "output": {"name": "fig4", "format": "csv"},
    })


@dataclass(frozen=True)
class PresetBundle:
    """A named preset: either scenario configs or one sweep config."""

    name: str
    kind: str                                   # "scenario" | "sweep"
    scenarios: tuple = ()
    sweep: Optional[CriticalitySweepConfig] = None

    def with_overrides(self, n_traj: Optional[int] = None,
                       master_seed: Optional[int] = None,
                       n_threads: Optional[int] = None) -> "PresetBundle":
        """Apply CLI-style overrides to every contained config."""
        updates = {}
        if n_traj is not None:
            updates["n_traj"] = n_traj
        if master_seed is not None:
            updates["master_seed"] = master_seed
        if n_threads is not None:
            updates["n_threads"] = n_threads
        if not updates:
            return self
        scenarios = tuple(replace(cfg, **updates) for cfg in self.scenarios)
        sweep = replace(self.sweep, **updates) if self.sweep is not None else None
        return PresetBundle(name=self.name, kind=self.kind,
                            scenarios=scenarios, sweep=sweep)


_BUILDERS = {
    "fig1": lambda: PresetBundle("fig1", "scenario", scenarios=_build_fig1()),
    "fig2": lambda: PresetBundle("fig2", "scenario", scenarios=_build_fig2()),
    "fig3": lambda: PresetBundle("fig3", "scenario", scenarios=_build_fig3()),
    "fig4": lambda: PresetBundle("fig4", "sweep", sweep=_build_fig4()),
    "n3": lambda: PresetBundle("n3", "scenario", scenarios=_build_n3()),
    "n4": lambda: PresetBundle("n4", "scenario", scenarios=_build_n4()),
}

PRESET_NAMES = tuple(sorted(_BUILDERS))


def load_preset(name: str) -> PresetBundle:
    """Look up a preset bundle by name."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ConfigError([f"preset: unknown name {name!r}; "
                           f"known: {list(PRESET_NAMES)}"]) from None
    return builder()
