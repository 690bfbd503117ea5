"""Built-in run configurations that regenerate the data behind the standard figure set."""
import math
from typing import Dict

from .errors import ConfigError
from .models import GridAxis, OutputOptions, RunConfig, StepSettings, SystemParams, TimeBinConfig

PHASE_AXIS = GridAxis(name="delta_phi", start=-math.pi, stop=math.pi, points=81)


def figure_recipes() -> Dict[str, RunConfig]:
    return {
        # steady-state purity, occupations and energy over (omega, delta_phi) at zero detuning
        "fig4a": RunConfig(
            mode="sweep",
            params=SystemParams(),
            grid=[GridAxis(name="omega", start=0.0, stop=4.0, points=81), PHASE_AXIS],
        ),
        "fig4-delta1": RunConfig(
            mode="sweep",
            params=SystemParams(delta1=1.0, delta2=1.0),
            grid=[GridAxis(name="omega", start=0.0, stop=4.0, points=81), PHASE_AXIS],
        ),
        # long delay: Rabi oscillation until the first photon returns at t = tau
        "fig5": RunConfig(
            mode="mps",
            params=SystemParams(omega=1.0, tau=10.0),
            time_bins=TimeBinConfig(dt=0.02, t_final=20.0),
        ),
        "fig6": RunConfig(
            mode="sweep",
            engine="mps",
            params=SystemParams(omega=2.0),
            grid=[
                GridAxis(name="tau", values=[0.0, 0.25, 0.5]),
                GridAxis(name="delta_phi", start=-math.pi, stop=math.pi, points=129),
            ],
            time_bins=TimeBinConfig(dt=0.01, t_final=60.0, stop_at_steady=True),
        ),
        "fig7a": RunConfig(
            mode="sweep",
            params=SystemParams(gamma_loss=0.05),
            grid=[GridAxis(name="omega", start=0.0, stop=4.0, points=81), PHASE_AXIS],
        ),
        "fig7c": RunConfig(
            mode="sweep",
            params=SystemParams(omega=2.0),
            grid=[GridAxis(name="gamma_loss", start=0.0, stop=0.1, points=21), PHASE_AXIS],
        ),
        "fig8": RunConfig(
            mode="sweep",
            params=SystemParams(omega=2.0),
            grid=[GridAxis(name="eta", start=0.5, stop=1.0, points=11), PHASE_AXIS],
        ),
        "dark-curve": RunConfig(
            mode="dark-curve",
            grid=[GridAxis(name="delta_phi", start=-math.pi, stop=math.pi, points=181)],
        ),
        "relaxation": RunConfig(
            mode="evolve",
            params=SystemParams(omega=1.0),
            steps=StepSettings(dt=0.01, t_final=40.0, sample_every=10),
            output=OutputOptions(format="csv"),
        ),
    }


def get_recipe(name: str) -> RunConfig:
    recipes = figure_recipes()
    if name not in recipes:
        raise ConfigError(f"Unknown preset '{name}'", [f"available: {', '.join(sorted(recipes))}"])
    return recipes[name]
