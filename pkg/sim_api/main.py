import logging
import math
from datetime import datetime, timezone
from typing import Any, Dict

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Query
from pydantic import ValidationError

from chiral_feedback.dark_states import dark_curve
from chiral_feedback.errors import ConfigError, ParameterError, SimulationError
from chiral_feedback.history import load_history, record_run
from chiral_feedback.models import RunConfig
from chiral_feedback.recipes import figure_recipes, get_recipe
from chiral_feedback.settings import get_settings
from chiral_feedback.sweeps import run_config

logger = logging.getLogger(__name__)

app = FastAPI(
    title="Chiral Feedback Simulation API",
    description="Batch runs of the driven V-atom with waveguide mirror feedback.",
    version=get_settings().app_version,
)


# ==============================================================
#  Service info & presets
# ==============================================================
@app.get("/health")
def get_health():
    return {
        "status": "ok",
        "version": get_settings().app_version,
        "presets": len(figure_recipes()),
    }


@app.get("/presets")
def list_presets():
    return {"presets": sorted(figure_recipes())}


@app.get("/presets/{name}")
def get_preset(name: str):
    try:
        return get_recipe(name).model_dump()
    except ConfigError as e:
        raise HTTPException(status_code=404, detail=str(e))


# ==============================================================
#  Runs
# ==============================================================
@app.post("/runs")
def create_run(payload: Dict[str, Any] = Body(..., description="RunConfig as JSON")):
    """
    Runs one configuration synchronously and returns the result table.
    Invalid configs and physics map to 400; solver failures to 500.
    """
    try:
        config = RunConfig.model_validate(payload)
    except ValidationError as e:
        raise HTTPException(
            status_code=400,
            detail=[f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()],
        )

    try:
        result = run_config(config, threads=get_settings().threads)
    except (ConfigError, ParameterError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except SimulationError as e:
        logger.exception("Simulation run failed")
        raise HTTPException(status_code=500, detail=f"Simulation failed: {e}")

    record_run(config.mode, len(result.rows), None, source="api")
    return {
        "status": "success",
        "mode": result.mode,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "columns": result.columns,
        "rows": result.json_rows(),
        "warnings": result.warnings,
    }


@app.get("/dark-curve")
def get_dark_curve(
    delta: float = Query(0.0, description="Common detuning delta1 = delta2"),
    points: int = Query(181, ge=2, le=10001, description="Phases sampled over [-pi, pi]"),
    gamma: float = Query(1.0, gt=0.0),
):
    phases = np.linspace(-math.pi, math.pi, points)
    rows = [list(row) for row in dark_curve(delta, phases, gamma)]
    return {
        "delta": delta,
        "columns": ["delta", "delta_phi", "omega_dark"],
        "count": len(rows),
        "rows": rows,
    }


@app.get("/runs/history")
def get_run_history():
    return load_history()
