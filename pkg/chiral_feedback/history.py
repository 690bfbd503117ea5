import os
import json
import logging
from datetime import datetime, timezone
from typing import Dict, List, Optional

from .settings import get_settings

logger = logging.getLogger(__name__)


# ==============================================================
#  Run History (Safe Save/Load)
# ==============================================================
def load_history(path: Optional[str] = None) -> Dict[str, List[dict]]:
    """Load run history grouped by mode; an unreadable file counts as empty."""
    path = path or get_settings().history_path
    if not os.path.exists(path):
        return {}

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            logger.warning(f"Ignoring malformed run history in {path}")
            return {}
        return data
    except Exception as e:
        logger.warning(f"Failed to read run history {path}: {e}")
        return {}


def save_history(entry: dict, path: Optional[str] = None, limit: Optional[int] = None) -> None:
    """Append an entry under its mode, keeping only the newest ``limit`` per mode."""
    settings = get_settings()
    path = path or settings.history_path
    limit = limit or settings.history_limit
    try:
        history = load_history(path)
        mode = entry.get("mode", "unknown")
        history.setdefault(mode, []).append(entry)
        history[mode] = history[mode][-limit:]

        with open(path, "w", encoding="utf-8") as f:
            json.dump(history, f, indent=2)
    except Exception as e:
        logger.warning(f"Failed to save run history: {e}")


def record_run(mode: str, row_count: int, output_path: Optional[str], source: str = "cli", **extra) -> dict:
    entry = {
        "mode": mode,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "rows": row_count,
        "output": output_path,
        "source": source,
        **extra,
    }
    save_history(entry)
    return entry
