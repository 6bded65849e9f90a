"""
Global configuration for ftsim.

Centralizes project paths; simulation tunables live in ftsim.core.settings.
"""
from __future__ import annotations

import os
from pathlib import Path

# Project root: .../ftsim (two levels above src/ftsim)
PROJECT_ROOT = Path(__file__).resolve().parents[3]

# Inputs
CONFIGS_DIR = Path(os.getenv("FTSIM_CONFIGS_DIR", PROJECT_ROOT / "configs"))

# Outputs
RESULTS_DIR = Path(os.getenv("FTSIM_RESULTS_DIR", PROJECT_ROOT / "results"))

# Report templates (packaged with the sources)
TEMPLATES_DIR = Path(__file__).resolve().parents[1] / "templates"

# Env file read by the CLI
DOTENV_PATH = PROJECT_ROOT / ".env"
