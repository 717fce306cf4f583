"""Constants"""

import os

import dotenv

from janus.tools import str_to_bool

dotenv.load_dotenv(override=True)

# Environment
CONFIG_PATH = os.getenv("JANUS_CONFIG", "config.yaml")
OUTPUT_DIR = os.getenv("JANUS_OUTPUT_DIR", "results")
PROFILE = os.getenv("JANUS_PROFILE", "desk")
JOBS = int(os.getenv("JANUS_JOBS", "1"))
SEED = int(os.getenv("JANUS_SEED", "1234"))
SAMPLE_STRIDE = int(os.getenv("JANUS_SAMPLE_STRIDE", "10"))
LOG_LEVEL = os.getenv("JANUS_LOG_LEVEL", "INFO")
STRICT_CFL = str_to_bool(os.getenv("JANUS_STRICT_CFL", "false"))

# Numerical tolerances
SYMMETRY_TOL = 1e-12
RANK_TOL = 1e-12
SINGULAR_TOL = 1e-300
SINGULAR_CONDITION = 1.0 / 2.220446049250313e-16
SCHUR_ASYMMETRY_TOL = 1e-10
GRID_TOL = 1e-12
INTERFACE_DATA_TOL = 1e-10
CFL_WARNING_FACTOR = 1.05

# Subdomain sides
SIDES = ("left", "right", "bottom", "top")

# Formulation tags
FF_FLM = "FF_fLM"
RR_RLM = "RR_rLM"
RR_FLM = "RR_fLM"
FR_FLM = "FR_fLM"
FR_RLM = "FR_rLM"
FORMULATIONS = (FF_FLM, RR_RLM, RR_FLM, FR_FLM, FR_RLM)

# Single-domain ROM comparison cells
SD_ROM = "SD_ROM"
