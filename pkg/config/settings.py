import os
from dotenv import load_dotenv

load_dotenv()

# Lab runtime config (all optional)
LAB_WORKERS = int(os.getenv("LAB_WORKERS", "1"))
LAB_OUTPUT_DIR = os.getenv("LAB_OUTPUT_DIR", "output").strip() or "output"
LAB_LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "INFO").upper()
PROJECTION_TOL = float(os.getenv("LAB_PROJECTION_TOL", "1e-9"))
