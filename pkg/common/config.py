# config.py
import json
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

PARAMS_FILE = Path(__file__).with_name("pipeline_params.json")

# Store and workers
STORE_DIR = os.getenv("LOOKALIKE_STORE", "store")
DEFAULT_JOBS = int(os.getenv("LOOKALIKE_JOBS", "0")) or (os.cpu_count() or 1)
LOG_LEVEL = os.getenv("LOOKALIKE_LOG_LEVEL", "INFO").upper()
EMBED_ADAPTER = os.getenv("LOOKALIKE_EMBED_ADAPTER", "")

# Package reading
MAX_ENTRY_BYTES = int(os.getenv("LOOKALIKE_MAX_ENTRY_MB", "64")) * 1024 * 1024

# Manifest keys dropped before featurizing (free text or per-build values)
EXCLUDED_MANIFEST_KEYS = ("author", "name", "short_name", "description", "version", "key", "update_url")

# Featurizer / embedder defaults
VALUE_CAP = 10
EMBEDDING_DIM = 768
TOKEN_LIMIT = 512

# Cluster defaults
VARIANCE_TARGET = 0.95
MIN_CLUSTER_SIZE = 5
MIN_SAMPLES = 2

# Mock tracer budgets
MAX_STEPS = 2_000_000
MAX_LOOP_ITERATIONS = 10_000
MAX_CALLBACK_DEPTH = 3
WALL_CLOCK_MS = 5_000
MAX_EVENTS = 200_000
RANDOM_SEED = 1337

# Vetting analytics
NTE_KEYWORDS = ("theme", "wallpaper", "new tab")
KM_SAMPLE_SIZE = 200
KM_SAMPLE_SEED = 7

API_ROOTS = ("chrome", "browser", "navigator")


def load_params(path=None):
    """
    Load pipeline parameters.

    Parameters:
        path: optional JSON file whose keys override the packaged defaults.

    Returns:
        dict of parameters.
    """
    with open(PARAMS_FILE, "r", encoding="utf-8") as f:
        params = json.load(f)
    if path:
        with open(path, "r", encoding="utf-8") as f:
            overrides = json.load(f)
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(params.get(key), dict):
                params[key].update(value)
            else:
                params[key] = value
    params.setdefault("store_dir", STORE_DIR)
    params.setdefault("max_entry_bytes", MAX_ENTRY_BYTES)
    return params
