import os

# Numeric match tolerance, as a fraction of the normalized feature range
DEFAULT_TAU = float(os.getenv("TWIN_TAU", "0.1"))

# Exceptionality threshold for hurdle tests
DEFAULT_ALPHA = float(os.getenv("TWIN_ALPHA", "0.05"))

# Case-based counterfactual search
MAX_ATTEMPTS = int(os.getenv("TWIN_MAX_ATTEMPTS", "50"))
MAX_DIFF = 2

# Gradient baseline: lambda doubles every WACHTER_LAMBDA_EVERY steps
WACHTER_LAMBDA = float(os.getenv("TWIN_WACHTER_LAMBDA", "0.1"))
WACHTER_LAMBDA_EVERY = int(os.getenv("TWIN_WACHTER_LAMBDA_EVERY", "100"))
WACHTER_STEP = float(os.getenv("TWIN_WACHTER_STEP", "0.05"))
WACHTER_MAX_ITERS = int(os.getenv("TWIN_WACHTER_MAX_ITERS", "2000"))

SMOTE_K = int(os.getenv("TWIN_SMOTE_K", "5"))

LOG_LEVEL = os.getenv("TWIN_LOG_LEVEL", "INFO")
THREADS = int(os.getenv("TWIN_THREADS", "1"))

REPORT_SCHEMA_VERSION = "1.0"
VERSION = "0.1.0"
