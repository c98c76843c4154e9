"""
This module sets up the logger shared by the whole toolkit. It configures the logging format,
log level, and log file location. Log records go to a file under the log directory and to
stderr, so that commands printing reports or JSON on stdout keep a clean output stream.
"""

import os
import sys
import logging

LOGGING_FORMAT = "%(asctime)s - %(levelname)s - %(module)s - %(message)s"

LOG_DIR = os.environ.get("LAST_LOG_DIR", os.path.join(os.getcwd(), "logs"))
os.makedirs(LOG_DIR, exist_ok=True)
LOG_FILE = os.path.join(LOG_DIR, "vistrace.log")

logging.basicConfig(
    level=logging.INFO,
    format=LOGGING_FORMAT,
    handlers=[
        logging.FileHandler(LOG_FILE),
        logging.StreamHandler(sys.stderr)
    ]
)

logger = logging.getLogger("vistrace")
