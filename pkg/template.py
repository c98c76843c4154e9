"""
This script creates the directory structure of the "vistrace" project: the library package with
its selection method, ingestion, tooling, orchestrator, curation, metrics and command-line
packages, the utilities, fixture and log directories, and the packaging files.
Existing files are left untouched, so the script can be re-run safely on a partial tree.
"""

import os
import logging

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

PROJECT_NAME = "vistrace_lib"

list_of_files = [
    # Init files to mark directories as Python packages
    f"{PROJECT_NAME}/__init__.py",
    f"{PROJECT_NAME}/method/__init__.py",
    f"{PROJECT_NAME}/method/config/__init__.py",
    f"{PROJECT_NAME}/method/kernel/__init__.py",
    f"{PROJECT_NAME}/method/selection/__init__.py",
    f"{PROJECT_NAME}/ingestion/__init__.py",
    f"{PROJECT_NAME}/tooling/__init__.py",
    f"{PROJECT_NAME}/llms_feat/__init__.py",
    f"{PROJECT_NAME}/orchestrator/__init__.py",
    f"{PROJECT_NAME}/curation/__init__.py",
    f"{PROJECT_NAME}/metrics/__init__.py",
    f"{PROJECT_NAME}/cli/__init__.py",
    f"{PROJECT_NAME}/utils/__init__.py",

    # Main files
    "app.py",

    # Fixtures and logs
    "data/fixtures/.gitkeep",
    "logs/vistrace.log",

    # Frame selection
    f"{PROJECT_NAME}/method/config/configuration.py",
    f"{PROJECT_NAME}/method/kernel/components.py",
    f"{PROJECT_NAME}/method/kernel/solver.py",
    f"{PROJECT_NAME}/method/selection/components.py",
    f"{PROJECT_NAME}/method/selection/solver.py",
    f"{PROJECT_NAME}/method/selection/explain.py",
    f"{PROJECT_NAME}/method/selection/main.py",

    # Preprocessing of frame manifests
    f"{PROJECT_NAME}/ingestion/components.py",
    f"{PROJECT_NAME}/ingestion/manifest.py",
    f"{PROJECT_NAME}/ingestion/planner.py",

    # Tools and model clients
    f"{PROJECT_NAME}/tooling/components.py",
    f"{PROJECT_NAME}/tooling/registry.py",
    f"{PROJECT_NAME}/tooling/render.py",
    f"{PROJECT_NAME}/tooling/backends.py",
    f"{PROJECT_NAME}/llms_feat/client.py",

    # Episode loop, curation and evaluation
    f"{PROJECT_NAME}/orchestrator/components.py",
    f"{PROJECT_NAME}/orchestrator/parser.py",
    f"{PROJECT_NAME}/orchestrator/episode.py",
    f"{PROJECT_NAME}/orchestrator/stats.py",
    f"{PROJECT_NAME}/curation/components.py",
    f"{PROJECT_NAME}/curation/judges.py",
    f"{PROJECT_NAME}/curation/pipeline.py",
    f"{PROJECT_NAME}/curation/records.py",
    f"{PROJECT_NAME}/metrics/scores.py",
    f"{PROJECT_NAME}/metrics/report.py",

    # Command line
    f"{PROJECT_NAME}/cli/formats.py",
    f"{PROJECT_NAME}/cli/main.py",

    # Utilities
    f"{PROJECT_NAME}/utils/logger.py",
    f"{PROJECT_NAME}/utils/errors.py",
    f"{PROJECT_NAME}/utils/common.py",

    # Tests
    "tests/conftest.py",

    # Project setup files
    "setup.py",
    "requirements.txt",

    # Project template
    "template.py"
]

for file_path in list_of_files:
    file_dir = os.path.dirname(file_path)

    if file_dir and not os.path.exists(file_dir):
        os.makedirs(file_dir)
        logging.info("Directory created: %s", file_dir)
    elif file_dir:
        logging.info("Directory already exists: %s", file_dir)

    if not os.path.exists(file_path):
        with open(file_path, 'w', encoding='utf-8') as f:
            pass
        logging.info("File created: %s", file_path)
    else:
        logging.info("File already exists: %s", file_path)
