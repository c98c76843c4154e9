"""
Python file to configure the project as an installable package, containing information about
the project name, version, and dependencies.

Instructions:
1. Use a Virtual Environment:
    i. Create a virtual environment:
    ```bash
    python3 -m venv env
    ```
    ii. Activate the virtual environment:
    - On Windows:
    ```bash
    .\env\Scripts\activate
    ```
    - On macOS/Linux:
    ```bash
    source env/bin/activate
    ```
    iii. Install the package (editable, with the test extras):
    ```bash
    pip install -e ".[test]"
    ```
2. Run the command-line front end:
    ```bash
    vistrace select --embeddings data/fixtures/sofa_counting/embeddings.txt --k 4 --method dpp
    ```
"""

import setuptools

with open("README.md", "r", encoding="utf-8") as f:
    long_description = f.read()


__version__ = "1.0"

REPO_NAME = "vistrace"
SRC_REPO = "vistrace_lib"


setuptools.setup(
    name=REPO_NAME,
    version=__version__,
    description="Query-aware frame selection and tool-augmented visual reasoning traces",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(include=[SRC_REPO, f"{SRC_REPO}.*"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy",
        "matplotlib",
        "ensure",
        "requests",
        "Pillow",
        "PyYAML",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["vistrace=vistrace_lib.cli.main:main"]},
)
