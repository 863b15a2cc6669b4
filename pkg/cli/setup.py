"""Setup configuration for the CHDP CLI package.

This module defines the package metadata and dependencies for the CHDP CLI.
It uses setuptools to package the CLI application for distribution.
"""

from setuptools import find_packages, setup

setup(
    name="pychdp-cli",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "click>=8.1.0",
        "pychdp>=0.1.0",
    ],
    entry_points={
        "console_scripts": [
            "chdp=pychdp_cli.__main__:cli",
        ],
    },
)
