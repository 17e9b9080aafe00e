#!/usr/bin/env python3
"""
Setup script for zeta-deficiency
"""
from pathlib import Path

from setuptools import find_namespace_packages, setup

BACKEND_DIR = Path(__file__).parent / "backend"


def read_requirements(name):
    """Pinned requirements, skipping comments and includes."""
    lines = (BACKEND_DIR / name).read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith(("#", "-r"))]


setup(
    name="zeta-deficiency",
    version="1.0.0",
    description="Deficiency-based approximation of zeta values and convergence diagnostics",
    python_requires=">=3.10",
    package_dir={"": "backend"},
    packages=find_namespace_packages(where="backend", include=["app", "app.*"]),
    install_requires=read_requirements("requirements.txt"),
    extras_require={"dev": read_requirements("requirements-dev.txt")},
    entry_points={"console_scripts": ["zeta-deficiency=app.main:run"]},
)
