"""
Setup script for the activity-shift toolkit.
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="activity-shift",
    version="0.1.0",
    author="Your Name",
    author_email="your.email@example.com",
    description="Change detection in per-user posting activity: segmented regression and Bayesian switchpoints",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/activity-shift",
    packages=find_packages(exclude=["test_modules", "test_modules.*", "examples", "examples.*"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.8",
    install_requires=[
        "requests>=2.25.0",
        "cmd2>=2.4.0",
        "numpy>=1.20",
        "scipy>=1.7",
        "pandas>=1.3",
        "joblib>=1.0",
        "arviz>=0.12",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        'console_scripts': [
            'activity-shift=activity_shift.cli.main:main',
            'activity-shell=activity_shift.cli.interactive:main',
        ],
    },
)
