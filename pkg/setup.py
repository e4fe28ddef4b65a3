# Copyright 2024 medtest development team
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

from setuptools import find_packages, setup

__version__ = ""
exec(open("medtest/_version.py").read())

setup(
    name="medtest",
    version=__version__,
    description=(
        "Adaptive joint significance and adaptive Sobel tests for mediation "
        "analysis, with a reproducible Monte Carlo harness."
    ),
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={"medtest": ["py.typed"]},
    include_package_data=True,
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    python_requires=">=3.8",
    license="Apache 2.0",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    install_requires=[
        "numpy >= 1.22, <3.0.0",
        "scipy >= 1.8.0, <2.0.0",
        "pandas >= 1.4.0, <3.0.0",
        "pydantic >= 2.6.0, <3.0.0",
    ],
    extras_require={
        "dev": {
            "ruff==0.6.9",
            "mypy==1.10.0",
            "pytest==8.1.1",
            "pytest-cov==5.0.0",
        }
    },
    entry_points={
        "console_scripts": ["medtest=medtest.cli:main"],
    },
)
