# This should be only one line. If it must be multi-line, indent the second
# line onwards to keep the PKG-INFO file format intact.
"""Adaptive worst-case operating-condition search for analog circuit \
verification.
"""

from setuptools import find_packages, setup

version = open("src/occsearch/version.txt").read().strip()

setup(
    name="occsearch",
    version=version,
    install_requires=[
        "importlib_metadata",
        "Jinja2>=3.0.1",
        "numpy",
        "py",
        "pyyaml",
        # qmc.LatinHypercube(rng=...) needs 1.15.
        "scipy>=1.15",
    ],
    extras_require={
        "test": [
            "mock",
            "pytest",
            "pytest-coverage",
            "pytest-instafail",
            "pytest-timeout",
        ]
    },
    entry_points="""
        [console_scripts]
            occsearch = occsearch.main:main
        [occsearch.backends]
            synthetic = occsearch.simulator:SyntheticSimulator
            external = occsearch.simulator:ExternalSimulator
    """,
    license="BSD (2-clause)",
    keywords="analog verification worst-case gaussian-process",
    classifiers="""\
License :: OSI Approved :: BSD License
Programming Language :: Python
Programming Language :: Python :: 3
Programming Language :: Python :: 3.10
Programming Language :: Python :: 3.11
Programming Language :: Python :: 3.12
Programming Language :: Python :: 3 :: Only
Topic :: Scientific/Engineering :: Electronic Design Automation (EDA)
"""[
        :-1
    ].split(
        "\n"
    ),
    description=__doc__.strip(),
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=find_packages("src"),
    package_dir={"": "src"},
    package_data={
        "occsearch": ["version.txt", "resources/*.cfg", "resources/*.txt"],
    },
    include_package_data=True,
    zip_safe=False,
    test_suite="occsearch.tests",
    python_requires=">=3.10",
)
