import re
from setuptools import setup


INSTALL_REQUIRES = ["numpy>=1.17", "scipy>=1.4", "pandas>=1.0", "docopt>=0.6.2"]
EXTRAS_REQUIRE = {
    "tests": ["pytest", "mock", "scripttest==1.3"],
    "lint": [
        "mypy==0.701",
        "flake8==3.7.7",
        "flake8-bugbear==19.3.0",
        "pre-commit==1.17.0",
    ],
    "fast": ["numba>=0.48"],
}
EXTRAS_REQUIRE["dev"] = (
    EXTRAS_REQUIRE["tests"] + EXTRAS_REQUIRE["lint"] + EXTRAS_REQUIRE["fast"] + ["tox"]
)
PYTHON_REQUIRES = ">=3.6"


def find_version(fname):
    """Attempts to find the version number in the file names fname.
    Raises RuntimeError if not found.
    """
    version = ""
    with open(fname, "r") as fp:
        reg = re.compile(r'__version__ = [\'"]([^\'"]*)[\'"]')
        for line in fp:
            m = reg.match(line)
            if m:
                version = m.group(1)
                break
    if not version:
        raise RuntimeError("Cannot find version information")
    return version


def read(fname):
    with open(fname) as fp:
        content = fp.read()
    return content


setup(
    name="amrc",
    version=find_version("amrc/__init__.py"),
    description=(
        "Adaptive minimax risk classifiers for streaming classification "
        "under concept drift, with performance guarantees."
    ),
    long_description=read("README.rst"),
    author="amrc contributors",
    install_requires=INSTALL_REQUIRES,
    extras_require=EXTRAS_REQUIRE,
    python_requires=PYTHON_REQUIRES,
    license="MIT",
    zip_safe=False,
    keywords="online learning concept drift minimax classification kalman",
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.6",
        "Programming Language :: Python :: 3.7",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    packages=["amrc"],
    entry_points={"console_scripts": ["amrc = amrc.cli:main"]},
)
