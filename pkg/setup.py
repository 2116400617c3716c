import os
from setuptools import setup, find_packages

os.chdir(os.path.dirname(os.path.realpath(__file__)))


def get_requirements():
    """
    To update the requirements for psmatch, edit the requirements.txt file.
    """
    with open("requirements.txt", "r") as f:
        req_lines = f.readlines()
    reqs = []
    for line in req_lines:
        # Avoid adding comments.
        line = line.split("#")[0].strip()
        if line:
            reqs.append(line)
    return reqs


with open("README.md", encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="psmatch",
    version="0.1.0",
    description="Propensity score M-nearest-neighbor matching estimation of average treatment effects, "
                "with a Monte Carlo harness and efficiency bound calculator.",
    license="MIT",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=get_requirements(),
    extras_require={"test": ["pytest>=7"]},
    entry_points={"console_scripts": ["psmatch = psmatch.cli:main"]},
    zip_safe=False,
    classifiers=[
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.10",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.10",
)
