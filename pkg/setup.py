from setuptools import setup, find_packages

setup(
    name="chemostat_control",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    package_data={"chemostat_control": ["escenarios/*.json"]},
    install_requires=[
        "numpy",
        "pandas",
        "scipy",
        "pydantic>=2",
    ],
    entry_points={
        "console_scripts": [
            "chemostat-control=chemostat_control.cli:main",
        ],
    },
    author="Miguel Santos",
    author_email="mitxelsk811@gmail.com",
    description="Control por realimentación de quimiostatos con mortalidad y estructura por edades",
    keywords="quimiostato, control, Lyapunov, estabilidad, edades",
    python_requires=">=3.10",
)
