from setuptools import setup, find_packages

setup(
    name="sqkd-lab",
    version="1.0.0",
    description="Simulation and verification lab for semi-quantum key distribution protocols",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy==1.26.2",
        "scipy==1.11.4",
        "pydantic==2.5.2",
        "fastapi==0.104.1",
        "uvicorn==0.24.0",
        "python-dotenv==1.0.0",
    ],
    extras_require={
        "test": [
            "pytest==7.4.3",
            "hypothesis==6.92.1",
            "httpx==0.25.2",
        ],
    },
    entry_points={
        "console_scripts": [
            "sqkd=app.apis.cli:main",
        ],
    },
    python_requires=">=3.9",
)
