# setup.py
from setuptools import setup

setup(
    name="demuxlimit",
    version="0.1.0",
    description="Resolution limits of spatial-mode demultiplexing under crosstalk",
    packages=["demuxlimit", "demuxlimit.core", "demuxlimit.physics", "demuxlimit.measurements"],
    package_dir={"demuxlimit": "."},
    include_package_data=True,
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "jsonschema>=4.0",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "dev": ["pytest>=7.0.0", "hypothesis>=6.0"],
    },
    entry_points={
        'console_scripts': [
            'demuxlimit=demuxlimit.main:main',
        ],
    },
    python_requires='>=3.8',
)
