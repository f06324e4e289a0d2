from distutils.core import setup
from setuptools import find_packages
from req import reqs, test_reqs

setup(
    name="caupsi",
    python_requires=">=3.8",
    version="0.1.0",
    author="KIProtect GmbH",
    author_email="caupsi@kiprotect.com",
    license="BSD-3",
    url="https://github.com/kiprotect/caupsi",
    packages=find_packages(exclude=["caupsi_tests", "caupsi_tests.*"]),
    include_package_data=True,
    install_requires=reqs,
    extras_require={"test": test_reqs},
    zip_safe=False,
    entry_points={"console_scripts": ["caupsi = caupsi.cli.main:caupsi"]},
    description="Multi-task driver state recognition with a causal task chain and psychological conditioning.",
)
