#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Online open world recognition."""

from setuptools import setup, find_packages

version = "0.1.0"

setup(
    name='openworld-online',
    version=version,
    author="openworld developers",
    description="Online open world recognition with online metric learning",
    license='LICENSE',
    keywords="open world recognition online metric learning nearest class mean",
    packages=find_packages(exclude=['tests', 'cookbook', 'docs']),
    include_package_data=True,
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    install_requires=[
        'casadi>=3.5,<4.0',
        'numpy',
        'pandas',
        'scipy'
    ],
    entry_points={
        'console_scripts': ['openworld=openworld.cli:main'],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering'
    ],
)
