#!/usr/bin/env python
from setuptools import setup, find_packages

with open('requirements.txt') as fobj:
    requirements = [l.strip() for l in fobj.readlines() if l.strip()]

setup(
    name='transmonkit',
    description='Transmon spectra, chip parameter sweeps and 2D electrostatics of qubit cross-sections',
    license='AGPL',
    install_requires=requirements,
    packages=find_packages(),
    include_package_data=True,
    package_data={'transmonkit': ['default_config.toml']},
    python_requires='>=3.8',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Developers',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python', ],

    setup_requires=['setuptools_scm'],
    use_scm_version={'write_to': 'transmonkit/version.txt',
                     'tag_regex': r'^(?P<prefix>v)?(?P<version>[^\+]+)(?P<suffix>.*)?$', },

    entry_points={'console_scripts': ['transmonkit=transmonkit.make_reports:main']}

)
