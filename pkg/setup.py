#!/usr/bin/env python3

import os
import sys
import logging

from setuptools import setup
from setuptools import Command
from setuptools import find_packages

VERSION = "0.4.0"
CONFIG_DIR = "config/fovea"

log = logging.getLogger("setup.py")


#####################################################################
# # Helper Functions #################################################
#####################################################################

def requires(filename):
    """Returns a list of all pip requirements
    :param filename: the Pip requirement file (usually 'requirements.txt')
    :return: list of modules
    :rtype: list
    """
    modules = []
    with open(filename, 'r') as pipreq:
        for line in pipreq:
            line = line.strip()
            # Checks if line starts with a comment or referencing
            # external pip requirements file (with '-r' or '-e'):
            if line.startswith('#') or line.startswith('-') or not line:
                continue
            modules.append(line)
    return modules


def config_files():
    return [os.path.join(CONFIG_DIR, name) for name in sorted(os.listdir(CONFIG_DIR))]


#####################################################################
# # Test Command #####################################################
#####################################################################

class test_command(Command):
    user_options = []

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass

    def run(self):
        import pytest
        from coverage import Coverage

        cov = Coverage(source=["fovea"])
        cov.erase()
        cov.start()

        result = pytest.main(["tests"])

        cov.stop()
        cov.save()
        cov.html_report(directory="covhtml")
        sys.exit(int(result))


#####################################################################
# # Actual Setup.py Script ###########################################
#####################################################################


if __name__ == "__main__":
    setup(
        cmdclass={
            'test': test_command,
        },
        name="fovea",
        version=VERSION,
        description="Recurrent foveated-glimpse attention for image classification",
        long_description=open("README.md").read(),
        long_description_content_type="text/markdown",
        license="GPLv2+",
        python_requires=">=3.6",
        setup_requires=["coverage"],
        install_requires=requires("requirements.txt"),
        tests_require=requires("requirements-test.txt"),
        packages=find_packages(exclude=["*tests*"]),
        scripts=[
            "bin/fovea",
        ],
        data_files=[
            ("share/fovea/config", config_files()),
        ],
    )
