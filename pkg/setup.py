import setuptools
from os import path

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, 'README.md'), encoding='utf-8') as fh:
    long_description = fh.read()

setuptools.setup(
    name="pyimplan",
    version="0.1.0",
    author="pyimplan contributors",
    description="Inspection and maintenance planning of deteriorating "
                "structures with POMDPs",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=['docs', 'tests',
                                               'sample_scripts']),
    classifiers=[
        "Programming Language :: Python :: 3 :: Only",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering',
        'Development Status :: 3 - Alpha'
    ],
    python_requires='>=3.8',
    install_requires=['numpy>=1.22', 'scipy>=1.8', 'PyYAML==6.0.1'],
    extras_require={
        'colorLog': ["colorlog"]
    },
    entry_points={
        'console_scripts': ['pyimplan=pyimplan.cli:main']
    }
)
