import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="guard",
    version="0.1.0",
    install_requires=[
        'tqdm>=4.31.1',
        'numpy>=1.16',
        'scipy>=1.3',
        'pandas>=0.25.0',
        'scikit-learn>=0.21',
        'torch>=1.10.0',
        'pytest>=4.3.0',
    ],
    author="Example Author",
    author_email="author@example.com",
    description="Robust dataset distillation with a curvature regularizer.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=['tests', 'tests.*']),
    entry_points={
        'console_scripts': ['guard=guard.__main__:main'],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GPLv3",
        "Operating System :: OS Independent",
    ],
)
