from setuptools import setup, find_namespace_packages

setup(
    name='vpme-kinetics',
    version='0.1.0',
    description='Particle simulation of the Vlasov-Poisson system with massless electrons (variable and fixed total '
                'charge), with split-field electrostatics, conserved-energy and moment diagnostics, and '
                'Wasserstein stability measurements between runs.',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    python_requires='>=3.8',
    install_requires=['scipy', "importlib_resources", "numpy", "pot"],
    extras_require={"test": ["pytest", "hypothesis"]},
    packages=find_namespace_packages(where='src'),
    package_dir={'': 'src'},
    package_data={"vpme.data": ['*.cfg']},
    include_package_data=True,
    entry_points={"console_scripts": ["vpme=vpme.harness.cli:main"]}
)
