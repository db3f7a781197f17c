from setuptools import setup, find_packages
from pathlib import Path

this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text()


setup(name='valleyopt',
      description="Stochastic optimal control of cascaded hydro valleys: DP, discrete SDDP and DADP",
      long_description_content_type='text/markdown',
      long_description=long_description,
      classifiers=[],
      keywords='hydro-valley stochastic-optimization dynamic-programming SDDP price-decomposition',
      author='valleyopt developers',
      author_email='',
      url='',
      license='MIT',
      packages=find_packages(exclude=['ez_setup', 'examples', 'tests']),
      include_package_data=True,
      package_data={'valleyopt': ['tests/data/*.json']},
      zip_safe=False,
      install_requires=[
          "numpy>=1.23",
          "scipy>=1.9",
          "pandas>=1.5",
          "pydantic>=2.0",
          "networkx>=2.8",
          "tqdm>=4.62.3",
          "prettytable>=3.4",
      ],
      entry_points="""
      # -*- Entry points: -*-
      [console_scripts]
      valleyopt=valleyopt.cli:main
      """,
      )
