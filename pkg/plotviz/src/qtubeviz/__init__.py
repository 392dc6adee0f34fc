"""Figure rendering for qtube trajectory CSVs and run manifests.

This package is a pure consumer of the qtube file formats: the
``qtube.trajectory.v1`` CSV schema and the ``qtube.manifest.v1`` run
manifest.  It never imports the solver package.
"""

__version__ = "0.1.0"
