"""Cavity-QED simulation and parameter-extraction toolkit.

Core layers:

- :mod:`cqedkit.qdyn` -- Lindblad master-equation engine
- :mod:`cqedkit.derive` -- closed-form figures of merit with error propagation
- :mod:`cqedkit.spectra` -- transmission spectra and the cavity-tuning map
- :mod:`cqedkit.dynamics` -- decay traces and lifetime semantics
- :mod:`cqedkit.fitcore` -- Levenberg-Marquardt engine and model zoo
- :mod:`cqedkit.fileio` -- plain-text data formats
- :mod:`cqedkit.service` -- FastAPI service wrapping the core
- :mod:`cqedkit.cli` -- thin command-line client of the service
"""

__version__ = "0.1.0"
FORMAT_VERSION = "1"
