"""
Slit Tomography
Simulation and reconstruction toolkit for multiplexed tomography of slit qudits

The integration class coordinates bases, optics, tomography and experiments;
the domain modules are importable on their own.
"""

from .errors import NumericalError, SlitTomographyError, ValidationError
from .integration import SlitTomographyIntegration

__version__ = "1.0.0"

__all__ = ['SlitTomographyIntegration', 'SlitTomographyError', 'ValidationError', 'NumericalError']
