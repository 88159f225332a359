"""
Suppress numerical warnings that are re-reported as structured errors.
"""
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning
from scipy.optimize import OptimizeWarning


def suppress_common_warnings():
    """Silence scipy chatter; failures surface as QuadratureError / FitError instead."""

    # quad reports non-convergence through its error estimate, which we check
    warnings.filterwarnings('ignore', category=IntegrationWarning)

    # curve_fit warns when the covariance cannot be estimated; the ringdown fit flags it
    warnings.filterwarnings('ignore', category=OptimizeWarning)

    # overflow in exp() of far Lorentzian tails
    np.seterr(over='ignore', under='ignore')
