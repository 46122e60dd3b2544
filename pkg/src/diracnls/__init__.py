"""Numerical laboratory for Schrödinger equations with Dirac-like initial data.

Closed-form self-similar solutions, a Strang split-step Fourier integrator for
the conformal and Gross-Pitaevskii forms of the equation, energy/mass law
monitors, scattering surrogates and the vortex-filament (Hasimoto) side.
"""

__version__ = "0.1.0"
