"""Q-tensor nematic hydrodynamics with a singular (entropic) bulk potential."""
__version__ = "0.1.0"
