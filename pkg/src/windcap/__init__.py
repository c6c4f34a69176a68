"""Lower probability bound of full wind accommodation under a fixed unit commitment."""

__version__ = "0.1.0"
