"""Mine NVD vulnerability records whose fixes point at open-source commits."""

__version__ = "0.1.0"
