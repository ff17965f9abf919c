"""Contact-aware bulk data download scheduling for LEO mega-constellations."""

__version__ = "0.1.0"
