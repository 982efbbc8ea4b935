"""360-degree saliency graphs for indoor localization, positioning and navigation."""

__version__ = "0.1.0"
