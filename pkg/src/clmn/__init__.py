"""Cross-lingual memory networks for stance detection, on a small numpy autodiff core."""

__version__ = "0.1.0"
