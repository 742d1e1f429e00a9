"""Early-sepsis risk prediction: onset labeling, recurrent survival
modeling, interpretability, treatment-effect estimation, and a desk-scale
scoring platform."""

__version__ = "0.1.0"
