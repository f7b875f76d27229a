"""Daily case-count forecasting from lagged environmental and mobility drivers."""

__version__ = "0.1.0"
