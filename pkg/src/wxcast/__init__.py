"""Gridded climate ingestion, forecasting, clustering, location
recommendations and weather-aware routing, behind one CLI and HTTP API."""

__version__ = "0.1.0"
