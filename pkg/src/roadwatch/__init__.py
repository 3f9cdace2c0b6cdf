"""roadwatch: road-condition telemetry pipeline.

Synthetic vehicle traces flow through a store-and-forward node agent into
an ingestion server that calibrates thresholds, classifies readings with
dual-sensor rules, clusters hits into geolocated pothole events, and
serves them over a JSON HTTP API.
"""

__version__ = "0.1.0"
