"""fhescale: virtual-time autoscaling simulator for encrypted inference."""

__version__ = "0.1.0"
