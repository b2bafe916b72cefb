"""Emergency-alert dispatch: SOS trigger pipeline, offline location
resolution, GSM 03.38 SMS fan-out, HTTP gateway, and device simulator."""

__version__ = "0.1.0"
