"""Audio anomaly detection with patch-embedding detectors and anomaly maps."""

__version__ = "0.1.0"
