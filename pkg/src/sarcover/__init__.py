"""Coverage-maximising trajectory and power planning for a UAV-borne stripmap SAR
with a real-time backhaul link."""

__version__ = "0.1.0"
