"""SCI PnP - Two-Stage / Adaptive Plug-and-Play Reconstruction for Video Snapshot Compressive Imaging"""

__version__ = "0.1.0"
