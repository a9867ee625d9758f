"""Bulk-surface DIB electrodeposition simulator on graded polyhedral meshes."""
__version__ = "0.1.0"
