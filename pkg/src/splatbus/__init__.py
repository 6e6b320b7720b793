"""splatbus: client-server frame bus for Gaussian splat renderers.

Server side publishes RGBA32F color + R32F linear depth into a shared frame
region and speaks a length-prefixed JSON control protocol on two TCP ports;
clients attach the region, read tear-free snapshots, and stream camera and
object poses back.
"""

__version__ = "0.1.0"
