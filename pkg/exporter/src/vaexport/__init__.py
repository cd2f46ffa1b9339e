"""Video-to-embedding exporter emitting VAEB files and label manifests."""

from .encoders import GridPoolEncoder, VitEncoder, build_encoder
from .export import DecodeError, ExportJob, GridMismatchError, export
from .format import write_manifest, write_vaeb

__version__ = "0.1.0"
