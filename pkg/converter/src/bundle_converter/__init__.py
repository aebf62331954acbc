"""Citation-benchmark to graph-bundle converter."""

from .convert import ConvertJob, convert, convert_from_directory, make_split, write_bundle
from .fetch import ChecksumError, DownloadError, fetch_dataset, sha256_of
from .planetoid import DATASETS, PlanetoidFormatError, RawDataset, load_raw

__version__ = "0.1.0"
