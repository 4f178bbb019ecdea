"""Bit-exact binary dataset format with O(1) record access.

Layout (all little-endian):

    header:  magic "TOPODIF1" (8s) | version u32 | nx u32 | ny u32
             | sample_count u64                            -> 28 bytes
    record:  topology f32[nx*ny] | stress f32[nx*ny] | strain f32[nx*ny]
             | load_x, load_y, fx, fy, f as f32 | seed u64

Version 1 stores 32-bit scalars (the scalar width is implied by the
version, not serialized). Grids are row-major by element. A text
export/import exists for debugging.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"TOPODIF1"
VERSION = 1
HEADER = struct.Struct("<8sIIIQ")
SCALARS = struct.Struct("<fffff")
SEED = struct.Struct("<Q")
SCALAR_WIDTH = 4          # bytes per stored value in version 1


class DatasetFormatError(Exception):
    """Corrupt or invalid dataset file."""


@dataclass(frozen=True)
class DatasetHeader:
    nx: int
    ny: int
    sample_count: int
    version: int = VERSION

    @property
    def scalar_width(self) -> int:
        return SCALAR_WIDTH

    @property
    def record_size(self) -> int:
        grid = self.nx * self.ny * SCALAR_WIDTH
        return 3 * grid + SCALARS.size + SEED.size

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, self.nx, self.ny,
                           self.sample_count)

    @staticmethod
    def unpack(raw: bytes) -> "DatasetHeader":
        if len(raw) < HEADER.size:
            raise DatasetFormatError("file too short for a dataset header")
        magic, version, nx, ny, count = HEADER.unpack(raw[:HEADER.size])
        if magic != MAGIC:
            raise DatasetFormatError(f"bad magic {magic!r}; not a dataset file")
        if version != VERSION:
            raise DatasetFormatError(f"unsupported version {version}")
        if nx < 1 or ny < 1:
            raise DatasetFormatError(f"invalid grid {nx}x{ny}")
        return DatasetHeader(nx=nx, ny=ny, sample_count=count, version=version)


@dataclass
class Sample:
    """One dataset record. Grids are (ny, nx) float32.

    ``compliance`` is sampler-side provenance; it is not serialized.
    """

    topology: np.ndarray
    stress: np.ndarray
    strain: np.ndarray
    load_x: float
    load_y: float
    fx: float
    fy: float
    f: float
    seed: int
    compliance: float | None = None

    def validate(self, nx: int, ny: int, index: int | None = None):
        where = f" (record {index})" if index is not None else ""
        for name, grid in (("topology", self.topology), ("stress", self.stress),
                           ("strain", self.strain)):
            if grid.shape != (ny, nx):
                raise DatasetFormatError(f"{name} grid has shape {grid.shape}, "
                                         f"expected {(ny, nx)}{where}")
            if not np.all(np.isfinite(grid)):
                raise DatasetFormatError(f"non-finite values in {name}{where}")
        if not np.all((self.topology == 0.0) | (self.topology == 1.0)):
            raise DatasetFormatError(f"topology is not binary{where}")
        scalars = (self.load_x, self.load_y, self.fx, self.fy, self.f)
        if not all(np.isfinite(s) for s in scalars):
            raise DatasetFormatError(f"non-finite scalar field{where}")
        if abs(np.hypot(self.fx, self.fy) - 1.0) > 1e-6:
            # stored as f32; 1e-6 is the width of the f32 rounding of a
            # unit vector (the f64 invariant is 1e-12 at generation time)
            raise DatasetFormatError(f"load is not unit magnitude{where}")

    def conditioning_vector(self) -> np.ndarray:
        """Global descriptor [load_x, load_y, fx, fy, f]."""
        return np.array([self.load_x, self.load_y, self.fx, self.fy, self.f],
                        dtype=np.float32)

    def pack(self) -> bytes:
        parts = [np.ascontiguousarray(g, dtype="<f4").tobytes()
                 for g in (self.topology, self.stress, self.strain)]
        parts.append(SCALARS.pack(self.load_x, self.load_y,
                                  self.fx, self.fy, self.f))
        parts.append(SEED.pack(self.seed))
        return b"".join(parts)

    @staticmethod
    def unpack(raw: bytes, nx: int, ny: int, index: int | None = None) -> "Sample":
        grid_bytes = nx * ny * SCALAR_WIDTH
        expected = 3 * grid_bytes + SCALARS.size + SEED.size
        if len(raw) != expected:
            raise DatasetFormatError(
                f"record has {len(raw)} bytes, expected {expected}"
                + (f" (record {index})" if index is not None else ""))
        grids = []
        for k in range(3):
            flat = np.frombuffer(raw[k * grid_bytes:(k + 1) * grid_bytes],
                                 dtype="<f4")
            grids.append(flat.reshape(ny, nx).copy())
        off = 3 * grid_bytes
        load_x, load_y, fx, fy, f = SCALARS.unpack_from(raw, off)
        (seed,) = SEED.unpack_from(raw, off + SCALARS.size)
        sample = Sample(topology=grids[0], stress=grids[1], strain=grids[2],
                        load_x=load_x, load_y=load_y, fx=fx, fy=fy, f=f,
                        seed=seed)
        sample.validate(nx, ny, index)
        return sample


class DatasetWriter:
    """Single writer; rewrites the sample count in the header on close."""

    def __init__(self, path: str, nx: int = 64, ny: int = 64):
        self.path = path
        self.nx = nx
        self.ny = ny
        self.count = 0
        self._fh = open(path, "wb")
        self._fh.write(DatasetHeader(nx, ny, 0).pack())

    def write(self, sample: Sample) -> int:
        sample.validate(self.nx, self.ny)
        self._fh.write(sample.pack())
        self.count += 1
        return self.count

    def close(self):
        if self._fh is None:
            return
        self._fh.seek(0)
        self._fh.write(DatasetHeader(self.nx, self.ny, self.count).pack())
        self._fh.close()
        self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


def write_samples(path: str, samples, nx: int = 64, ny: int = 64) -> int:
    """Stream samples to a new dataset file; returns the count written."""
    with DatasetWriter(path, nx=nx, ny=ny) as writer:
        for sample in samples:
            writer.write(sample)
        return writer.count


class Dataset:
    """Random-access reader. Reading record i touches only record i."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "rb")
        self.header = DatasetHeader.unpack(self._fh.read(HEADER.size))
        self._fh.seek(0, 2)
        actual = self._fh.tell()
        expected = HEADER.size + self.header.sample_count * self.header.record_size
        if actual != expected:
            raise DatasetFormatError(
                f"file size {actual} does not match header "
                f"({self.header.sample_count} records of "
                f"{self.header.record_size} bytes + {HEADER.size})")

    def __len__(self) -> int:
        return self.header.sample_count

    def read(self, index: int) -> Sample:
        if not 0 <= index < len(self):
            raise IndexError(f"sample index {index} out of range "
                             f"[0, {len(self)})")
        self._fh.seek(HEADER.size + index * self.header.record_size)
        raw = self._fh.read(self.header.record_size)
        if len(raw) != self.header.record_size:
            raise DatasetFormatError(f"truncated record {index}")
        return Sample.unpack(raw, self.header.nx, self.header.ny, index)

    def __iter__(self):
        for i in range(len(self)):
            yield self.read(i)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


def read_sample(path: str, index: int) -> Sample:
    with Dataset(path) as ds:
        return ds.read(index)


def export_text(path: str, index: int, out_path: str):
    """Write one sample as space-separated grid blocks for inspection."""
    sample = read_sample(path, index)
    with open(out_path, "w") as fh:
        fh.write(f"# sample {index} seed {sample.seed}\n")
        fh.write(f"scalars {sample.load_x!r} {sample.load_y!r} "
                 f"{sample.fx!r} {sample.fy!r} {sample.f!r}\n")
        for name, grid in (("topology", sample.topology),
                           ("stress", sample.stress),
                           ("strain", sample.strain)):
            fh.write(f"{name} {grid.shape[1]} {grid.shape[0]}\n")
            for row in grid:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def import_text(text_path: str) -> Sample:
    """Inverse of export_text (lossless at f32 precision)."""
    grids = {}
    scalars = None
    seed = 0
    with open(text_path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln.startswith("#"):
            parts = ln.split()
            if "seed" in parts:
                seed = int(parts[parts.index("seed") + 1])
            i += 1
        elif ln.startswith("scalars"):
            scalars = [float(v) for v in ln.split()[1:6]]
            i += 1
        elif ln.split() and ln.split()[0] in ("topology", "stress", "strain"):
            name, nx, ny = ln.split()
            nx, ny = int(nx), int(ny)
            rows = [np.array([float(v) for v in lines[i + 1 + r].split()],
                             dtype=np.float32) for r in range(ny)]
            grids[name] = np.vstack(rows)
            i += 1 + ny
        else:
            i += 1
    if scalars is None or set(grids) != {"topology", "stress", "strain"}:
        raise DatasetFormatError(f"incomplete text sample in {text_path}")
    return Sample(topology=grids["topology"], stress=grids["stress"],
                  strain=grids["strain"], load_x=scalars[0], load_y=scalars[1],
                  fx=scalars[2], fy=scalars[3], f=scalars[4], seed=seed)
