"""Grouped near-neighbor index: a B x R grid of cells probed through reverse tables.

Construction distributes the N points over B equal cells, independently R
times (a derived-seed permutation plus modulo-B assignment per repetition).
Every point is hashed once into m codes; for each hash function i, a reverse
table maps an l_bits-wide code to the deduplicated list of cells holding a
point with that code. A query then:

  1. hashes once into m codes,
  2. counts, per cell, how many of the m tables contain the cell under the
     query's code (``cell_counts``),
  3. either thresholds the counts (``query_threshold``: union passing cells
     per repetition, intersect across repetitions) or relaxes the threshold
     (``query_topk``: walk cells by descending count, id ascending on ties,
     skipping zero-count cells; emit a point the moment it has been seen in
     R cells; stop after k emissions).

Top-k results are in emission order, which is not a similarity ranking.
Indexes are immutable after build and safe for concurrent queries, one
QueryScratch per thread.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, lsh
from ._prng import TAG_PERMUTATION, derive, permutation
from .errors import ConfigError, FormatError, InputError

METRIC_JACCARD = "jaccard"
METRIC_COSINE = "cosine"

_METRIC_KIND = {METRIC_JACCARD: lsh.KIND_MINHASH, METRIC_COSINE: lsh.KIND_SRP}

MAGIC = b"FLNG"
VERSION = 1
_HEADER = struct.Struct("<4sIBBBBIIIIQIIQQ")
_KINDS = (lsh.KIND_MINHASH, lsh.KIND_SRP)
_METRICS = (METRIC_JACCARD, METRIC_COSINE)

MAX_REPETITIONS = 255  # per-point counters are one byte


@dataclass(frozen=True)
class FlinngConfig:
    """Grid shape (num_cells x repetitions), hash family spec, and metric."""

    num_cells: int
    repetitions: int
    hash_spec: lsh.HashFamilySpec
    metric: str

    def validate(self):
        if self.num_cells < 2:
            raise ConfigError(f"num_cells must be >= 2, got {self.num_cells}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.repetitions > MAX_REPETITIONS:
            raise ConfigError(f"repetitions capped at {MAX_REPETITIONS}")
        if self.num_cells * self.repetitions >= 1 << 32:
            raise ConfigError("num_cells * repetitions exceeds the 32-bit cell id width")
        if self.metric not in _METRIC_KIND:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if _METRIC_KIND[self.metric] != self.hash_spec.kind:
            raise ConfigError(
                f"metric {self.metric!r} requires a {_METRIC_KIND[self.metric]!r} "
                f"hash family, got {self.hash_spec.kind!r}"
            )

    @property
    def total_cells(self):
        return self.num_cells * self.repetitions

    @property
    def cell_dtype(self):
        # short cell ids whenever they fit
        return np.uint16 if self.total_cells < (1 << 16) else np.uint32


class QueryScratch:
    """Reusable per-thread query buffers; every kernel re-zeroes what it touched."""

    def __init__(self, index):
        self.cell_counts = np.zeros(index.config.total_cells, dtype=np.int32)
        self.touched = np.empty(index.config.total_cells, dtype=np.int64)
        reps = index.config.repetitions
        if _kernels.BACKEND == "numba" and reps == 2:
            self.point_bits = np.zeros((index.n_points + 63) // 64, dtype=np.uint64)
            self.point_counts = None
        else:
            self.point_bits = None
            self.point_counts = np.zeros(index.n_points, dtype=np.uint8)

    def assert_clean(self):
        """Debug sweep: verify every scratch slot was reset after the last query."""
        assert not self.cell_counts.any(), "cell counts were not reset"
        if self.point_counts is not None:
            assert not self.point_counts.any(), "point counters were not reset"
        if self.point_bits is not None:
            assert not self.point_bits.any(), "point bit array was not reset"


class FlinngIndex:
    """Immutable cell memberships plus m reverse tables from codes to cells."""

    def __init__(self, config, n_points, cell_offsets, cell_members, table_offsets, table_payload, family):
        self.config = config
        self.n_points = n_points
        self.cell_offsets = cell_offsets  # (B*R + 1,) int64
        self.cell_members = cell_members  # (R * N,) uint32, ascending ids per cell
        self.table_offsets = table_offsets  # (m * 2**l_bits + 1,) int64
        self.table_payload = table_payload  # uint16/uint32 cell ids, dedup per bucket
        self.family = family

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, points, config: FlinngConfig, threads=1):
        """Hash and partition a homogeneous point list. Deterministic per (points, config)."""
        config.validate()
        n = len(points)
        if n < 1:
            raise InputError("cannot build an index over zero points")
        if config.num_cells > n:
            warnings.warn(
                f"num_cells={config.num_cells} exceeds n_points={n}; some cells stay empty",
                stacklevel=2,
            )
        _kernels.set_build_threads(threads)
        family = lsh.build_family(config.hash_spec)
        if config.metric == METRIC_JACCARD:
            codes = lsh.hash_set_many(family, points)
        else:
            mat = np.asarray(points, dtype=np.float64)
            if mat.ndim != 2:
                raise InputError("cosine metric expects a homogeneous (n, dim) matrix")
            codes = lsh.hash_dense_many(family, mat)
        return cls.from_codes(codes, config, family=family)

    @classmethod
    def from_codes(cls, codes, config: FlinngConfig, family=None):
        """Assemble the grid and reverse tables from a precomputed (n, m) code matrix."""
        config.validate()
        codes = np.ascontiguousarray(codes, dtype=np.uint32)
        n, m = codes.shape
        spec = config.hash_spec
        if m != spec.m:
            raise InputError(f"code matrix has m={m}, spec expects {spec.m}")
        if (codes >= np.uint32(1 << spec.l_bits)).any():
            raise InputError(f"codes must lie in [0, 2**{spec.l_bits})")
        if family is None:
            family = lsh.build_family(spec)

        B, R = config.num_cells, config.repetitions
        total = config.total_cells
        # repetition r: permute, then position i lands in cell i mod B
        cells_of = np.empty((R, n), dtype=np.int64)
        positions = np.arange(n, dtype=np.int64)
        for r in range(R):
            perm = permutation(derive(spec.seed, TAG_PERMUTATION + r), n)
            cells_of[r, perm] = r * B + (positions % B)

        flat_cells = cells_of.reshape(R * n)
        order = np.argsort(flat_cells, kind="stable")  # ascending ids within a cell
        cell_members = np.tile(np.arange(n, dtype=np.uint32), R)[order]
        sizes = np.bincount(flat_cells, minlength=total)
        cell_offsets = np.zeros(total + 1, dtype=np.int64)
        np.cumsum(sizes, out=cell_offsets[1:])

        table_size = 1 << spec.l_bits
        bucket_sizes = []
        payloads = []
        cells_t = cells_of.T  # (n, R)
        for i in range(m):
            # unique (bucket, cell) pairs for table i, sorted by bucket then cell
            composite = (codes[:, i].astype(np.int64) * total)[:, None] + cells_t
            uniq = np.unique(composite.ravel())
            buckets = uniq // total
            payloads.append((uniq % total).astype(config.cell_dtype))
            bucket_sizes.append(np.bincount(buckets, minlength=table_size))
        table_offsets = np.zeros(m * table_size + 1, dtype=np.int64)
        np.cumsum(np.concatenate(bucket_sizes), out=table_offsets[1:])
        table_payload = np.concatenate(payloads)

        return cls(config, n, cell_offsets, cell_members, table_offsets, table_payload, family)

    # -- inspection ---------------------------------------------------------

    def members_of(self, flat_cell):
        """Point ids stored in one flat cell (repetition * num_cells + cell)."""
        return self.cell_members[self.cell_offsets[flat_cell] : self.cell_offsets[flat_cell + 1]]

    def hash_query(self, point):
        if self.config.metric == METRIC_JACCARD:
            return lsh.hash_set(self.family, point)
        return lsh.hash_dense(self.family, point)

    # -- queries ------------------------------------------------------------

    def cell_counts(self, query_codes, scratch=None):
        """Per-cell collision counts in [0, m] for one query's codes."""
        scratch = scratch or QueryScratch(self)
        codes = np.ascontiguousarray(query_codes, dtype=np.uint32)
        if codes.shape != (self.config.hash_spec.m,):
            raise InputError(f"expected {self.config.hash_spec.m} query codes")
        n_touched = _kernels.gather_counts(
            self.table_offsets,
            self.table_payload,
            codes,
            1 << self.config.hash_spec.l_bits,
            scratch.cell_counts,
            scratch.touched,
        )
        out = scratch.cell_counts.copy()
        scratch.cell_counts[scratch.touched[:n_touched]] = 0
        return out

    def query_threshold(self, query, t):
        """Ids passing the count threshold in every repetition (ascending order)."""
        return self.query_threshold_codes(self.hash_query(query), t)

    def query_threshold_codes(self, query_codes, t):
        m = self.config.hash_spec.m
        if not (0 < t <= m):
            raise InputError(f"threshold must satisfy 0 < t <= {m}, got {t}")
        counts = self.cell_counts(query_codes)
        passing = np.flatnonzero(counts >= t)
        if passing.size == 0:
            return np.empty(0, dtype=np.int64)
        hits = np.concatenate([self.members_of(c) for c in passing]).astype(np.int64)
        seen = np.bincount(hits, minlength=self.n_points)
        return np.flatnonzero(seen == self.config.repetitions)

    def query_topk(self, query, k, scratch=None):
        """Up to k point ids in emission order (may be shorter when few cells fire)."""
        ids, _ = self.query_topk_codes_trace(self.hash_query(query), k, scratch)
        return ids

    def query_topk_trace(self, query, k, scratch=None):
        """query_topk plus, per emission, the collision count of the emitting cell."""
        return self.query_topk_codes_trace(self.hash_query(query), k, scratch)

    def query_topk_codes(self, query_codes, k, scratch=None):
        ids, _ = self.query_topk_codes_trace(query_codes, k, scratch)
        return ids

    def query_topk_codes_trace(self, query_codes, k, scratch=None):
        if k < 1:
            raise InputError(f"k must be >= 1, got {k}")
        scratch = scratch or QueryScratch(self)
        codes = np.ascontiguousarray(query_codes, dtype=np.uint32)
        if codes.shape != (self.config.hash_spec.m,):
            raise InputError(f"expected {self.config.hash_spec.m} query codes")
        n_touched = _kernels.gather_counts(
            self.table_offsets,
            self.table_payload,
            codes,
            1 << self.config.hash_spec.l_bits,
            scratch.cell_counts,
            scratch.touched,
        )
        cap = min(k, self.n_points)
        out_ids = np.empty(cap, dtype=np.int64)
        out_counts = np.empty(cap, dtype=np.int32)
        m = self.config.hash_spec.m
        reps = self.config.repetitions
        if scratch.point_bits is not None:
            n_emit = _kernels.nb_emit_topk_bits(
                scratch.touched, n_touched, scratch.cell_counts,
                self.cell_offsets, self.cell_members, cap, m,
                scratch.point_bits, out_ids, out_counts,
            )
        else:
            n_emit = _kernels.emit_topk(
                scratch.touched, n_touched, scratch.cell_counts,
                self.cell_offsets, self.cell_members, reps, cap, m,
                scratch.point_counts, out_ids, out_counts,
            )
        return out_ids[:n_emit].copy(), out_counts[:n_emit].copy()

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Little-endian byte image; layout documented in the README."""
        cfg = self.config
        spec = cfg.hash_spec
        width = np.dtype(cfg.cell_dtype).itemsize
        header = _HEADER.pack(
            MAGIC,
            VERSION,
            _KINDS.index(spec.kind),
            _METRICS.index(cfg.metric),
            width,
            0,
            cfg.num_cells,
            cfg.repetitions,
            spec.m,
            spec.l_bits,
            spec.seed,
            spec.dim or 0,
            0,
            self.n_points,
            self.table_payload.shape[0],
        )
        parts = [
            header,
            self.cell_offsets.astype("<i8").tobytes(),
            self.cell_members.astype("<u4").tobytes(),
            self.table_offsets.astype("<i8").tobytes(),
            self.table_payload.astype(f"<u{width}").tobytes(),
        ]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes):
        if len(buf) < _HEADER.size:
            raise FormatError("index image truncated before the header")
        (magic, version, kind_i, metric_i, width, _r0, B, R, m, l_bits, seed, dim, _r1,
         n_points, payload_len) = _HEADER.unpack_from(buf, 0)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise FormatError(f"unsupported index version {version}")
        if kind_i >= len(_KINDS) or metric_i >= len(_METRICS) or width not in (2, 4):
            raise FormatError("corrupt header fields")
        spec = lsh.HashFamilySpec(
            kind=_KINDS[kind_i], m=m, l_bits=l_bits, seed=seed,
            dim=dim if _KINDS[kind_i] == lsh.KIND_SRP else None,
        )
        config = FlinngConfig(num_cells=B, repetitions=R, hash_spec=spec, metric=_METRICS[metric_i])
        config.validate()
        total = B * R
        table_size = 1 << l_bits
        sizes = [
            (total + 1) * 8,
            R * n_points * 4,
            (m * table_size + 1) * 8,
            payload_len * width,
        ]
        if len(buf) != _HEADER.size + sum(sizes):
            raise FormatError(
                f"index image is {len(buf)} bytes, expected {_HEADER.size + sum(sizes)}"
            )
        off = _HEADER.size
        cell_offsets = np.frombuffer(buf[off : off + sizes[0]], dtype="<i8").astype(np.int64)
        off += sizes[0]
        cell_members = np.frombuffer(buf[off : off + sizes[1]], dtype="<u4").astype(np.uint32)
        off += sizes[1]
        table_offsets = np.frombuffer(buf[off : off + sizes[2]], dtype="<i8").astype(np.int64)
        off += sizes[2]
        table_payload = np.frombuffer(buf[off:], dtype=f"<u{width}").astype(config.cell_dtype)
        if cell_offsets[0] != 0 or cell_offsets[-1] != R * n_points or (np.diff(cell_offsets) < 0).any():
            raise FormatError("corrupt membership offsets")
        if table_offsets[0] != 0 or table_offsets[-1] != payload_len or (np.diff(table_offsets) < 0).any():
            raise FormatError("corrupt reverse-table offsets")
        if payload_len and (table_payload.astype(np.int64) >= total).any():
            raise FormatError("reverse-table payload references an out-of-range cell")
        family = lsh.build_family(spec)
        return cls(config, n_points, cell_offsets, cell_members, table_offsets, table_payload, family)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
