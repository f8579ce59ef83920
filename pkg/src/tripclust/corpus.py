"""Trip ingestion and the bag-of-trips corpus representation.

A trip is a categorical triple (origin, destination, time slot).  All trips
of one passenger form a short document; the corpus holds every document plus
one vocabulary per dimension.  Vocabularies are built from the distinct
values observed in the input, in first-appearance order, so ingestion is
deterministic given the row order of the file.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import EmptyCorpusError, RowError, SchemaError, ValidationError

DIM_NAMES = ("origin", "destination", "time")

CORPUS_FILE = "corpus.txt"
VOCAB_FILE = "vocab.txt"


class TripWord(NamedTuple):
    """One trip as a triple of categorical indices."""

    origin: int
    destination: int
    time_slot: int


@dataclass(frozen=True)
class TripSchema:
    """Column names and parsing knobs for raw trip files.

    ``n_time_slots`` controls how integer hours 0-23 are discretized
    (24 keeps hour-of-day resolution).  Non-integer time values are taken
    verbatim as slot labels.  ``min_trips`` drops passengers with fewer
    trips before vocabularies are built.
    """

    passenger_col: str = "passenger_id"
    origin_col: str = "origin"
    destination_col: str = "destination"
    time_col: str = "time"
    delimiter: str = ","
    n_time_slots: int = 24
    min_trips: int = 1


class Document:
    """One passenger's bag of trips with cached per-dimension counts.

    Trips are stored as an (n, 3) integer array; the ``words`` and
    ``per_dim_counts`` views materialize on demand.
    """

    __slots__ = ("passenger_id", "codes", "_counts", "_expanded")

    def __init__(self, passenger_id: str, codes) -> None:
        arr = np.asarray(codes, dtype=np.int32)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
            raise ValidationError(
                f"document {passenger_id!r}: trips must form a nonempty (n, 3) array"
            )
        if arr.min() < 0:
            raise ValidationError(f"document {passenger_id!r}: negative word index")
        self.passenger_id = str(passenger_id)
        self.codes = arr
        self._counts: list | None = None
        self._expanded: list | None = None

    @property
    def n_words(self) -> int:
        return self.codes.shape[0]

    @property
    def words(self) -> list[TripWord]:
        return [TripWord(*row) for row in self.codes.tolist()]

    def dim_counts(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        """Distinct word indices along ``dim`` and their occurrence counts."""
        if self._counts is None:
            self._counts = [
                np.unique(self.codes[:, d].astype(np.int64), return_counts=True)
                for d in range(3)
            ]
        return self._counts[dim]

    @property
    def per_dim_counts(self) -> tuple[dict[int, int], dict[int, int], dict[int, int]]:
        out = []
        for d in range(3):
            uniq, cnt = self.dim_counts(d)
            out.append(dict(zip(uniq.tolist(), cnt.tolist())))
        return tuple(out)

    def expanded(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        """Word indices repeated by multiplicity, with 0-based occurrence offsets.

        For a word appearing c times the offsets run 0..c-1; both arrays have
        length ``n_words``.
        """
        if self._expanded is None:
            exp = []
            for d in range(3):
                uniq, cnt = self.dim_counts(d)
                rep = np.repeat(uniq, cnt)
                starts = np.cumsum(cnt) - cnt
                off = np.arange(int(cnt.sum()), dtype=np.int64) - np.repeat(starts, cnt)
                exp.append((rep, off))
            self._expanded = exp
        return self._expanded[dim]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Document):
            return NotImplemented
        return self.passenger_id == other.passenger_id and np.array_equal(
            self.codes, other.codes
        )

    def __repr__(self) -> str:
        return f"Document({self.passenger_id!r}, n_words={self.n_words})"


class Corpus:
    """All documents plus the three vocabularies."""

    __slots__ = ("documents", "vocab_sizes", "vocab_labels")

    def __init__(self, documents, vocab_sizes, vocab_labels, check: bool = True):
        self.documents: list[Document] = list(documents)
        self.vocab_sizes: tuple[int, int, int] = tuple(int(v) for v in vocab_sizes)
        self.vocab_labels: tuple[list[str], ...] = tuple(
            [str(x) for x in labels] for labels in vocab_labels
        )
        if check:
            self.validate()

    @property
    def n_docs(self) -> int:
        return len(self.documents)

    @property
    def total_words(self) -> int:
        return sum(doc.n_words for doc in self.documents)

    def validate(self) -> None:
        if not self.documents:
            raise EmptyCorpusError("corpus has no documents")
        if len(self.vocab_sizes) != 3 or any(v < 1 for v in self.vocab_sizes):
            raise ValidationError(f"bad vocab sizes {self.vocab_sizes}")
        for dim, labels in enumerate(self.vocab_labels):
            if len(labels) != self.vocab_sizes[dim]:
                raise ValidationError(
                    f"{DIM_NAMES[dim]} has {len(labels)} labels for "
                    f"vocabulary size {self.vocab_sizes[dim]}"
                )
            if len(set(labels)) != len(labels):
                raise ValidationError(f"{DIM_NAMES[dim]} labels are not distinct")
        bound = np.array(self.vocab_sizes, dtype=np.int64)
        for doc in self.documents:
            if (doc.codes.max(axis=0) >= bound).any():
                raise ValidationError(
                    f"document {doc.passenger_id!r} has word indices outside "
                    f"the vocabularies {self.vocab_sizes}"
                )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.vocab_sizes == other.vocab_sizes
            and self.vocab_labels == other.vocab_labels
            and self.documents == other.documents
        )

    def __repr__(self) -> str:
        return f"Corpus(n_docs={self.n_docs}, vocab_sizes={self.vocab_sizes})"


def document_count_vector(doc: Document, vocab_sizes) -> np.ndarray:
    """Flatten a document into a dense joint count vector.

    Entry (o * V_D + d) * V_T + t holds the number of (o, d, t) trips; the
    vector sums to ``doc.n_words``.  The result has length V_O * V_D * V_T,
    so keep the vocabularies small before calling this on many documents.
    """
    vo, vd, vt = (int(v) for v in vocab_sizes)
    codes = doc.codes.astype(np.int64)
    if (codes.max(axis=0) >= np.array([vo, vd, vt])).any():
        raise ValidationError(
            f"document {doc.passenger_id!r} has word indices outside {tuple(vocab_sizes)}"
        )
    flat = (codes[:, 0] * vd + codes[:, 1]) * vt + codes[:, 2]
    return np.bincount(flat, minlength=vo * vd * vt).astype(np.int64)


def _slot_label(slot: int, n_slots: int) -> str:
    if n_slots == 24:
        return str(slot)
    lo = (24 * slot + n_slots - 1) // n_slots
    hi = (24 * (slot + 1) + n_slots - 1) // n_slots - 1
    return f"{lo:02d}-{hi:02d}"


def _parse_time(raw: str, n_slots: int, line_no: int) -> str:
    if not raw:
        raise RowError(line_no, "empty time value")
    try:
        hour = int(raw)
    except ValueError:
        return raw  # already a slot label
    if not 0 <= hour <= 23:
        raise RowError(line_no, f"hour {hour} outside 0-23")
    return _slot_label(hour * n_slots // 24, n_slots)


def _iter_rows(path, schema: TripSchema) -> Iterator[tuple[int, str, str, str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        header = next(reader, None)
        if header is None:
            raise EmptyCorpusError(f"{path}: file is empty")
        names = [h.strip() for h in header]
        wanted = (
            schema.passenger_col,
            schema.origin_col,
            schema.destination_col,
            schema.time_col,
        )
        missing = [c for c in wanted if c not in names]
        if missing:
            raise SchemaError(
                f"{path}: missing column(s) {', '.join(missing)}; header has {names}"
            )
        idx = [names.index(c) for c in wanted]
        width = max(idx) + 1
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < width:
                raise RowError(line_no, f"expected at least {width} fields, got {len(row)}")
            pid = row[idx[0]].strip()
            o = row[idx[1]].strip()
            d = row[idx[2]].strip()
            t = row[idx[3]].strip()
            if not pid:
                raise RowError(line_no, "empty passenger id")
            if not o:
                raise RowError(line_no, "empty origin")
            if not d:
                raise RowError(line_no, "empty destination")
            yield line_no, pid, o, d, t


def load_trips(
    path,
    schema: TripSchema | None = None,
    station_vocab: Sequence[str] | None = None,
) -> Corpus:
    """Read a delimited trip file into a :class:`Corpus`.

    The file needs a header row naming the four schema columns.  Every data
    row is one trip.  When ``station_vocab`` is given, both spatial
    vocabularies are fixed to that list (in order) and unknown stations are
    row errors; this is how the corpus is aligned with graph node indices.

    Raises :class:`SchemaError` for missing columns, :class:`RowError` (with
    the offending line number) for unparseable rows, and
    :class:`EmptyCorpusError` when no trips survive.
    """
    schema = schema or TripSchema()
    if not 1 <= schema.n_time_slots <= 24:
        raise ValidationError(f"n_time_slots must be in 1-24, got {schema.n_time_slots}")
    if schema.min_trips < 1:
        raise ValidationError(f"min_trips must be >= 1, got {schema.min_trips}")

    keep: set[str] | None = None
    if schema.min_trips > 1:
        counts: Counter[str] = Counter()
        for _, pid, _, _, _ in _iter_rows(path, schema):
            counts[pid] += 1
        keep = {pid for pid, c in counts.items() if c >= schema.min_trips}

    fixed = station_vocab is not None
    if fixed:
        o_labels = [str(s) for s in station_vocab]
        if len(set(o_labels)) != len(o_labels):
            raise ValidationError("station vocabulary has duplicate names")
        d_labels = o_labels
        o_map = {s: i for i, s in enumerate(o_labels)}
        d_map = o_map
    else:
        o_labels, d_labels = [], []
        o_map, d_map = {}, {}
    t_labels: list[str] = []
    t_map: dict[str, int] = {}

    def intern(value: str, mapping: dict, labels: list, frozen: bool, line_no: int, what: str) -> int:
        i = mapping.get(value)
        if i is None:
            if frozen:
                raise RowError(line_no, f"unknown {what} {value!r} (not in station vocabulary)")
            i = len(labels)
            mapping[value] = i
            labels.append(value)
        return i

    trips: dict[str, list[int]] = {}
    n_rows = 0
    for line_no, pid, o, d, t in _iter_rows(path, schema):
        if keep is not None and pid not in keep:
            continue
        t_label = _parse_time(t, schema.n_time_slots, line_no)
        oi = intern(o, o_map, o_labels, fixed, line_no, "origin")
        di = intern(d, d_map, d_labels, fixed, line_no, "destination")
        ti = intern(t_label, t_map, t_labels, False, line_no, "time slot")
        trips.setdefault(pid, []).extend((oi, di, ti))
        n_rows += 1
    if n_rows == 0:
        detail = " after the min_trips filter" if keep is not None else ""
        raise EmptyCorpusError(f"{path}: no trip rows{detail}")

    docs = [
        Document(pid, np.asarray(flat, dtype=np.int32).reshape(-1, 3))
        for pid, flat in trips.items()
    ]
    return Corpus(docs, (len(o_labels), len(d_labels), len(t_labels)), (o_labels, d_labels, t_labels))


def write_trips(corpus: Corpus, path, schema: TripSchema | None = None) -> None:
    """Write a corpus back out as a raw trip file (labels, not indices)."""
    schema = schema or TripSchema()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter)
        writer.writerow(
            [schema.passenger_col, schema.origin_col, schema.destination_col, schema.time_col]
        )
        ol, dl, tl = corpus.vocab_labels
        for doc in corpus.documents:
            for o, d, t in doc.codes.tolist():
                writer.writerow([doc.passenger_id, ol[o], dl[d], tl[t]])


def write_corpus(corpus: Corpus, out_dir) -> tuple[Path, Path]:
    """Serialize a corpus: one line per trip plus a sidecar vocabulary file.

    ``corpus.txt`` rows are passenger_id,origin_idx,dest_idx,time_idx and
    ``vocab.txt`` rows are dim,index,label with dim in {origin, destination,
    time}.  Both carry a header row.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / CORPUS_FILE
    vocab_path = out_dir / VOCAB_FILE
    with open(corpus_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["passenger_id", "origin_idx", "dest_idx", "time_idx"])
        for doc in corpus.documents:
            for o, d, t in doc.codes.tolist():
                writer.writerow([doc.passenger_id, o, d, t])
    with open(vocab_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "index", "label"])
        for dim, labels in zip(DIM_NAMES, corpus.vocab_labels):
            for i, label in enumerate(labels):
                writer.writerow([dim, i, label])
    return corpus_path, vocab_path


def read_corpus(in_dir) -> Corpus:
    """Read a corpus serialized by :func:`write_corpus`."""
    in_dir = Path(in_dir)
    by_dim: dict[str, dict[int, str]] = {name: {} for name in DIM_NAMES}
    with open(in_dir / VOCAB_FILE, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["dim", "index", "label"]:
            raise SchemaError(f"{in_dir / VOCAB_FILE}: unexpected header {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 or row[0] not in by_dim:
                raise RowError(line_no, f"bad vocabulary row {row}")
            by_dim[row[0]][int(row[1])] = row[2]
    labels = []
    for name in DIM_NAMES:
        entries = by_dim[name]
        if sorted(entries) != list(range(len(entries))):
            raise ValidationError(f"{name} vocabulary indices are not contiguous from 0")
        labels.append([entries[i] for i in range(len(entries))])

    trips: dict[str, list[int]] = {}
    with open(in_dir / CORPUS_FILE, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["passenger_id", "origin_idx", "dest_idx", "time_idx"]:
            raise SchemaError(f"{in_dir / CORPUS_FILE}: unexpected header {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise RowError(line_no, f"expected 4 fields, got {len(row)}")
            try:
                codes = [int(x) for x in row[1:]]
            except ValueError as exc:
                raise RowError(line_no, f"bad index in {row[1:]}") from exc
            trips.setdefault(row[0], []).extend(codes)
    if not trips:
        raise EmptyCorpusError(f"{in_dir / CORPUS_FILE}: no trip rows")
    docs = [
        Document(pid, np.asarray(flat, dtype=np.int32).reshape(-1, 3))
        for pid, flat in trips.items()
    ]
    return Corpus(docs, tuple(len(l) for l in labels), labels)
