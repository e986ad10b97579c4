"""Build a binarized replay corpus from a raw ratings file.

Pipeline: parse (``::``-delimited or CSV) -> binarize (>=4 -> +1, <=3 -> -1,
missing -> 0) -> select a dense submatrix of frequently rated, approximately
unbiased items and the most active users -> export as a plain-text grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


class IngestError(ValueError):
    pass


@dataclass
class RawRatings:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray  # ints in {1..5}

    def __len__(self) -> int:
        return len(self.ratings)


@dataclass
class RatingsMatrix:
    entries: np.ndarray  # (N, M) ints in {-1, 0, +1}
    row_ids: np.ndarray  # original user ids, selection order
    col_ids: np.ndarray  # original item ids, selection order
    pos_fraction: float
    neg_fraction: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class SelectionConfig:
    n_users_out: int = 1000
    n_items_out: int = 500
    min_item_count: int = 1
    bias_tolerance: float = 0.1  # |pos - neg| / rated
    mode: str = "debiased"  # "debiased" | "most-rated"


def parse_ratings(path, fmt: str | None = None) -> RawRatings:
    """Read a ratings file into (user, item, rating) triples.

    fmt "dat" is ``UserID::MovieID::Rating::Timestamp``; fmt "csv" is
    comma-delimited with a header. Auto-detected from the first line when
    omitted. Duplicate (user, item) pairs keep the latest timestamp (or the
    last row in file order when no timestamp column exists).
    """
    with open(path) as f:
        first = f.readline()
    if not first.strip():
        raise IngestError("no ratings parsed: empty file")
    if fmt is None:
        fmt = "dat" if "::" in first else "csv"
    if fmt == "dat":
        df = pd.read_csv(path, sep="::", engine="python", header=None,
                         names=["user", "item", "rating", "timestamp"])
    elif fmt == "csv":
        df = pd.read_csv(path)
        df.columns = [c.strip().lower() for c in df.columns]
        rename = {"userid": "user", "movieid": "item", "itemid": "item"}
        df = df.rename(columns=rename)
        missing = {"user", "item", "rating"} - set(df.columns)
        if missing:
            raise IngestError(f"csv missing columns: {sorted(missing)}")
    else:
        raise IngestError(f"unknown format {fmt!r}")
    if df.empty:
        raise IngestError("no ratings parsed")
    bad = df["rating"].isna() | df["user"].isna() | df["item"].isna()
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 1
        raise IngestError(f"malformed row at data line {line}")
    if "timestamp" in df.columns and df["timestamp"].notna().all():
        df = df.sort_values("timestamp", kind="stable")
    df = df.drop_duplicates(subset=["user", "item"], keep="last")
    return RawRatings(
        users=df["user"].to_numpy(np.int64),
        items=df["item"].to_numpy(np.int64),
        ratings=df["rating"].to_numpy(np.int64),
    )


def binarize(raw: RawRatings) -> RawRatings:
    """Map ratings to signs: >= 4 becomes +1, <= 3 becomes -1. Missing pairs
    are implicitly 0 downstream."""
    r = raw.ratings
    out_of_range = (r < 1) | (r > 5)
    if out_of_range.any():
        bad = int(r[out_of_range][0])
        raise IngestError(f"rating {bad} outside {{1..5}}")
    return RawRatings(users=raw.users, items=raw.items,
                      ratings=np.where(r >= 4, 1, -1).astype(np.int64))


def select_submatrix(signed: RawRatings, cfg: SelectionConfig) -> RatingsMatrix:
    """Dense submatrix of the most-rated (and, in debiased mode, roughly
    sign-balanced) items and the users rating them most.

    Item filter: count >= min_item_count and, in debiased mode,
    |#pos - #neg| / #rated <= bias_tolerance. Survivors are ranked by
    (count desc, id asc) and the top n_items_out kept. Users are then ranked
    by their rating count restricted to the kept items, same tie rule.
    """
    if cfg.mode not in ("debiased", "most-rated"):
        raise IngestError(f"unknown selection mode {cfg.mode!r}")
    df = pd.DataFrame({"user": signed.users, "item": signed.items,
                       "sign": signed.ratings})
    per_item = df.groupby("item")["sign"].agg(count="size", total="sum")
    per_item = per_item[per_item["count"] >= cfg.min_item_count]
    if cfg.mode == "debiased":
        bias = per_item["total"].abs() / per_item["count"]
        per_item = per_item[bias <= cfg.bias_tolerance]
    if len(per_item) < cfg.n_items_out:
        raise IngestError(
            f"only {len(per_item)} items survive the filter "
            f"(need {cfg.n_items_out}); try a larger bias_tolerance")
    per_item = per_item.sort_values(
        ["count", "item"], ascending=[False, True], kind="stable")
    col_ids = per_item.index.to_numpy()[: cfg.n_items_out]

    sub = df[df["item"].isin(col_ids)]
    per_user = sub.groupby("user").size().to_frame("count")
    per_user = per_user.sort_values(
        ["count", "user"], ascending=[False, True], kind="stable")
    row_ids = per_user.index.to_numpy()[: cfg.n_users_out]
    if len(row_ids) < cfg.n_users_out:
        raise IngestError(
            f"only {len(row_ids)} users rate the selected items "
            f"(need {cfg.n_users_out})")

    urow = {u: r for r, u in enumerate(row_ids)}
    icol = {i: c for c, i in enumerate(col_ids)}
    entries = np.zeros((len(row_ids), len(col_ids)), dtype=np.int8)
    kept = sub[sub["user"].isin(row_ids)]
    for u, i, s in zip(kept["user"], kept["item"], kept["sign"]):
        entries[urow[u], icol[i]] = s
    total = entries.size
    return RatingsMatrix(
        entries=entries,
        row_ids=row_ids,
        col_ids=col_ids,
        pos_fraction=float((entries == 1).sum()) / total,
        neg_fraction=float((entries == -1).sum()) / total,
    )


def export_matrix_grid(m: RatingsMatrix, path) -> None:
    """Write the signed entries as a plain-text grid, one row per user,
    space-separated {-1, 0, 1} tokens in selection order."""
    with open(path, "w") as f:
        for row in m.entries:
            f.write(" ".join(str(int(v)) for v in row) + "\n")


def import_matrix_grid(path) -> np.ndarray:
    grid = np.loadtxt(path, dtype=np.int8, ndmin=2)
    if not np.isin(grid, (-1, 0, 1)).all():
        raise IngestError("grid contains values outside {-1, 0, 1}")
    return grid


def export_metadata(m: RatingsMatrix, cfg: SelectionConfig, path) -> None:
    """Key-value sidecar: ids, stats, and the selection config echo."""
    n, mm = m.shape
    with open(path, "w") as f:
        f.write(f"n_users = {n}\n")
        f.write(f"n_items = {mm}\n")
        f.write(f"pos_fraction = {m.pos_fraction!r}\n")
        f.write(f"neg_fraction = {m.neg_fraction!r}\n")
        f.write(f"mode = {cfg.mode}\n")
        f.write(f"min_item_count = {cfg.min_item_count}\n")
        f.write(f"bias_tolerance = {cfg.bias_tolerance!r}\n")
        f.write("filter_order = bias-then-count\n")
        f.write("row_ids = " + " ".join(str(int(u)) for u in m.row_ids) + "\n")
        f.write("col_ids = " + " ".join(str(int(i)) for i in m.col_ids) + "\n")
