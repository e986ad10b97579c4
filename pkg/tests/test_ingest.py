import numpy as np
import pytest

from ocfsim.ingest import (
    IngestError,
    RatingsMatrix,
    RawRatings,
    SelectionConfig,
    binarize,
    export_matrix_grid,
    export_metadata,
    import_matrix_grid,
    parse_ratings,
    select_submatrix,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParse:
    def test_single_dat_row(self, tmp_path):
        p = write(tmp_path, "r.dat", "1::10::4::978300760\n")
        raw = parse_ratings(p)
        assert raw.users.tolist() == [1]
        assert raw.items.tolist() == [10]
        assert raw.ratings.tolist() == [4]

    def test_csv_with_header(self, tmp_path):
        p = write(tmp_path, "r.csv",
                  "userId,movieId,rating,timestamp\n7,3,5,100\n7,4,2,101\n")
        raw = parse_ratings(p)
        assert raw.users.tolist() == [7, 7]
        assert raw.ratings.tolist() == [5, 2]

    def test_duplicate_keeps_latest_timestamp(self, tmp_path):
        p = write(tmp_path, "r.dat",
                  "1::10::2::300\n1::10::5::100\n1::10::4::200\n")
        raw = parse_ratings(p)
        assert len(raw) == 1
        assert raw.ratings.tolist() == [2]  # timestamp 300 wins

    def test_duplicate_without_timestamp_keeps_last(self, tmp_path):
        p = write(tmp_path, "r.csv",
                  "user,item,rating\n1,10,2\n1,10,5\n")
        raw = parse_ratings(p)
        assert raw.ratings.tolist() == [5]

    def test_empty_file(self, tmp_path):
        p = write(tmp_path, "r.dat", "")
        with pytest.raises(IngestError, match="empty"):
            parse_ratings(p)

    def test_missing_csv_column(self, tmp_path):
        p = write(tmp_path, "r.csv", "user,item\n1,2\n")
        with pytest.raises(IngestError, match="rating"):
            parse_ratings(p)

    def test_unknown_format(self, tmp_path):
        p = write(tmp_path, "r.dat", "1::2::3::4\n")
        with pytest.raises(IngestError):
            parse_ratings(p, fmt="tsv")


class TestBinarize:
    def test_threshold_mapping(self):
        raw = RawRatings(users=np.arange(5), items=np.zeros(5, dtype=int),
                         ratings=np.array([1, 2, 3, 4, 5]))
        signed = binarize(raw)
        assert signed.ratings.tolist() == [-1, -1, -1, 1, 1]

    def test_out_of_range(self):
        raw = RawRatings(users=np.array([0]), items=np.array([0]),
                         ratings=np.array([6]))
        with pytest.raises(IngestError, match="6"):
            binarize(raw)


def brute_force_selection(signed, cfg):
    """Independent re-derivation of the item/user selection with plain dicts."""
    from collections import defaultdict
    count = defaultdict(int)
    total = defaultdict(int)
    for i, s in zip(signed.items, signed.ratings):
        count[i] += 1
        total[i] += s
    items = [i for i in count
             if count[i] >= cfg.min_item_count
             and (cfg.mode != "debiased"
                  or abs(total[i]) / count[i] <= cfg.bias_tolerance)]
    items.sort(key=lambda i: (-count[i], i))
    cols = items[: cfg.n_items_out]
    colset = set(cols)
    ucount = defaultdict(int)
    for u, i in zip(signed.users, signed.items):
        if i in colset:
            ucount[u] += 1
    users = sorted(ucount, key=lambda u: (-ucount[u], u))[: cfg.n_users_out]
    return users, cols


class TestSelectSubmatrix:
    def make_corpus(self, seed=0, n=50, m=40, density=0.4):
        rng = np.random.default_rng(seed)
        mask = rng.random((n, m)) < density
        us, its = np.nonzero(mask)
        signs = rng.choice([-1, 1], size=len(us))
        return RawRatings(users=us, items=its, ratings=signs)

    def test_matches_brute_force(self):
        signed = self.make_corpus()
        cfg = SelectionConfig(n_users_out=20, n_items_out=15,
                              min_item_count=3, bias_tolerance=0.5)
        m = select_submatrix(signed, cfg)
        users, cols = brute_force_selection(signed, cfg)
        assert m.row_ids.tolist() == users
        assert m.col_ids.tolist() == cols

    def test_entries_and_fractions(self):
        signed = self.make_corpus(seed=3)
        cfg = SelectionConfig(n_users_out=10, n_items_out=10,
                              min_item_count=1, bias_tolerance=1.0)
        m = select_submatrix(signed, cfg)
        lookup = {(u, i): s for u, i, s in
                  zip(signed.users, signed.items, signed.ratings)}
        for r, u in enumerate(m.row_ids):
            for c, i in enumerate(m.col_ids):
                assert m.entries[r, c] == lookup.get((u, i), 0)
        assert m.pos_fraction == (m.entries == 1).mean()
        assert m.neg_fraction == (m.entries == -1).mean()

    def test_debiased_respects_tolerance(self):
        signed = self.make_corpus(seed=5, density=0.6)
        cfg = SelectionConfig(n_users_out=10, n_items_out=5,
                              min_item_count=1, bias_tolerance=0.2)
        m = select_submatrix(signed, cfg)
        for c, i in enumerate(m.col_ids):
            sel = signed.ratings[signed.items == i]
            assert abs(sel.sum()) / len(sel) <= 0.2

    def test_most_rated_ignores_bias(self):
        # one item rated by everyone, always +1: kept only in most-rated mode
        n = 30
        us = np.concatenate([np.arange(n), np.arange(n)])
        its = np.concatenate([np.zeros(n, int), np.ones(n, int)])
        signs = np.concatenate([np.ones(n, int),
                                np.where(np.arange(n) % 2 == 0, 1, -1)])
        signed = RawRatings(users=us, items=its, ratings=signs)
        base = dict(n_users_out=5, n_items_out=1, min_item_count=1,
                    bias_tolerance=0.1)
        top = select_submatrix(signed, SelectionConfig(mode="most-rated", **base))
        assert top.col_ids.tolist() == [0]  # tie on count, id asc
        deb = select_submatrix(signed, SelectionConfig(mode="debiased", **base))
        assert deb.col_ids.tolist() == [1]  # item 0 fails the bias filter

    def test_too_few_items(self):
        signed = self.make_corpus()
        cfg = SelectionConfig(n_users_out=5, n_items_out=1000)
        with pytest.raises(IngestError, match="items"):
            select_submatrix(signed, cfg)

    def test_too_few_users(self):
        signed = self.make_corpus()
        cfg = SelectionConfig(n_users_out=1000, n_items_out=10,
                              bias_tolerance=1.0)
        with pytest.raises(IngestError, match="users"):
            select_submatrix(signed, cfg)

    def test_bad_mode(self):
        with pytest.raises(IngestError):
            select_submatrix(self.make_corpus(),
                             SelectionConfig(mode="densest"))


class TestGridIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        entries = rng.choice([-1, 0, 1], size=(6, 9)).astype(np.int8)
        m = RatingsMatrix(entries, np.arange(6), np.arange(9), 0.0, 0.0)
        p = tmp_path / "grid.txt"
        export_matrix_grid(m, p)
        assert np.array_equal(import_matrix_grid(p), entries)

    def test_import_rejects_other_values(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("0 1 2\n")
        with pytest.raises(IngestError):
            import_matrix_grid(p)

    def test_metadata_sidecar(self, tmp_path):
        entries = np.zeros((2, 3), dtype=np.int8)
        m = RatingsMatrix(entries, np.array([5, 9]), np.array([1, 2, 3]),
                          0.0, 0.0)
        p = tmp_path / "grid.meta"
        export_metadata(m, SelectionConfig(), p)
        text = p.read_text()
        assert "n_users = 2" in text
        assert "row_ids = 5 9" in text
        assert "filter_order = bias-then-count" in text
