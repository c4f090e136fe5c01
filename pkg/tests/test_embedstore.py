import io
import numpy as np
import pytest

from amylopred import embedstore
from amylopred.embedstore import (
    FetchError,
    FormatError,
    PooledEmbedding,
    ResidueEmbeddings,
    fetch_embeddings,
    mean_pool,
    read_embeddings,
    write_embeddings,
)
from amylopred.seqcore import AminoAcidSequence
from conftest import StubProducer


def rec(rec_id, matrix):
    return ResidueEmbeddings(rec_id, np.asarray(matrix, dtype=np.float32))


def random_records(rng, n=3, dim=5):
    return [
        rec(f"r{i}", rng.normal(size=(int(rng.integers(1, 8)), dim)))
        for i in range(n)
    ]


class TestMeanPool:
    def test_two_row_mean(self):
        assert mean_pool(rec("a", [[1, 2], [3, 4]])).vector.tolist() == [2.0, 3.0]

    def test_identity_on_single_row(self):
        assert mean_pool(rec("a", [[5, -1, 0]])).vector.tolist() == [5.0, -1.0, 0.0]

    def test_zero_matrix(self):
        assert mean_pool(rec("a", np.zeros((6, 4)))).vector.tolist() == [0.0] * 4

    def test_permutation_tolerance(self, rng):
        m = rng.normal(size=(40, 16)).astype(np.float32)
        base = mean_pool(rec("a", m)).vector
        for _ in range(10):
            perm = rng.permutation(40)
            shuffled = mean_pool(rec("a", m[perm])).vector
            assert np.allclose(base, shuffled, atol=1e-5)

    @pytest.mark.parametrize("scale", [-2.0, 0.5, 10.0])
    def test_scaling(self, rng, scale):
        m = rng.normal(size=(12, 8)).astype(np.float32)
        base = mean_pool(rec("a", m)).vector.astype(np.float64)
        scaled = mean_pool(rec("a", (m * scale).astype(np.float32))).vector
        assert np.allclose(scaled, scale * base, rtol=1e-6, atol=1e-7)

    def test_dtype_is_float32(self, rng):
        assert mean_pool(rec("a", rng.normal(size=(3, 4)))).vector.dtype == np.float32


class TestRecordValidation:
    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="non-finite"):
            rec("a", [[np.nan, 1.0]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ResidueEmbeddings("a", np.zeros((0, 4), dtype=np.float32))


class TestAembRoundTrip:
    def test_bit_exact_round_trip(self, rng):
        records = random_records(rng)
        buf = io.BytesIO()
        n = write_embeddings(records, buf)
        assert n == len(buf.getvalue())
        buf.seek(0)
        back = read_embeddings(buf)
        assert len(back) == len(records)
        for orig, got in zip(records, back):
            assert got.id == orig.id
            assert got.matrix.tobytes() == orig.matrix.tobytes()

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="bad magic"):
            read_embeddings(io.BytesIO(b"XEMB" + b"\x00" * 16))

    def test_unsupported_version(self, rng):
        buf = io.BytesIO()
        write_embeddings(random_records(rng, n=1), buf)
        data = bytearray(buf.getvalue())
        data[4] = 9
        with pytest.raises(FormatError, match="version"):
            read_embeddings(io.BytesIO(bytes(data)))

    def test_truncation_names_offset(self, rng):
        buf = io.BytesIO()
        write_embeddings(random_records(rng, n=2), buf)
        data = buf.getvalue()
        cut = data[: len(data) // 2]
        with pytest.raises(FormatError, match="truncated") as exc:
            read_embeddings(io.BytesIO(cut))
        assert exc.value.offset <= len(cut)

    def test_header_claims_more_records(self, rng):
        records = random_records(rng, n=1)
        buf = io.BytesIO()
        write_embeddings(records, buf)
        data = bytearray(buf.getvalue())
        data[9:13] = (2).to_bytes(4, "little")  # record count field
        with pytest.raises(FormatError, match="truncated"):
            read_embeddings(io.BytesIO(bytes(data)))

    def test_mixed_dims_rejected_on_write(self, rng):
        records = [rec("a", np.zeros((2, 3))), rec("b", np.zeros((2, 4)))]
        with pytest.raises(ValueError, match="D=4"):
            write_embeddings(records, io.BytesIO())

    def test_file_helpers(self, rng, tmp_path):
        records = random_records(rng)
        path = tmp_path / "x.aemb"
        embedstore.write_embeddings_file(records, path)
        back = embedstore.read_embeddings_file(path)
        assert [r.id for r in back] == [r.id for r in records]


SEQS = [AminoAcidSequence("s1", "STVIIE"), AminoAcidSequence("s2", "WALTWALTW")]


class TestFetchEmbeddings:
    def test_shape_contract(self, producer):
        StubProducer.shuffle = False
        StubProducer.drop_first = False
        StubProducer.status = 200
        records = fetch_embeddings(producer, SEQS)
        assert [r.id for r in records] == ["s1", "s2"]
        assert [r.matrix.shape for r in records] == [(6, 7), (9, 7)]

    def test_out_of_order_response_reordered(self, producer):
        StubProducer.shuffle = True
        try:
            records = fetch_embeddings(producer, SEQS)
        finally:
            StubProducer.shuffle = False
        assert [r.id for r in records] == ["s1", "s2"]

    def test_missing_id_is_error(self, producer):
        StubProducer.drop_first = True
        try:
            with pytest.raises(FetchError, match="'s1'"):
                fetch_embeddings(producer, SEQS)
        finally:
            StubProducer.drop_first = False

    def test_non_2xx_is_error(self, producer):
        StubProducer.status = 500
        try:
            with pytest.raises(FetchError, match="500"):
                fetch_embeddings(producer, SEQS)
        finally:
            StubProducer.status = 200

    def test_unreachable_endpoint(self):
        with pytest.raises(FetchError, match="transport"):
            fetch_embeddings("http://127.0.0.1:1", SEQS, timeout=0.5)

    def test_empty_request(self):
        assert fetch_embeddings("http://127.0.0.1:1", []) == []
