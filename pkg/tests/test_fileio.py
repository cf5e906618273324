import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segfuse import fileio
from segfuse.core import (
    UNLABELED_ID,
    CertaintyTable,
    FusionPolicy,
    IoUReport,
    LabelMap,
    ProbMap,
)

HEADER = struct.Struct("<4sIIIH")


def random_probmap(rng, h, w, c):
    # float32-representable probabilities so round trips are bit-exact
    raw = rng.random((h, w, c)).astype(np.float32).astype(np.float64) + 1e-3
    probs = (raw / raw.sum(axis=2, keepdims=True)).astype(np.float32)
    return ProbMap(probs.astype(np.float64))


def random_labelmap(rng, h, w, c, unlabeled_frac=0.2):
    vals = rng.integers(0, c, size=(h, w))
    vals[rng.random((h, w)) < unlabeled_frac] = UNLABELED_ID
    return LabelMap(vals, c)


class TestProbMapCodec:
    def test_single_pixel_example(self):
        body = struct.pack("<2f", 0.6, 0.4)
        data = HEADER.pack(b"PMAP", 1, 1, 1, 2) + body
        pm = fileio.read_probmap(data)
        assert pm.values.shape == (1, 1, 2)
        np.testing.assert_allclose(pm.values[0, 0], [0.6, 0.4], atol=1e-7)

    def test_roundtrip_identity_on_file_bytes(self):
        rng = np.random.default_rng(0)
        pm = random_probmap(rng, 3, 4, 5)
        data = fileio.write_probmap(pm)
        assert fileio.write_probmap(fileio.read_probmap(data)) == data

    def test_bad_sum_rejected_without_renormalize(self):
        body = struct.pack("<2f", 0.45, 0.45)  # sums to 0.9
        data = HEADER.pack(b"PMAP", 1, 1, 1, 2) + body
        with pytest.raises(ValueError, match="sum"):
            fileio.read_probmap(data)

    def test_renormalize_applies_softmax_to_logits(self):
        logits = np.array([[[2.0, 0.0, -1.0]]], dtype=np.float32)
        data = HEADER.pack(b"PMAP", 1, 1, 1, 3) + logits.tobytes()
        pm = fileio.read_probmap(data, renormalize=True)
        e = np.exp(np.array([2.0, 0.0, -1.0]) - 2.0)
        np.testing.assert_allclose(pm.values[0, 0], e / e.sum(), rtol=1e-6)

    def test_bad_magic(self):
        data = HEADER.pack(b"XMAP", 1, 1, 1, 2) + struct.pack("<2f", 0.5, 0.5)
        with pytest.raises(ValueError, match="magic"):
            fileio.read_probmap(data)

    def test_dimension_overflow(self):
        data = HEADER.pack(b"PMAP", 1, 2**31 - 1, 2**31 - 1, 255)
        with pytest.raises(ValueError, match="overflow"):
            fileio.read_probmap(data)

    def test_body_length_mismatch(self):
        data = HEADER.pack(b"PMAP", 1, 2, 2, 2) + b"\x00" * 8
        with pytest.raises(ValueError, match="body"):
            fileio.read_probmap(data)

    @given(st.integers(0, 2**32 - 1), st.integers(0, 3))
    @settings(max_examples=40, deadline=None)
    def test_header_field_fuzz(self, word, pos):
        rng = np.random.default_rng(7)
        data = bytearray(fileio.write_probmap(random_probmap(rng, 2, 2, 3)))
        offset = 4 * pos  # corrupt magic/version/H/W
        original = data[offset:offset + 4]
        data[offset:offset + 4] = struct.pack("<I", word)
        if bytes(data[offset:offset + 4]) == bytes(original):
            return
        with pytest.raises(ValueError):
            fileio.read_probmap(bytes(data))

    @pytest.mark.parametrize("classes", [1, 2, 4, 200])
    def test_class_count_corruption_rejected(self, classes):
        rng = np.random.default_rng(8)
        data = bytearray(fileio.write_probmap(random_probmap(rng, 2, 2, 3)))
        data[16:18] = struct.pack("<H", classes)  # true count is 3
        with pytest.raises(ValueError):
            fileio.read_probmap(bytes(data))


class TestLabelMapCodec:
    def test_2x2_byte_level_oracle(self):
        lm = LabelMap(np.array([[0, 1], [2, UNLABELED_ID]]), 3)
        data = fileio.write_labelmap(lm)
        expected = HEADER.pack(b"LMAP", 1, 2, 2, 3) + struct.pack(
            "<4H", 0, 1, 2, UNLABELED_ID
        )
        assert data == expected
        back = fileio.read_labelmap(data)
        assert np.array_equal(back.values, lm.values)
        assert fileio.write_labelmap(back) == data

    def test_out_of_range_id_rejected(self):
        data = HEADER.pack(b"LMAP", 1, 1, 2, 3) + struct.pack("<2H", 0, 3)
        with pytest.raises(ValueError):
            fileio.read_labelmap(data)

    @given(st.integers(0, 2**32), st.integers(2, 6), st.integers(1, 5), st.integers(1, 5))
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_random_maps(self, seed, c, h, w):
        rng = np.random.default_rng(seed)
        lm = random_labelmap(rng, h, w, c)
        data = fileio.write_labelmap(lm)
        assert fileio.write_labelmap(fileio.read_labelmap(data)) == data

    @given(st.integers(0, 2**32), st.integers(2, 5), st.integers(1, 4), st.integers(1, 4))
    @settings(max_examples=50, deadline=None)
    def test_probmap_roundtrip_random(self, seed, c, h, w):
        rng = np.random.default_rng(seed)
        pm = random_probmap(rng, h, w, c)
        data = fileio.write_probmap(pm)
        assert fileio.write_probmap(fileio.read_probmap(data)) == data


class TestJsonCsv:
    def test_policy_roundtrip(self):
        p = FusionPolicy(np.array([0, 2, 1]), 3)
        q = fileio.policy_from_json(fileio.policy_to_json(p))
        assert np.array_equal(p.assignment, q.assignment)
        assert q.num_teachers == 3

    def test_policy_json_shape(self):
        import json

        obj = json.loads(fileio.policy_to_json(FusionPolicy(np.array([1, 0]), 2)))
        assert obj == {"classes": 2, "teachers": 2, "assignment": [1, 0]}

    def test_policy_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            fileio.policy_from_json('{"classes": 3, "teachers": 2, "assignment": [0]}')

    def test_report_roundtrip_with_undefined(self):
        r = IoUReport(np.array([0.5, np.nan, 1.0]))
        back = fileio.report_from_json(fileio.report_to_json(r))
        assert np.isnan(back.per_class[1])
        assert back.per_class[0] == 0.5

    def test_table_csv_roundtrip(self):
        t = CertaintyTable(np.array([[0.25, np.nan], [1.0, 0.125]]))
        text = fileio.table_to_csv(t)
        assert text.splitlines()[0] == "class,teacher,rho"
        back = fileio.table_from_csv(text)
        assert np.isnan(back.rho[0, 1])
        assert back.rho[1, 1] == 0.125

    def test_histogram_csv(self):
        text = fileio.histogram_to_csv(np.array([2, 0, 3]), np.array([0.0, 0.5, 0.75, 1.0]))
        lines = text.splitlines()
        assert lines[0] == "bin_low,bin_high,count"
        assert lines[1] == "0.0,0.5,2"
        assert lines[3] == "0.75,1.0,3"


class TestAtomicWrite:
    def test_writes_and_replaces(self, tmp_path):
        path = tmp_path / "out.bin"
        fileio.write_bytes_atomic(str(path), b"one")
        fileio.write_bytes_atomic(str(path), b"two")
        assert path.read_bytes() == b"two"
        leftovers = [p for p in tmp_path.iterdir() if p.name.startswith(".segfuse-")]
        assert leftovers == []
