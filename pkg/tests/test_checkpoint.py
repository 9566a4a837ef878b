import numpy as np
import pytest

from paccmann.checkpoint import from_bytes, to_bytes
from paccmann.errors import CorruptCheckpoint, VersionMismatch
from paccmann.model import ENCODER_KINDS, PaccMann

SMALL = dict(dense_layers=(8, 4), attention_dim=4, conv_attention_dim=3, mca_filters=3,
             mca_kernels=(3, 5), scnn_filters=(4, 4, 3, 3), embedding_dim=4)


@pytest.fixture(scope="module")
def trained(tiny_pairs):
    return PaccMann(encoder="SA", max_steps=5, batch_size=16, **SMALL).fit(tiny_pairs)


@pytest.mark.parametrize("kind", ENCODER_KINDS)
def test_round_trip_is_bit_identical(kind, tiny_pairs, tmp_path):
    m = PaccMann(encoder=kind, max_steps=3, batch_size=16, **SMALL).fit(tiny_pairs)
    m.save(tmp_path / "m.ckpt")
    loaded = PaccMann.load(tmp_path / "m.ckpt")
    assert np.array_equal(m.predict(tiny_pairs), loaded.predict(tiny_pairs))
    assert loaded.gene_panel_ == m.gene_panel_ and loaded.max_len_ == m.max_len_
    assert loaded.dictionary_.tokens == m.dictionary_.tokens
    assert to_bytes(loaded) == to_bytes(m)


def test_truncated(trained):
    blob = to_bytes(trained)
    for cut in (3, 40, len(blob) // 2, len(blob) - 1):
        with pytest.raises(CorruptCheckpoint):
            from_bytes(blob[:cut])


def test_bit_flip(trained):
    blob = bytearray(to_bytes(trained))
    blob[-20] ^= 0x01
    with pytest.raises(CorruptCheckpoint, match="checksum"):
        from_bytes(bytes(blob))


def test_version_bump(trained):
    blob = to_bytes(trained).replace(b"format_version=1", b"format_version=2")
    with pytest.raises(VersionMismatch):
        from_bytes(blob)


def test_bounds_persist(tiny_pairs, tmp_path):
    tiny_pairs = tiny_pairs.subset(np.arange(len(tiny_pairs)))
    tiny_pairs.ic50_bounds = (-1.5, 2.25)
    m = PaccMann(encoder="DNN_FP", max_steps=1, batch_size=8, **SMALL).fit(tiny_pairs)
    assert from_bytes(to_bytes(m)).ic50_bounds_ == (-1.5, 2.25)
