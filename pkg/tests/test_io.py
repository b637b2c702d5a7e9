import numpy as np
import pytest
from synthetic import tucker_tensor

from speckless.decomp import (
    TTModel,
    tt_reconstruct,
    tt_svd_eps,
    tucker_als,
    tucker_reconstruct,
)
from speckless.io import (
    BadMagicError,
    CrcMismatchError,
    FileFormatError,
    InvalidHeaderError,
    ModelConsistencyError,
    TruncatedFileError,
    read_header,
    read_mask_csv,
    read_model,
    read_surfaces_csv,
    read_volume,
    write_mask_csv,
    write_model,
    write_surfaces_csv,
    write_volume,
)
from speckless.metrics import SurfaceSet
from speckless.prox import SpNorm
from speckless.tensor import DenseTensor


@pytest.fixture
def volume():
    rng = np.random.default_rng(401)
    return DenseTensor(rng.standard_normal((4, 5, 6)))


def test_volume_roundtrip_f64_bit_identical(volume, tmp_path):
    path = tmp_path / "v.octv"
    write_volume(volume, path, dtype="f64")
    back = read_volume(path)
    np.testing.assert_array_equal(back.array, volume.array)


def test_volume_roundtrip_f32_quantized(volume, tmp_path):
    path = tmp_path / "v.octv"
    write_volume(volume, path, dtype="f32")
    back = read_volume(path)
    np.testing.assert_array_equal(
        back.array, volume.array.astype(np.float32).astype(np.float64)
    )


def test_volume_file_size_arithmetic(tmp_path):
    path = tmp_path / "big.octv"
    write_volume(DenseTensor(np.zeros((480, 512, 64))), path, dtype="f32")
    header = 4 + 2 + 1 + 1 + 3 * 4
    assert path.stat().st_size == header + 4 * 480 * 512 * 64 + 4
    info = read_header(path)
    assert info["format"] == "volume"
    assert info["dims"] == (480, 512, 64)
    assert info["dtype"] == "f32"


def test_volume_bad_magic(volume, tmp_path):
    path = tmp_path / "v.octv"
    write_volume(volume, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"JUNK"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError):
        read_volume(path)


def test_volume_crc_mismatch(volume, tmp_path):
    path = tmp_path / "v.octv"
    write_volume(volume, path)
    raw = bytearray(path.read_bytes())
    raw[25] ^= 0xFF  # somewhere in the payload
    path.write_bytes(bytes(raw))
    with pytest.raises(CrcMismatchError):
        read_volume(path)


def test_volume_truncation(volume, tmp_path):
    path = tmp_path / "v.octv"
    write_volume(volume, path)
    raw = path.read_bytes()
    for cut in (0, 3, 7, 9, len(raw) // 2, len(raw) - 1):
        path.write_bytes(raw[:cut])
        with pytest.raises(TruncatedFileError):
            read_volume(path)


def test_volume_trailing_garbage(volume, tmp_path):
    path = tmp_path / "v.octv"
    write_volume(volume, path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(InvalidHeaderError):
        read_volume(path)


def test_volume_header_fuzz_never_crashes(volume, tmp_path):
    path = tmp_path / "v.octv"
    write_volume(volume, path)
    raw = path.read_bytes()
    rng = np.random.default_rng(409)
    header_len = 8 + 4 * 3
    for trial in range(300):
        pos = int(rng.integers(0, header_len))
        flip = int(rng.integers(1, 256))
        mutated = bytearray(raw)
        mutated[pos] ^= flip
        path.write_bytes(bytes(mutated))
        try:
            back = read_volume(path)
        except FileFormatError:
            continue
        np.testing.assert_array_equal(back.array, volume.array)


def tt_model():
    rng = np.random.default_rng(419)
    return tt_svd_eps(DenseTensor(rng.standard_normal((5, 6, 4))), 0.2)


def tucker_model():
    rng = np.random.default_rng(421)
    x = DenseTensor(tucker_tensor(rng, (6, 7, 5), (2, 3, 2)))
    return tucker_als(x, (2, 3, 2))


def test_tt_model_roundtrip(tmp_path):
    model = tt_model()
    path = tmp_path / "m.ttml"
    write_model(model, path, norm=SpNorm.S23)
    back = read_model(path)
    assert isinstance(back, TTModel)
    assert back.ranks == model.ranks
    assert back.dims == model.dims
    for a, b in zip(back.cores, model.cores):
        np.testing.assert_array_equal(a, b.astype(np.float32).astype(np.float64))
    # reconstruction differs only by float32 quantization
    ref = tt_reconstruct(model)
    got = tt_reconstruct(back)
    assert np.abs(got.array - ref.array).max() <= 1e-5 * np.abs(ref.array).max()
    info = read_header(path)
    assert info["kind"] == "tt"
    assert info["norm"] is SpNorm.S23
    assert info["stored_cr"] == pytest.approx(model.dims[0] * model.dims[1] * model.dims[2] / model.param_count())


def test_tucker_model_roundtrip(tmp_path):
    model = tucker_model()
    path = tmp_path / "m.ttml"
    write_model(model, path)
    back = read_model(path)
    assert back.ranks == model.ranks
    ref = tucker_reconstruct(model)
    got = tucker_reconstruct(back)
    assert np.abs(got.array - ref.array).max() <= 1e-5 * np.abs(ref.array).max()
    assert read_header(path)["norm"] is None


def test_tucker_model_file_size(tmp_path):
    model = tucker_model()
    path = tmp_path / "m.ttml"
    write_model(model, path)
    i1, i2, i3 = model.dims
    r1, r2, r3 = model.ranks
    header = 4 + 2 + 1 + 1 + 1 + 3 * 4 + 1 + 3 * 4 + 8
    params = r1 * r2 * r3 + i1 * r1 + i2 * r2 + i3 * r3
    assert path.stat().st_size == header + 4 * params + 4


def test_payload_byte_ratio_matches_parameter_cr(tmp_path):
    rng = np.random.default_rng(439)
    volume = DenseTensor(rng.standard_normal((24, 20, 12)))
    model = tt_svd_eps(volume, 0.5)
    vpath = tmp_path / "v.octv"
    mpath = tmp_path / "m.ttml"
    write_volume(volume, vpath, dtype="f32")
    write_model(model, mpath)
    vol_header = 4 + 2 + 1 + 1 + 3 * 4
    model_header = 4 + 2 + 1 + 1 + 1 + 3 * 4 + 1 + 2 * 4 + 8
    vol_payload = vpath.stat().st_size - vol_header - 4
    model_payload = mpath.stat().st_size - model_header - 4
    cr = volume.size / model.param_count()
    assert vol_payload / model_payload == pytest.approx(cr, rel=1e-12)


def test_model_tampered_rank_is_inconsistent(tmp_path):
    model = tt_model()
    path = tmp_path / "m.ttml"
    write_model(model, path)
    raw = bytearray(path.read_bytes())
    rank_offset = 9 + 4 * 3 + 1
    raw[rank_offset] = raw[rank_offset] + 1
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelConsistencyError):
        read_model(path)


def test_model_tampered_cr_is_inconsistent(tmp_path):
    model = tt_model()
    path = tmp_path / "m.ttml"
    write_model(model, path)
    raw = bytearray(path.read_bytes())
    cr_offset = 9 + 4 * 3 + 1 + 4 * 2
    raw[cr_offset : cr_offset + 8] = np.float64(123.456).tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelConsistencyError):
        read_model(path)


def test_model_header_fuzz_never_crashes(tmp_path):
    model = tucker_model()
    path = tmp_path / "m.ttml"
    write_model(model, path)
    raw = path.read_bytes()
    rng = np.random.default_rng(431)
    header_len = 9 + 4 * 3 + 1 + 4 * 3 + 8
    ref = tucker_reconstruct(model).array
    for trial in range(300):
        pos = int(rng.integers(0, header_len))
        flip = int(rng.integers(1, 256))
        mutated = bytearray(raw)
        mutated[pos] ^= flip
        path.write_bytes(bytes(mutated))
        try:
            back = read_model(path)
        except FileFormatError:
            continue
        np.testing.assert_allclose(tucker_reconstruct(back).array, ref, atol=1e-5)


def test_reading_wrong_container_kind(tmp_path, volume):
    vpath = tmp_path / "v.octv"
    write_volume(volume, vpath)
    with pytest.raises(BadMagicError):
        read_model(vpath)
    mpath = tmp_path / "m.ttml"
    write_model(tt_model(), mpath)
    with pytest.raises(BadMagicError):
        read_volume(mpath)


def test_mask_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(433)
    mask = rng.uniform(size=(4, 5, 6)) < 0.2
    path = tmp_path / "mask.csv"
    write_mask_csv(mask, path)
    back = read_mask_csv(path, (4, 5, 6))
    np.testing.assert_array_equal(back, mask)


def test_mask_csv_rejects_out_of_bounds(tmp_path):
    path = tmp_path / "mask.csv"
    path.write_text("i1,i2,i3\n9,1,1\n")
    with pytest.raises(ValueError):
        read_mask_csv(path, (4, 5, 6))


def test_surfaces_csv_roundtrip(tmp_path):
    positions = np.stack(
        [np.full((5, 2), 10.0), np.full((5, 2), 30.0), np.full((5, 2), 45.0)]
    )
    positions += np.arange(5)[None, :, None]
    ss = SurfaceSet(positions=positions, scan_indices=(6, 12))
    path = tmp_path / "s.csv"
    write_surfaces_csv(ss, path)
    back = read_surfaces_csv(path)
    assert back.scan_indices == (6, 12)
    np.testing.assert_allclose(back.positions, ss.positions, rtol=1e-5)


def test_surfaces_csv_incomplete_grid(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("i2,i3,l,position\n1,1,1,10\n2,1,1,10\n1,1,2,20\n")
    with pytest.raises(ValueError):
        read_surfaces_csv(path)
