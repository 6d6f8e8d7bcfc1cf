import numpy as np
import numpy.testing as npt
import pytest

from jadce.errors import ConfigError, DegenerateProblemError, InstanceFileError, UnsupportedVersionError
from jadce.instance import (
    FORMAT_VERSION,
    InstanceConfig,
    gamma_max_of,
    generate,
    load,
    save,
    to_problem,
)
from jadce.metrics import kkt_residual
from jadce.model import vec_pair

from conftest import brute_force_dense


def cfg(**kw):
    base = dict(n_devices=12, n_antennas=3, seq_length=5, n_active=4, seed=42)
    base.update(kw)
    return InstanceConfig(**base)


class TestGenerate:
    def test_deterministic(self):
        a, b = generate(cfg()), generate(cfg())
        npt.assert_array_equal(a.q, b.q)
        npt.assert_array_equal(a.y, b.y)
        npt.assert_array_equal(a.channels, b.channels)
        npt.assert_array_equal(a.active, b.active)

    def test_seed_changes_everything(self):
        a, b = generate(cfg()), generate(cfg(seed=43))
        assert not np.array_equal(a.q, b.q)

    def test_paper_scale_dimensions(self):
        inst = generate(InstanceConfig(
            n_devices=2000, n_antennas=100, seq_length=10, n_active=50,
            noise_var=0.01, seed=0,
        ))
        assert inst.q.shape == (10, 2000)
        assert inst.y.shape == (10, 100)
        assert inst.channels.shape == (2000, 100)
        assert inst.active.size == 50

    def test_silent_network_is_exactly_zero(self):
        inst = generate(cfg(n_active=0, noise_var=0.0))
        npt.assert_array_equal(inst.y, np.zeros_like(inst.y))

    def test_too_many_active_rejected(self):
        with pytest.raises(ConfigError):
            generate(cfg(n_active=13))

    def test_bad_bounds_rejected(self):
        with pytest.raises(ConfigError):
            generate(cfg(n_devices=0))
        with pytest.raises(ConfigError):
            generate(cfg(signature_var=0.0))
        with pytest.raises(ConfigError):
            generate(cfg(noise_var=-1.0))

    def test_signature_variance_statistics(self):
        inst = generate(cfg(n_devices=100, seq_length=100, signature_var=3.0))
        sample_var = inst.q.real.var()
        assert abs(sample_var - 1.5) <= 0.15  # 10% of signature_var/2

    def test_model_consistency_noiseless(self):
        inst = generate(cfg(noise_var=0.0))
        expect = inst.q[:, inst.active] @ inst.channels[inst.active]
        npt.assert_allclose(inst.y, expect, atol=1e-14)
        npt.assert_allclose(
            inst.y, inst.q @ inst.effective_channel(), atol=1e-12
        )


class TestToProblem:
    def test_gamma_max_hand_example(self):
        # one device, one antenna: q = 1, y = 2 gives gamma_max = 2
        from jadce.instance import JadceInstance

        c = cfg(n_devices=1, n_antennas=1, seq_length=1, n_active=1)
        inst = JadceInstance(
            config=c,
            q=np.array([[1.0 + 0j]]),
            y=np.array([[2.0 + 0j]]),
            channels=np.array([[2.0 + 0j]]),
            active=np.array([0], dtype=np.int64),
        )
        assert gamma_max_of(inst) == pytest.approx(2.0, abs=1e-15)
        p = to_problem(inst, gamma_scale=0.5)
        assert p.gamma == pytest.approx(1.0, abs=1e-15)

    def test_gamma_max_matches_dense(self):
        inst = generate(cfg())
        dense = brute_force_dense(inst.q, inst.config.n_antennas)
        b = vec_pair(inst.y)
        bs = 2 * inst.config.n_antennas
        norms = [
            np.linalg.norm(dense[:, i * bs : (i + 1) * bs].T @ b)
            for i in range(inst.config.n_devices)
        ]
        assert gamma_max_of(inst) == pytest.approx(max(norms), abs=1e-10)

    def test_degenerate_rejected(self):
        inst = generate(cfg(n_active=0, noise_var=0.0))
        with pytest.raises(DegenerateProblemError):
            to_problem(inst)

    def test_gamma_scale_bounds(self):
        inst = generate(cfg())
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(ConfigError):
                to_problem(inst, gamma_scale=bad)

    def test_zero_is_optimal_at_gamma_max(self):
        inst = generate(cfg())
        p = to_problem(inst, gamma_scale=1.0)
        x0 = np.zeros(p.op.shape[1])
        assert kkt_residual(p, x0) <= 1e-10 * max(1.0, p.gamma)


class TestSerialization:
    @pytest.mark.parametrize("suffix", ["bin", "json"])
    def test_round_trip(self, tmp_path, suffix):
        inst = generate(cfg())
        path = tmp_path / f"inst.{suffix}"
        save(inst, path)
        back = load(path)
        assert back.config == inst.config
        npt.assert_array_equal(back.q, inst.q)
        npt.assert_array_equal(back.y, inst.y)
        npt.assert_array_equal(back.channels, inst.channels)
        npt.assert_array_equal(back.active, inst.active)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "inst.bin"
        save(generate(cfg()), path)
        data = path.read_bytes()
        for cut in (4, 20, len(data) - 9):
            (tmp_path / "cut.bin").write_bytes(data[:cut])
            with pytest.raises(InstanceFileError):
                load(tmp_path / "cut.bin")

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "inst.bin"
        save(generate(cfg()), path)
        path.write_bytes(path.read_bytes() + b"\x00" * 8)
        with pytest.raises(InstanceFileError):
            load(path)

    def test_version_bump_rejected(self, tmp_path):
        path = tmp_path / "inst.bin"
        save(generate(cfg()), path)
        data = bytearray(path.read_bytes())
        data[8] = FORMAT_VERSION + 1  # little-endian u16 version field
        path.write_bytes(bytes(data))
        with pytest.raises(UnsupportedVersionError, match="version"):
            load(path)

    def test_unrecognized_content_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x01\x02\x03\x04 not an instance")
        with pytest.raises(InstanceFileError):
            load(path)

    def test_json_mirror_stores_pairs(self, tmp_path):
        import json

        inst = generate(cfg(n_devices=2, n_antennas=1, seq_length=2, n_active=1))
        path = tmp_path / "inst.json"
        save(inst, path)
        doc = json.loads(path.read_text())
        assert doc["format_version"] == FORMAT_VERSION
        entry = doc["q"][0][0]
        assert entry == [inst.q[0, 0].real, inst.q[0, 0].imag]
