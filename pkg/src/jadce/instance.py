"""Random uplink instances and their group-lasso form.

Generation is a pure function of the configuration: the generator is
numpy's PCG64 seeded with ``config.seed``, and the draw order is fixed as
Q (real plane, imaginary plane), H (real, imaginary), noise (real,
imaginary), then a device permutation whose first K entries form the
active set.  Inactive channel rows are drawn and then masked, so the
stream never depends on which devices end up active.
"""

import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateProblemError,
    InstanceFileError,
    UnsupportedVersionError,
)
from .model import MeasurementOperator, vec_pair

FORMAT_NAME = "jadce-instance"
FORMAT_VERSION = 1
_MAGIC = b"JADCEBIN"


@dataclass(frozen=True)
class InstanceConfig:
    """Dimensions and distributions of one random uplink instance.

    Variances are per complex entry and split evenly between the real and
    imaginary parts (circularly symmetric convention).  ``n_active`` may be
    zero, which together with ``noise_var = 0`` yields an exactly zero
    received signal.
    """

    n_devices: int
    n_antennas: int
    seq_length: int
    n_active: int
    signature_var: float = 1.0
    noise_var: float = 0.01
    channel_var: float = 1.0
    seed: int = 0

    def validate(self):
        if self.n_devices < 1:
            raise ConfigError(f"n_devices must be >= 1, got {self.n_devices}")
        if self.n_antennas < 1:
            raise ConfigError(f"n_antennas must be >= 1, got {self.n_antennas}")
        if self.seq_length < 1:
            raise ConfigError(f"seq_length must be >= 1, got {self.seq_length}")
        if not 0 <= self.n_active <= self.n_devices:
            raise ConfigError(
                f"n_active must satisfy 0 <= n_active <= n_devices, "
                f"got n_active={self.n_active} with n_devices={self.n_devices}"
            )
        if self.signature_var <= 0 or self.channel_var <= 0:
            raise ConfigError("signature_var and channel_var must be positive")
        if self.noise_var < 0:
            raise ConfigError(f"noise_var must be >= 0, got {self.noise_var}")


@dataclass(frozen=True)
class JadceInstance:
    """One generated uplink: signatures, received block, and ground truth."""

    config: InstanceConfig
    q: np.ndarray = field(repr=False)  # (L, N) complex signatures
    y: np.ndarray = field(repr=False)  # (L, M) complex received signal
    channels: np.ndarray = field(repr=False)  # (N, M) complex, all devices
    active: np.ndarray = field(repr=False)  # sorted 0-based device indices

    def effective_channel(self):
        """Channel matrix with inactive device rows zeroed (the recovery target)."""
        x = np.zeros_like(self.channels)
        x[self.active] = self.channels[self.active]
        return x

    def operator(self):
        return MeasurementOperator(self.q, self.config.n_antennas)


@dataclass(frozen=True)
class GroupLassoProblem:
    """``min 0.5*||A x - b||^2 + gamma * sum_i ||x_i||`` in structured form."""

    op: MeasurementOperator
    b: np.ndarray = field(repr=False)
    gamma: float
    gamma_max: float


def _draw_complex(rng, shape, var):
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    scale = np.sqrt(var / 2.0)
    return scale * re + 1j * (scale * im)


def generate(config):
    """Generate one instance deterministically from its configuration."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    L, N, M, K = config.seq_length, config.n_devices, config.n_antennas, config.n_active
    q = _draw_complex(rng, (L, N), config.signature_var)
    h = _draw_complex(rng, (N, M), config.channel_var)
    noise = _draw_complex(rng, (L, M), config.noise_var) if config.noise_var > 0 else (
        np.zeros((L, M), dtype=np.complex128)
    )
    active = np.sort(rng.permutation(N)[:K]).astype(np.int64)
    y = q[:, active] @ h[active] + noise
    for arr in (q, h, noise, y, active):
        arr.setflags(write=False)
    return JadceInstance(config=config, q=q, y=y, channels=h, active=active)


def gamma_max_of(inst):
    """Largest per-block adjoint norm ``max_i ||A_i^T b||`` of an instance."""
    op = inst.operator()
    blocks = op.rmatvec(vec_pair(inst.y)).reshape(op.n_blocks, 2 * op.m)
    return float(np.sqrt((blocks * blocks).sum(axis=1)).max(initial=0.0))


def to_problem(inst, gamma_scale=0.5):
    """Convert an instance to its group-lasso form with ``gamma = gamma_scale * gamma_max``."""
    if not 0 < gamma_scale <= 1:
        raise ConfigError(f"gamma_scale must lie in (0, 1], got {gamma_scale}")
    gmax = gamma_max_of(inst)
    if gmax <= 0:
        raise DegenerateProblemError(
            "gamma_max is zero (received signal orthogonal to every signature); "
            "the zero vector is the only solution at any positive gamma"
        )
    return GroupLassoProblem(
        op=inst.operator(),
        b=vec_pair(inst.y),
        gamma=float(gamma_scale * gmax),
        gamma_max=gmax,
    )


# -- serialization -----------------------------------------------------------
#
# Binary container: magic "JADCEBIN", u16 little-endian format version,
# u16 reserved, u32 little-endian header length, UTF-8 JSON header
# {"format", "format_version", "config"}, then C-order little-endian f64
# planes Q.re, Q.im, Y.re, Y.im, H.re, H.im, then the active set as
# little-endian i64 (0-based device indices).  The JSON mirror stores the
# same fields with complex entries as [re, im] pairs.


def _config_dict(config):
    return asdict(config)


def _config_from_dict(d):
    try:
        return InstanceConfig(
            n_devices=int(d["n_devices"]),
            n_antennas=int(d["n_antennas"]),
            seq_length=int(d["seq_length"]),
            n_active=int(d["n_active"]),
            signature_var=float(d["signature_var"]),
            noise_var=float(d["noise_var"]),
            channel_var=float(d["channel_var"]),
            seed=int(d["seed"]),
        )
    except KeyError as exc:
        raise InstanceFileError(f"instance header missing config field {exc}") from exc


def _check_version(version):
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"instance file declares format version {version}; "
            f"this build reads version {FORMAT_VERSION} only"
        )


def save(inst, path):
    """Write an instance to ``path`` (JSON mirror for ``.json``, binary otherwise)."""
    path = str(path)
    if path.endswith(".json"):
        data = _to_json_bytes(inst)
    else:
        data = _to_binary_bytes(inst)
    with open(path, "wb") as fh:
        fh.write(data)


def load(path):
    """Read an instance written by :func:`save` (format sniffed from content)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(_MAGIC):
        return _from_binary_bytes(data)
    if data[:1] in (b"{", b" ", b"\n"):
        return _from_json_bytes(data)
    raise InstanceFileError("not an instance file (unrecognized leading bytes)")


def _to_binary_bytes(inst):
    header = json.dumps(
        {"format": FORMAT_NAME, "format_version": FORMAT_VERSION, "config": _config_dict(inst.config)},
        sort_keys=True,
    ).encode("utf-8")
    out = io.BytesIO()
    out.write(_MAGIC)
    out.write(struct.pack("<HHI", FORMAT_VERSION, 0, len(header)))
    out.write(header)
    for arr in (inst.q, inst.y, inst.channels):
        out.write(np.ascontiguousarray(arr.real, dtype="<f8").tobytes())
        out.write(np.ascontiguousarray(arr.imag, dtype="<f8").tobytes())
    out.write(np.ascontiguousarray(inst.active, dtype="<i8").tobytes())
    return out.getvalue()


def _from_binary_bytes(data):
    fixed = len(_MAGIC) + struct.calcsize("<HHI")
    if len(data) < fixed:
        raise InstanceFileError("instance file truncated inside the fixed header")
    version, _, header_len = struct.unpack_from("<HHI", data, len(_MAGIC))
    _check_version(version)
    if len(data) < fixed + header_len:
        raise InstanceFileError("instance file truncated inside the JSON header")
    try:
        header = json.loads(data[fixed : fixed + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InstanceFileError(f"instance header is not valid JSON: {exc}") from exc
    if header.get("format") != FORMAT_NAME:
        raise InstanceFileError(f"unexpected container format {header.get('format')!r}")
    config = _config_from_dict(header.get("config", {}))
    config.validate()
    L, N, M, K = config.seq_length, config.n_devices, config.n_antennas, config.n_active
    offset = fixed + header_len
    expected = offset + 8 * (2 * L * N + 2 * L * M + 2 * N * M) + 8 * K
    if len(data) != expected:
        raise InstanceFileError(
            f"instance payload has {len(data) - offset} bytes, expected {expected - offset}"
        )

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        return arr.astype(np.float64)

    def take_complex(shape):
        return take(shape) + 1j * take(shape)

    q = take_complex((L, N))
    y = take_complex((L, M))
    h = take_complex((N, M))
    active = np.frombuffer(data, dtype="<i8", count=K, offset=offset).astype(np.int64)
    if K and not (0 <= active.min() and active.max() < N):
        raise InstanceFileError("active-set indices out of range")
    for arr in (q, y, h, active):
        arr.setflags(write=False)
    return JadceInstance(config=config, q=q, y=y, channels=h, active=active)


def _complex_to_pairs(arr):
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _pairs_to_complex(pairs, shape):
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.shape != shape + (2,):
        raise InstanceFileError(f"array of shape {arr.shape} does not match {shape} + (2,)")
    return arr[..., 0] + 1j * arr[..., 1]


def _to_json_bytes(inst):
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": _config_dict(inst.config),
        "q": _complex_to_pairs(inst.q),
        "y": _complex_to_pairs(inst.y),
        "channels": _complex_to_pairs(inst.channels),
        "active": inst.active.tolist(),
    }
    return (json.dumps(doc, sort_keys=True) + "\n").encode("utf-8")


def _from_json_bytes(data):
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InstanceFileError(f"instance JSON unreadable: {exc}") from exc
    if doc.get("format") != FORMAT_NAME:
        raise InstanceFileError(f"unexpected container format {doc.get('format')!r}")
    _check_version(doc.get("format_version"))
    config = _config_from_dict(doc.get("config", {}))
    config.validate()
    L, N, M = config.seq_length, config.n_devices, config.n_antennas
    try:
        q = _pairs_to_complex(doc["q"], (L, N))
        y = _pairs_to_complex(doc["y"], (L, M))
        h = _pairs_to_complex(doc["channels"], (N, M))
        active = np.asarray(doc["active"], dtype=np.int64)
    except KeyError as exc:
        raise InstanceFileError(f"instance JSON missing field {exc}") from exc
    if active.shape != (config.n_active,):
        raise InstanceFileError("active-set length does not match configured count")
    for arr in (q, y, h, active):
        arr.setflags(write=False)
    return JadceInstance(config=config, q=q, y=y, channels=h, active=active)
