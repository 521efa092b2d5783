"""File formats used by the command line tools.

* Float images: grayscale Portable Float Map (``Pf``), little-endian
  (scale ``-1.0``), rows stored bottom-up.
* Display images: 8-bit binary PGM (``P5``) of a log-compressed envelope.
* Measurements: an 8-line text header followed by little-endian float64.
* Configs and sidecars: flat ``key = value`` lines, ``#`` comments.
"""

import os
import tempfile

import numpy as np

__all__ = [
    "write_pfm",
    "read_pfm",
    "log_compress",
    "write_pgm",
    "read_pgm",
    "MEASUREMENT_MAGIC",
    "write_measurements",
    "read_measurements",
    "parse_config",
    "read_config",
    "format_config",
    "write_config",
    "atomic_write",
]

MEASUREMENT_MAGIC = "CSDECON-MEASUREMENTS"
MEASUREMENT_VERSION = 1


def atomic_write(path, data):
    """Write ``data`` (bytes) to ``path`` through a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def pfm_bytes(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PFM images must be 2D")
    h, w = img.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(img[::-1], dtype="<f4").tobytes()


def write_pfm(path, img):
    """Write a single-channel PFM (float32 payload)."""
    atomic_write(path, pfm_bytes(img))


def _tokens(fh, count):
    out = []
    while len(out) < count:
        line = fh.readline()
        if not line:
            raise ValueError("truncated header")
        line = line.split(b"#", 1)[0]
        out.extend(line.split())
    return out


def read_pfm(path):
    """Read a grayscale PFM into a float64 array (top row first)."""
    with open(path, "rb") as fh:
        magic, w, h, scale = _tokens(fh, 4)
        if magic != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM (magic {magic!r})")
        w, h, scale = int(w), int(h), float(scale)
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != w * h:
        raise ValueError(f"{path}: expected {w * h} samples, found {data.size}")
    return data.reshape(h, w)[::-1].astype(np.float64)


def log_compress(img, dynamic_range_db=40.0):
    """Map ``20 log10(|x| / max|x|)`` clamped to ``[-D, 0]`` onto 0..255."""
    env = np.abs(np.asarray(img, dtype=np.float64))
    peak = env.max()
    if peak == 0:
        return np.zeros(env.shape, dtype=np.uint8)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(env / peak)
    db = np.clip(db, -dynamic_range_db, 0.0)
    return np.round((db + dynamic_range_db) * (255.0 / dynamic_range_db)).astype(np.uint8)


def write_pgm(path, img, dynamic_range_db=40.0):
    """Write a B-mode style 8-bit PGM rendering of ``img``."""
    pix = log_compress(img, dynamic_range_db)
    h, w = pix.shape
    atomic_write(path, f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        magic, w, h, maxval = _tokens(fh, 4)
        if magic != b"P5" or int(maxval) > 255:
            raise ValueError(f"{path}: not an 8-bit binary PGM")
        return np.frombuffer(fh.read(), dtype=np.uint8).reshape(int(h), int(w))


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(e) for e in v)
    return str(v)


def write_measurements(path, y, shape, cs_ratio, sensing_seed, noise_seed, snr_db):
    """Write a measurement vector with its acquisition header."""
    y = np.asarray(y, dtype=np.float64).ravel()
    lines = [
        MEASUREMENT_MAGIC,
        f"version = {MEASUREMENT_VERSION}",
        f"length = {y.size}",
        f"shape = {shape[0]} {shape[1]}",
        f"cs_ratio = {_fmt(float(cs_ratio))}",
        f"sensing_seed = {int(sensing_seed)}",
        f"noise_seed = {int(noise_seed)}",
        f"snr_db = {_fmt(None if snr_db is None else float(snr_db))}",
    ]
    header = ("\n".join(lines) + "\n").encode("ascii")
    atomic_write(path, header + y.astype("<f8").tobytes())


def read_measurements(path):
    """Return ``(y, header)`` where ``header`` is a dict of typed fields."""
    with open(path, "rb") as fh:
        lines = [fh.readline().decode("ascii").strip() for _ in range(8)]
        payload = fh.read()
    if lines[0] != MEASUREMENT_MAGIC:
        raise ValueError(f"{path}: not a measurement file")
    raw = parse_config("\n".join(lines[1:]))
    if int(raw["version"]) != MEASUREMENT_VERSION:
        raise ValueError(f"{path}: unsupported version {raw['version']}")
    header = {
        "length": int(raw["length"]),
        "shape": tuple(int(v) for v in raw["shape"].split()),
        "cs_ratio": float(raw["cs_ratio"]),
        "sensing_seed": int(raw["sensing_seed"]),
        "noise_seed": int(raw["noise_seed"]),
        "snr_db": None if raw["snr_db"] == "none" else float(raw["snr_db"]),
    }
    y = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if y.size != header["length"]:
        raise ValueError(f"{path}: header length {header['length']} but {y.size} samples")
    return y, header


def parse_config(text):
    """Parse flat ``key = value`` text into a dict of strings."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(params):
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(params.items()))


def write_config(path, params):
    atomic_write(path, format_config(params).encode("utf-8"))
