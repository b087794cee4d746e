"""Reading and writing waveforms, spectrograms and dispersion tables.

Waveforms are stored as raw little-endian float32 samples next to a JSON
sidecar holding ``sample_rate`` and ``t0``. PCM ``.wav`` recordings (16-bit
integer or 32-bit float, mono) are accepted on input.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import InputError
from .synth import Waveform

SIDECAR_SUFFIX = ".json"


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def write_waveform(path, w: Waveform) -> list[Path]:
    """Write ``path`` (float32 LE samples) and its sidecar; return both paths."""
    path = Path(path)
    path.write_bytes(np.asarray(w.samples, dtype="<f4").tobytes())
    meta = {"sample_rate": float(w.sample_rate), "t0": float(w.t0)}
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    return [path, side]


def read_waveform(path) -> Waveform:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"cannot read waveform file {path}")
    if path.suffix.lower() == ".wav":
        return _read_wav(path)
    side = sidecar_path(path)
    if not side.is_file():
        raise InputError(f"missing sidecar {side} for raw waveform {path}")
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
        fs, t0 = float(meta["sample_rate"]), float(meta["t0"])
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed sidecar {side}: {exc}") from None
    raw = path.read_bytes()
    if len(raw) % 4:
        raise InputError(f"{path} is not a whole number of float32 samples")
    return Waveform(fs, t0, np.frombuffer(raw, dtype="<f4").astype(float))


def _read_wav(path: Path) -> Waveform:
    fs, data = wavfile.read(path)
    if data.ndim != 1:
        raise InputError(f"{path}: only mono recordings are supported")
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise InputError(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(float(fs), 0.0, x)


def _fmt(v) -> str:
    return repr(float(v))


def dispersion_csv(rows) -> str:
    """CSV with columns ``m,f_hz,t_s`` from an (n, 3) array."""
    lines = ["m,f_hz,t_s"]
    for m, f, t in np.asarray(rows, dtype=float).reshape(-1, 3):
        lines.append(f"{int(m)},{_fmt(f)},{_fmt(t)}")
    return "\n".join(lines) + "\n"


def read_dispersion_csv(text: str) -> np.ndarray:
    body = [ln for ln in text.splitlines()[1:] if ln.strip()]
    if not body:
        return np.empty((0, 3))
    return np.array([[float(c) for c in ln.split(",")] for ln in body])


def ridge_rows(m: int, curve) -> np.ndarray:
    curve = np.asarray(curve, dtype=float).reshape(-1, 2)
    return np.column_stack([np.full(len(curve), m), curve])


def spectrogram_pgm(sg, dynamic_range_db: float = 60.0) -> bytes:
    """8-bit binary PGM of a spectrogram in dB; frequency increases upward."""
    mag = np.asarray(sg.mag, dtype=float).T[::-1]
    peak = mag.max() if mag.size else 0.0
    if peak > 0:
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(mag / peak)
        img = np.clip(255 * (1 + db / dynamic_range_db), 0, 255).astype(np.uint8)
    else:
        img = np.zeros(mag.shape, dtype=np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
