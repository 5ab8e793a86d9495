"""On-disk formats: density matrices, sample sets, histograms, window records, reports."""

import json
import struct
from pathlib import Path

import numpy as np

from . import fock
from .sampling import SampleSet
from .temporal import N_SAMPLES, Windows
from .tomography import PhaseSpaceHistogram

WINDOW_MAGIC = b"SQZW"
WINDOW_VERSION = 1
_WINDOW_HEADER = struct.Struct("<4sHIH")


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True, default=_json_default) + "\n"


def write_json(path, obj):
    return _write_text(path, dump_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- density matrices -------------------------------------------------------------


def density_matrix_dict(rho, meta=None):
    rho = fock.as_dm(rho)
    out = {"cutoff": fock.cutoff_of(rho), "re": rho.real.tolist(), "im": rho.imag.tolist()}
    if meta:
        out["meta"] = meta
    return out


def density_matrix_from_dict(obj, check=True):
    rho = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    if rho.shape != (obj["cutoff"] + 1, obj["cutoff"] + 1):
        raise ValueError("density matrix shape does not match its cutoff")
    if check:
        fock.check_density_matrix(rho, herm_tol=1e-9, trace_tol=1e-8, eig_tol=1e-8)
    return rho


def save_density_matrix(path, rho, meta=None):
    return write_json(path, density_matrix_dict(rho, meta))


def load_density_matrix(path, check=True):
    return density_matrix_from_dict(read_json(path), check)


# -- phase space -------------------------------------------------------------------


def wigner_csv(rho, xvec, yvec):
    w = fock.wigner(rho, xvec, yvec)
    lines = ["x,y,w"]
    for j, y in enumerate(yvec):
        for i, x in enumerate(xvec):
            lines.append(f"{float(x)!r},{float(y)!r},{float(w[j, i])!r}")
    return "\n".join(lines) + "\n"


def samples_csv(samples):
    seed = "" if samples.seed is None else int(samples.seed)
    lines = [f"# seed={seed} source={samples.source}", "x,y"]
    lines.extend(f"{float(b.real)!r},{float(b.imag)!r}" for b in samples.beta)
    return "\n".join(lines) + "\n"


def save_samples(path, samples):
    return _write_text(path, samples_csv(samples))


def load_samples(path):
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# "):
        raise ValueError("sample file lacks the '# seed=... source=...' header")
    head = text[0][2:]
    seed_part, _, source = head.partition(" source=")
    seed_txt = seed_part.removeprefix("seed=")
    seed = int(seed_txt) if seed_txt else None
    if text[1].strip() != "x,y":
        raise ValueError("sample file must have an 'x,y' column header")
    data = np.loadtxt(text[2:], delimiter=",", ndmin=2) if len(text) > 2 else np.zeros((0, 2))
    return SampleSet(data[:, 0] + 1j * data[:, 1], seed, source)


def save_histogram(path, hist):
    return write_json(path, hist.as_dict())


def load_histogram(path):
    return PhaseSpaceHistogram.from_dict(read_json(path))


# -- window records ------------------------------------------------------------------


def windows_bytes(windows):
    n = len(windows)
    header = _WINDOW_HEADER.pack(WINDOW_MAGIC, WINDOW_VERSION, n, N_SAMPLES)
    body = np.concatenate([windows.xq, windows.yq], axis=1).astype("<f8").tobytes()
    return header + body


def windows_from_bytes(blob):
    if len(blob) < _WINDOW_HEADER.size:
        raise ValueError("window file truncated")
    magic, version, n, n_samples = _WINDOW_HEADER.unpack_from(blob)
    if magic != WINDOW_MAGIC:
        raise ValueError("not a window file (bad magic)")
    if version != WINDOW_VERSION:
        raise ValueError(f"unsupported window file version {version}")
    if n_samples != N_SAMPLES:
        raise ValueError(f"expected {N_SAMPLES} samples per window, got {n_samples}")
    data = np.frombuffer(blob, dtype="<f8", offset=_WINDOW_HEADER.size)
    if data.size != n * 2 * N_SAMPLES:
        raise ValueError("window file length does not match its header")
    data = data.reshape(n, 2 * N_SAMPLES)
    return Windows(data[:, :N_SAMPLES].copy(), data[:, N_SAMPLES:].copy())


def save_windows(path, windows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(windows_bytes(windows))
    return path


def load_windows(path):
    return windows_from_bytes(Path(path).read_bytes())
