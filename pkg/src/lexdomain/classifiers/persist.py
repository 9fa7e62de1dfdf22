"""Plain-text model files.

Layout::

    lexdomain-model version=1 algorithm=svm entropy=1 lo=<csv> hi=<csv>
    hyper k=1 c=1.0 ridge=1e-08 rounds=10 max_iters=- tolerance=- seed=0
    param w float64 4
    <values>
    ...
    end

Floats are written with ``repr`` so a load reproduces every bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..featurizer import FeatureSetConfig

FORMAT_VERSION = 1
MAGIC = "lexdomain-model"


class ModelFormatError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (np.integer, int)):
        return str(int(x))
    return repr(float(x))


def _csv(values) -> str:
    return ",".join(_fmt(v) for v in values)


def dumps_model(m) -> str:
    hp = m.hyper
    opt = lambda v: "-" if v is None else _fmt(v)  # noqa: E731
    lines = [
        f"{MAGIC} version={FORMAT_VERSION} algorithm={m.algorithm} "
        f"entropy={int(m.feature_set.include_entropy)} lo={_csv(m.lo)} hi={_csv(m.hi)}",
        f"hyper k={hp.k} c={_fmt(hp.c)} ridge={_fmt(hp.ridge)} rounds={hp.rounds} "
        f"max_iters={opt(hp.max_iters)} tolerance={opt(hp.tolerance)} seed={hp.seed}",
    ]
    for name in sorted(m.params):
        arr = np.asarray(m.params[name])
        kind = "int64" if arr.dtype.kind in "iu" else "float64"
        shape = ",".join(map(str, arr.shape)) or "-"
        lines.append(f"param {name} {kind} {shape}")
        if arr.ndim == 2:
            lines.extend(" ".join(_fmt(v) for v in row) for row in arr)
        else:
            lines.append(" ".join(_fmt(v) for v in arr.ravel()))
    lines.append("end")
    return "\n".join(lines) + "\n"


def _fields(line: str, prefix: str) -> dict[str, str]:
    head, *rest = line.split()
    if head != prefix:
        raise ModelFormatError(f"expected {prefix!r} line, got {line[:40]!r}")
    out = {}
    for item in rest:
        key, sep, value = item.partition("=")
        if not sep:
            raise ModelFormatError(f"malformed field {item!r}")
        out[key] = value
    return out


def loads_model(text: str):
    from . import HyperParams, TrainedModel

    lines = text.splitlines()
    if len(lines) < 3 or lines[-1] != "end":
        raise ModelFormatError("truncated model file")
    try:
        head = _fields(lines[0], MAGIC)
        if head.get("version") != str(FORMAT_VERSION):
            raise ModelFormatError(f"unsupported model format version {head.get('version')!r}")
        hyper = _fields(lines[1], "hyper")
        opt = lambda v, conv: None if v == "-" else conv(v)  # noqa: E731
        hp = HyperParams(
            algorithm=head["algorithm"],
            k=int(hyper["k"]),
            c=float(hyper["c"]),
            ridge=float(hyper["ridge"]),
            rounds=int(hyper["rounds"]),
            max_iters=opt(hyper["max_iters"], int),
            tolerance=opt(hyper["tolerance"], float),
            seed=int(hyper["seed"]),
        )
        fs = FeatureSetConfig(head["entropy"] == "1")
        lo = np.array([float(v) for v in head["lo"].split(",")])
        hi = np.array([float(v) for v in head["hi"].split(",")])
        params = {}
        i = 2
        while lines[i] != "end":
            _, name, kind, shape_text = lines[i].split()
            shape = () if shape_text == "-" else tuple(int(s) for s in shape_text.split(","))
            dtype = np.int64 if kind == "int64" else np.float64
            conv = int if dtype is np.int64 else float
            nrows = shape[0] if len(shape) == 2 else 1
            values = [conv(v) for row in lines[i + 1 : i + 1 + nrows] for v in row.split()]
            params[name] = np.array(values, dtype=dtype).reshape(shape)
            i += 1 + nrows
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model file: {exc}") from None
    if len(lo) != fs.dimension or len(hi) != fs.dimension:
        raise ModelFormatError("normalisation ranges do not match the feature set")
    return TrainedModel(hp.algorithm, fs, hp, lo, hi, params)


def save_model(m, path: str | Path) -> None:
    Path(path).write_text(dumps_model(m), encoding="utf-8")


def load_model(path: str | Path):
    return loads_model(Path(path).read_text(encoding="utf-8"))
