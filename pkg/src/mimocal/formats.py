"""Line-oriented text formats for datasets and trained networks.

All reals are written with 17 significant digits, which round-trips every
IEEE double exactly.

Dataset::

    # calib-dataset M=<int> N=<int> P=<int> scenario=<kind> snr_db=<real|inf>
    <re> <im>          one line per complex entry: for each pair, H_UL
    ...                column-major, then H_DL row-major

Model (one block per network; per-user models hold N blocks, and a block
for an untrained user is written as ``# calinet-empty``)::

    # calinet L=<int> dims=<d0,...,dL> activation_out=<tanh|linear> target_scale=<real> mode=<mode>
    <W row>            L layers, each N_l rows of W followed by one line of b
    <b>
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Iterable, TextIO, Union

import numpy as np

from .channels import CalibrationDataset, ScenarioKind
from .errors import InvalidArgumentError
from .network import Activation, Calinet, LayerParams, NetworkParams

PathLike = Union[str, Path]

_HEADER_RE = re.compile(r"^#\s*(\S+)\s*(.*)$")


def fmt_real(x: float) -> str:
    """Shortest form that still carries 17 significant digits."""
    return format(float(x), ".17g")


def _fmt_snr(snr_db) -> str:
    return "inf" if snr_db is None else fmt_real(snr_db)


def _parse_snr(text: str):
    value = float(text)
    if math.isinf(value) and value > 0:
        return None
    return value


def _parse_header(line: str, tag: str) -> dict[str, str]:
    m = _HEADER_RE.match(line.strip())
    if not m or m.group(1) != tag:
        raise InvalidArgumentError(f"expected a '# {tag}' header, got {line.strip()!r}")
    fields = {}
    for token in m.group(2).split():
        key, sep, value = token.partition("=")
        if not sep:
            raise InvalidArgumentError(f"malformed header field {token!r}")
        fields[key] = value
    return fields


# -- datasets -------------------------------------------------------------------


def dumps_dataset(dataset: CalibrationDataset) -> str:
    lines = [
        f"# calib-dataset M={dataset.M} N={dataset.N} P={dataset.P} "
        f"scenario={dataset.kind.value} snr_db={_fmt_snr(dataset.snr_db)}"
    ]
    P = dataset.P
    ul = np.swapaxes(dataset.ul, 1, 2).reshape(P, -1)  # column-major per pair
    entries = np.concatenate([ul, dataset.dl.reshape(P, -1)], axis=1).reshape(-1)
    reals = np.stack([entries.real, entries.imag], axis=1).reshape(-1)
    # "%.17g" is the same rendering as fmt_real, applied in one pass
    body = ("%.17g %.17g\n" * entries.size) % tuple(reals.tolist())
    return "\n".join(lines) + "\n" + body


def loads_dataset(text: str) -> CalibrationDataset:
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise InvalidArgumentError("empty dataset file")
    head = _parse_header(rows[0], "calib-dataset")
    try:
        M, N, P = int(head["M"]), int(head["N"]), int(head["P"])
        kind = ScenarioKind.parse(head["scenario"])
        snr_db = _parse_snr(head["snr_db"])
    except KeyError as exc:
        raise InvalidArgumentError(f"dataset header lacks {exc.args[0]}") from None
    per_pair = 2 * M * N
    body = rows[1:]
    if len(body) != P * per_pair:
        raise InvalidArgumentError(f"expected {P * per_pair} entry lines, found {len(body)}")
    tokens = " ".join(body).split()
    if len(tokens) != 2 * len(body) or not all(ln.count(" ") == 1 for ln in body):
        # slow path: other whitespace, or a line with the wrong number of reals
        for i, ln in enumerate(body):
            if len(ln.split()) != 2:
                raise InvalidArgumentError(f"entry {i + 1} must hold exactly two reals, got {ln.strip()!r}")
    values = np.array(tokens, dtype=np.float64).reshape(-1, 2)
    z = (values[:, 0] + 1j * values[:, 1]).reshape(P, per_pair)
    ul = z[:, : M * N].reshape(P, N, M).transpose(0, 2, 1)
    dl = z[:, M * N :].reshape(P, N, M)
    return CalibrationDataset(np.ascontiguousarray(ul), np.ascontiguousarray(dl), kind, snr_db)


def save_dataset(dataset: CalibrationDataset, path: PathLike):
    Path(path).write_text(dumps_dataset(dataset))


def load_dataset(path: PathLike) -> CalibrationDataset:
    return loads_dataset(Path(path).read_text())


# -- networks ---------------------------------------------------------------------


def _dump_net(net: NetworkParams, scale: float, mode: str) -> Iterable[str]:
    dims = ",".join(str(d) for d in net.dims)
    yield (
        f"# calinet L={len(net.layers)} dims={dims} activation_out={net.output_activation.value} "
        f"target_scale={fmt_real(scale)} mode={mode}"
    )
    for layer in net.layers:
        for row in layer.W:
            yield " ".join(fmt_real(x) for x in row)
        yield " ".join(fmt_real(x) for x in layer.b)


def dumps_model(model: Calinet) -> str:
    lines = []
    for net in model.nets:
        if net is None:
            lines.append(f"# calinet-empty mode={model.mode}")
        else:
            lines.extend(_dump_net(net, model.target_scale, model.mode))
    return "\n".join(lines) + "\n"


def _read_net(head: dict[str, str], rows: list[str], pos: int):
    dims = [int(d) for d in head["dims"].split(",")]
    L = int(head["L"])
    if len(dims) != L + 1:
        raise InvalidArgumentError(f"header says L={L} but lists {len(dims)} widths")
    out_act = Activation(head["activation_out"])
    layers = []
    for i in range(L):
        fan_in, fan_out = dims[i], dims[i + 1]
        W = np.array([[float(t) for t in rows[pos + r].split()] for r in range(fan_out)])
        pos += fan_out
        b = np.array([float(t) for t in rows[pos].split()])
        pos += 1
        if W.shape != (fan_out, fan_in) or b.shape != (fan_out,):
            raise InvalidArgumentError(f"layer {i + 1} does not match dims {dims}")
        act = out_act if i == L - 1 else Activation.TANH
        layers.append(LayerParams(W, b, act))
    return NetworkParams(layers), pos


def loads_model(text: str, M: int = None, N: int = None) -> Calinet:
    """Parse a model file.

    ``M`` and ``N`` are inferred from the network widths when omitted; a
    joint-mode file needs ``N`` to tell users from antennas.
    """
    rows = [ln for ln in text.splitlines() if ln.strip()]
    nets, pos, mode, scale = [], 0, None, 1.0
    while pos < len(rows):
        line = rows[pos]
        if line.startswith("# calinet-empty"):
            mode = _parse_header(line, "calinet-empty").get("mode", mode)
            nets.append(None)
            pos += 1
            continue
        head = _parse_header(line, "calinet")
        mode = head.get("mode", "per_user")
        scale = float(head.get("target_scale", "1"))
        net, pos = _read_net(head, rows, pos + 1)
        nets.append(net)
    trained = [n for n in nets if n is not None]
    if not trained:
        raise InvalidArgumentError("model file holds no network")
    width = trained[0].input_dim
    if mode == "joint":
        if N is None:
            raise InvalidArgumentError("joint-mode models need N to be given")
        M = width // (2 * N)
    else:
        M, N = width // 2, len(nets)
    return Calinet(nets, mode, M, N, scale)


def save_model(model: Calinet, path: PathLike):
    Path(path).write_text(dumps_model(model))


def load_model(path: PathLike, N: int = None) -> Calinet:
    return loads_model(Path(path).read_text(), N=N)
