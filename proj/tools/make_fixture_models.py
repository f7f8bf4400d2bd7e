#!/usr/bin/env python3
"""Writes the small ONNX networks used by the model backend tests.

The networks are hand-constructed rather than trained: darkness (1 - mean RGB)
is average-pooled onto an 8x8 grid, each grid cell proposes a fixed 3x3-cell
box scored by its ink density, and a single mask prototype thresholds the
darkness map. Output tensors follow the YOLOv8-seg layout.

Only the standard library is used; the protobuf messages are encoded by hand.

    python3 tools/make_fixture_models.py tests/fixtures/models
"""

import struct
import sys
from pathlib import Path

FLOAT = 1
INT64 = 7
INPUT = 128
CELL = 16
GRID = INPUT // CELL
PROTO_STRIDE = 4


def varint(v):
    out = bytearray()
    v &= (1 << 64) - 1
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def key(field, wire):
    return varint((field << 3) | wire)


def f_varint(field, v):
    return key(field, 0) + varint(v)


def f_bytes(field, data):
    if isinstance(data, str):
        data = data.encode()
    return key(field, 2) + varint(len(data)) + data


def f_float(field, v):
    return key(field, 5) + struct.pack("<f", v)


def tensor(name, dims, values, dtype=FLOAT):
    fmt = "<%d%s" % (len(values), "f" if dtype == FLOAT else "q")
    msg = b"".join(f_varint(1, d) for d in dims)
    msg += f_varint(2, dtype) + f_bytes(8, name) + f_bytes(9, struct.pack(fmt, *values))
    return msg


def attr_int(name, v):
    return f_bytes(1, name) + f_varint(3, v) + f_varint(20, 2)


def attr_ints(name, vs):
    return f_bytes(1, name) + b"".join(f_varint(8, v) for v in vs) + f_varint(20, 7)


def node(op, inputs, outputs, attrs=()):
    msg = b"".join(f_bytes(1, i) for i in inputs)
    msg += b"".join(f_bytes(2, o) for o in outputs)
    msg += f_bytes(3, outputs[0] + "_" + op) + f_bytes(4, op)
    msg += b"".join(f_bytes(5, a) for a in attrs)
    return msg


def value_info(name, dims):
    shape = b"".join(f_bytes(1, f_varint(1, d)) for d in dims)
    tensor_type = f_varint(1, FLOAT) + f_bytes(2, shape)
    return f_bytes(1, name) + f_bytes(2, f_bytes(1, tensor_type))


def conv(inp, out, weights, bias, cin, cout):
    inits = [tensor(out + "_w", [cout, cin, 1, 1], weights), tensor(out + "_b", [cout], bias)]
    return node("Conv", [inp, out + "_w", out + "_b"], [out], [attr_ints("kernel_shape", [1, 1])]), inits


def pool(inp, out, k):
    return node("AveragePool", [inp], [out], [attr_ints("kernel_shape", [k, k]), attr_ints("strides", [k, k])])


def build(with_protos):
    nodes = []
    inits = []

    n, i = conv("images", "dark", [-1.0 / 3] * 3, [1.0], 3, 1)
    nodes.append(n)
    inits += i

    nodes.append(pool("dark", "dens", CELL))
    n, i = conv("dens", "boxbase", [0.0] * 4, [0.0, 0.0, 3.0 * CELL, 3.0 * CELL], 1, 4)
    nodes.append(n)
    inits += i
    pos = []
    for c in range(4):
        for y in range(GRID):
            for x in range(GRID):
                pos.append([(x + 0.5) * CELL, (y + 0.5) * CELL, 0.0, 0.0][c])
    inits.append(tensor("grid_pos", [1, 4, GRID, GRID], pos))
    nodes.append(node("Add", ["boxbase", "grid_pos"], ["boxes"]))
    n, i = conv("dens", "logit", [20.0], [-5.0], 1, 1)
    nodes.append(n)
    inits += i
    nodes.append(node("Sigmoid", ["logit"], ["score"]))
    n, i = conv("dens", "coeff", [0.0], [1.0], 1, 1)
    nodes.append(n)
    inits += i
    nodes.append(node("Concat", ["boxes", "score", "coeff"], ["headmap"], [attr_int("axis", 1)]))
    inits.append(tensor("det_shape", [3], [1, 6, GRID * GRID], INT64))
    nodes.append(node("Reshape", ["headmap", "det_shape"], ["output0"]))

    outputs = [value_info("output0", [1, 6, GRID * GRID])]
    if with_protos:
        nodes.append(pool("dark", "dark_small", PROTO_STRIDE))
        n, i = conv("dark_small", "output1", [8.0], [-4.0], 1, 1)
        nodes.append(n)
        inits += i
        side = INPUT // PROTO_STRIDE
        outputs.append(value_info("output1", [1, 1, side, side]))

    graph = b"".join(f_bytes(1, n) for n in nodes)
    graph += f_bytes(2, "lens_fixture")
    graph += b"".join(f_bytes(5, t) for t in inits)
    graph += f_bytes(11, value_info("images", [1, 3, INPUT, INPUT]))
    graph += b"".join(f_bytes(12, o) for o in outputs)

    model = f_varint(1, 6)
    model += f_bytes(2, "lens-fixture")
    model += f_bytes(7, graph)
    model += f_bytes(8, f_bytes(1, "") + f_varint(2, 11))
    return model


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/models")
    out.mkdir(parents=True, exist_ok=True)
    (out / "ink_seg.onnx").write_bytes(build(True))
    (out / "ink_det_only.onnx").write_bytes(build(False))


if __name__ == "__main__":
    main()
