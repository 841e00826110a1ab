#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerate the bundled traffic tables.

Realistic-application tables are approximations: task graphs are laid out
row-major on the mesh and per-edge packet counts follow the listed relative
bandwidths, scaled to the packet budget by largest remainder.
"""

import os

HERE = os.path.dirname(os.path.abspath(__file__))
HEADER = "src_x,src_y,src_z,dst_x,dst_y,dst_z,packet_count,packet_length,interval_cycles"


def coord(i, dims):
    x, y, _ = dims
    return (i % x, (i // x) % y, i // (x * y))


def scale(weights, total):
    s = sum(weights)
    raw = [w * total / s for w in weights]
    counts = [int(r) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (counts[i] - raw[i], i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def write(name, title, dims, rows):
    total = sum(r[6] for r in rows)
    with open(os.path.join(HERE, name), "w") as f:
        f.write(f"# {title}\n")
        f.write(f"# mesh {dims[0]}x{dims[1]}x{dims[2]}, {total} packets\n")
        f.write(f"# {HEADER}\n")
        for r in rows:
            f.write(",".join(str(v) for v in r) + "\n")


def task_graph(name, title, dims, edges, total, tasks_per_node=1):
    counts = scale([w for _, _, w in edges], total)
    rows = []
    for (a, b, _), n in zip(edges, counts):
        s = coord(a // tasks_per_node, dims)
        d = coord(b // tasks_per_node, dims)
        if s == d or n == 0:
            continue
        rows.append((*s, *d, n, 10, 100))
    assert sum(r[6] for r in rows) == total, (name, sum(r[6] for r in rows))
    write(name, title, dims, rows)


def matrix():
    rows = []
    for y in range(6):
        for x in range(6):
            for k in range(6):
                if k != x:
                    rows.append((x, y, 0, k, y, 1, 2, 10, 100))
            for k in range(6):
                if k != y:
                    rows.append((x, y, 0, x, k, 1, 2, 10, 100))
    for y in range(6):
        for x in range(6):
            rows.append((x, y, 1, x, y, 2, 10, 10, 100))
    write("matrix_6x6x3.csv", "6x6 matrix multiply: operand rows and columns from layer 0 to layer 1, results to layer 2", (6, 6, 3), rows)


def h264():
    # Encoder pipeline stages placed along a snake through the 27 nodes,
    # plus reference-frame feedback edges.
    order = []
    for z in range(3):
        for y in range(3):
            xs = range(3) if (y + z) % 2 == 0 else range(2, -1, -1)
            for x in xs:
                order.append(x + 3 * y + 9 * z)
    edges = [(order[i], order[i + 1], 4 if i % 3 == 0 else 2) for i in range(26)]
    edges += [(order[i + 9], order[i], 1) for i in range(0, 18, 3)]
    task_graph("h264_3x3x3.csv", "H.264 encoder (approximate task graph)", (3, 3, 3), edges, 8400)


def vopd():
    edges = [
        (0, 1, 70), (1, 2, 362), (2, 3, 362), (3, 4, 362), (4, 5, 49), (5, 6, 357),
        (6, 7, 353), (7, 8, 300), (8, 9, 313), (9, 10, 313), (10, 11, 94),
        (11, 4, 500), (9, 3, 27), (6, 8, 16), (2, 11, 16), (7, 1, 16),
    ]
    task_graph("vopd_3x2x2.csv", "Video object plane decoder (approximate task graph)", (3, 2, 2), edges, 3494)


def mwd():
    edges = [
        (0, 1, 64), (0, 2, 128), (1, 2, 64), (2, 3, 64), (3, 4, 96), (4, 5, 96),
        (5, 6, 96), (6, 7, 64), (7, 8, 64), (8, 9, 96), (9, 10, 64), (10, 11, 64),
    ]
    task_graph("mwd_2x2x3.csv", "Multi-window display (approximate task graph)", (2, 2, 3), edges, 1120)


def pip():
    edges = [(0, 1, 128), (1, 2, 64), (2, 3, 64), (4, 5, 128), (5, 6, 64), (6, 7, 64), (3, 7, 64)]
    task_graph("pip_2x2x2.csv", "Picture-in-picture (approximate task graph)", (2, 2, 2), edges, 512)


if __name__ == "__main__":
    matrix()
    h264()
    vopd()
    mwd()
    pip()
