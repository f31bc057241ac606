#!/usr/bin/env python3
"""Writes assets/genus2.off: a 5x3x1 polycube slab with two square holes,
voxelized at `--res` voxels per unit, triangulated and Taubin-smoothed."""

import argparse
from pathlib import Path

HOLES = {(1, 1), (3, 1)}
SIZE = (5, 3, 1)


def filled(res, i, j, k):
    if not (0 <= i < SIZE[0] * res and 0 <= j < SIZE[1] * res and 0 <= k < SIZE[2] * res):
        return False
    return (i // res, j // res) not in HOLES


def boundary_quads(res):
    quads = []
    for i in range(SIZE[0] * res):
        for j in range(SIZE[1] * res):
            for k in range(SIZE[2] * res):
                if not filled(res, i, j, k):
                    continue
                cell = (i, j, k)
                for a in range(3):
                    b, c = (a + 1) % 3, (a + 2) % 3
                    for s in (1, -1):
                        n = list(cell)
                        n[a] += s
                        if filled(res, *n):
                            continue
                        base = list(cell)
                        if s > 0:
                            base[a] += 1
                        eb = [0, 0, 0]
                        eb[b] = 1
                        ec = [0, 0, 0]
                        ec[c] = 1
                        p0 = tuple(base)
                        p1 = tuple(base[x] + eb[x] for x in range(3))
                        p2 = tuple(base[x] + eb[x] + ec[x] for x in range(3))
                        p3 = tuple(base[x] + ec[x] for x in range(3))
                        quads.append((p0, p1, p2, p3) if s > 0 else (p0, p3, p2, p1))
    return quads


def taubin(vertices, triangles, iterations, lam=0.5, mu=-0.53):
    nbrs = [set() for _ in vertices]
    for t in triangles:
        for x in range(3):
            a, b = t[x], t[(x + 1) % 3]
            nbrs[a].add(b)
            nbrs[b].add(a)
    nbrs = [sorted(s) for s in nbrs]
    v = [list(p) for p in vertices]
    for _ in range(iterations):
        for factor in (lam, mu):
            nxt = []
            for i, p in enumerate(v):
                avg = [sum(v[j][d] for j in nbrs[i]) / len(nbrs[i]) for d in range(3)]
                nxt.append([p[d] + factor * (avg[d] - p[d]) for d in range(3)])
            v = nxt
    return v


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--res", type=int, default=4, help="voxels per unit")
    parser.add_argument("--smooth", type=int, default=30, help="Taubin iterations")
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "assets" / "genus2.off")
    args = parser.parse_args()

    index = {}
    vertices = []
    triangles = []

    def vid(p):
        if p not in index:
            index[p] = len(vertices)
            vertices.append(p)
        return index[p]

    for q in boundary_quads(args.res):
        a, b, c, d = (vid(p) for p in q)
        triangles.append((a, b, c))
        triangles.append((a, c, d))

    smoothed = taubin(vertices, triangles, args.smooth)
    scale = 1.0 / args.res
    cx, cy, cz = SIZE[0] / 2, SIZE[1] / 2, SIZE[2] / 2
    with open(args.out, "w") as f:
        f.write("OFF\n%d %d 0\n" % (len(smoothed), len(triangles)))
        for p in smoothed:
            f.write("%.17g %.17g %.17g\n" % (p[0] * scale - cx, p[1] * scale - cy, p[2] * scale - cz))
        for t in triangles:
            f.write("3 %d %d %d\n" % t)

    edges = {tuple(sorted((t[x], t[(x + 1) % 3]))) for t in triangles for x in range(3)}
    print("V=%d E=%d F=%d chi=%d" % (len(smoothed), len(edges), len(triangles), len(smoothed) - len(edges) + len(triangles)))


if __name__ == "__main__":
    main()
