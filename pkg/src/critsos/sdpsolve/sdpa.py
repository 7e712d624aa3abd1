"""SDPA sparse (``.dat-s``) export and import.

SDPA's dual form ``max <F0, Y> s.t. <F_i, Y> = c_i, Y PSD`` matches the
maximisation form of :class:`SdpProblem`.  SDPA has no free variables, so
each free ``u_k`` is written as ``u_k+ - u_k-`` on a trailing diagonal
block of size ``2k`` (``u_k+`` at position ``2k-1``, ``u_k-`` at ``2k``).

Labels travel in ``*`` comment lines so that :func:`import_sdpa` can rebuild
the original problem, including which diagonal block is the free split.
"""

from __future__ import annotations

import re

import numpy as np

from .problem import SdpProblem

_NUM = "{:.17g}"


def _fmt(v: float) -> str:
    s = _NUM.format(float(v))
    return "0" if s == "-0" else s


def export_sdpa(sdp: SdpProblem) -> str:
    sdp.validate()
    m = sdp.num_rows
    k = sdp.num_free
    nb = len(sdp.block_dims)
    split = nb + 1 if k else None

    lines = ["* SDPA sparse format (maximise <F0,Y> s.t. <Fi,Y> = ci, Y PSD)"]
    for i, (label, dim) in enumerate(zip(sdp.block_labels, sdp.block_dims), 1):
        lines.append(f"* block {i}: {label} (dim {dim})")
    if split:
        lines.append(f"* free-split block: {split}")
        for j, label in enumerate(sdp.free_labels, 1):
            lines.append(f"* free {j}: {label}")
    for i, label in enumerate(sdp.row_labels, 1):
        lines.append(f"* constraint {i}: {label}")

    sizes = [str(d) for d in sdp.block_dims] + ([str(-2 * k)] if split else [])
    lines.append(str(m))
    lines.append(str(len(sizes)))
    lines.append(" ".join(sizes))
    lines.append(" ".join(_fmt(v) for v in sdp.b))

    def block_entries(matno: int, mats, free_col):
        out = []
        for blk, mat in enumerate(mats, 1):
            iu, ju = np.nonzero(np.triu(mat))
            for i, j in zip(iu, ju):
                out.append(f"{matno} {blk} {i + 1} {j + 1} {_fmt(mat[i, j])}")
        if split:
            for j, v in enumerate(free_col, 1):
                if v != 0:
                    out.append(f"{matno} {split} {2 * j - 1} {2 * j - 1} {_fmt(v)}")
                    out.append(f"{matno} {split} {2 * j} {2 * j} {_fmt(-v)}")
        return out

    lines.extend(block_entries(0, sdp.C, sdp.c))
    for i in range(m):
        lines.extend(block_entries(i + 1, [a[i] for a in sdp.A], sdp.F[i] if k else []))
    return "\n".join(lines) + "\n"


class SdpaFormatError(ValueError):
    pass


def parse_sdpa(text: str) -> dict:
    """Raw SDPA content: ``m``, ``sizes``, ``c`` and ``entries`` (list of tuples)."""
    comments = []
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(("*", '"')):
            comments.append(stripped[1:].strip())
        elif stripped:
            body.append(stripped)
    if not body:
        raise SdpaFormatError("empty SDPA document")
    tokens_by_line = [re.sub(r"[,{}()]", " ", ln).split() for ln in body]
    try:
        m = int(tokens_by_line[0][0])
        nblocks = int(tokens_by_line[1][0])
        pos = 2
        sizes: list = []
        while len(sizes) < nblocks:
            sizes.extend(int(float(t)) for t in tokens_by_line[pos])
            pos += 1
        cvec: list = []
        while len(cvec) < m:
            cvec.extend(float(t) for t in tokens_by_line[pos])
            pos += 1
        entries = []
        for toks in tokens_by_line[pos:]:
            if not toks:
                continue
            matno, blk, i, j = (int(t) for t in toks[:4])
            entries.append((matno, blk, i, j, float(toks[4])))
    except (IndexError, ValueError) as exc:
        raise SdpaFormatError(f"malformed SDPA document: {exc}") from exc
    return {"m": m, "sizes": sizes, "c": cvec, "entries": entries, "comments": comments}


def import_sdpa(text: str) -> SdpProblem:
    """Rebuild an :class:`SdpProblem`; inverse of :func:`export_sdpa`."""
    raw = parse_sdpa(text)
    m, sizes = raw["m"], raw["sizes"]
    split = None
    block_labels: dict = {}
    free_labels: dict = {}
    row_labels: dict = {}
    for cm in raw["comments"]:
        if mt := re.match(r"free-split block:\s*(\d+)$", cm):
            split = int(mt.group(1))
        elif mt := re.match(r"block (\d+):\s*(.*) \(dim \d+\)$", cm):
            block_labels[int(mt.group(1))] = mt.group(2)
        elif mt := re.match(r"free (\d+):\s*(.*)$", cm):
            free_labels[int(mt.group(1))] = mt.group(2)
        elif mt := re.match(r"constraint (\d+):\s*(.*)$", cm):
            row_labels[int(mt.group(1))] = mt.group(2)

    # map SDPA blocks to (our block index, offset); LP blocks become 1x1 blocks
    layout = {}
    dims: list = []
    labels: list = []
    for blk, size in enumerate(sizes, 1):
        if blk == split:
            continue
        if size > 0:
            layout[blk] = [len(dims)]
            dims.append(size)
            labels.append(block_labels.get(blk, f"block{blk}"))
        else:
            layout[blk] = list(range(len(dims), len(dims) - size))
            dims.extend([1] * -size)
            labels.extend(f"block{blk}[{t + 1}]" for t in range(-size))
    nfree = -sizes[split - 1] // 2 if split else 0

    A = [np.zeros((m, d, d)) for d in dims]
    C = [np.zeros((d, d)) for d in dims]
    F = np.zeros((m, nfree))
    c = np.zeros(nfree)
    for matno, blk, i, j, v in raw["entries"]:
        if blk == split:
            if i != j:
                raise SdpaFormatError("off-diagonal entry in the free-split block")
            if i % 2 == 0:
                continue  # negative half of the pair; mirrored from the positive half
            kk = (i - 1) // 2
            if matno == 0:
                c[kk] = v
            else:
                F[matno - 1, kk] = v
            continue
        if sizes[blk - 1] < 0:
            if i != j:
                raise SdpaFormatError("off-diagonal entry in a diagonal block")
            target, ii, jj = layout[blk][i - 1], 0, 0
        else:
            target, ii, jj = layout[blk][0], i - 1, j - 1
        mat = C[target] if matno == 0 else A[target][matno - 1]
        mat[ii, jj] = v
        mat[jj, ii] = v
    return SdpProblem(
        block_labels=labels,
        block_dims=dims,
        free_labels=[free_labels.get(t + 1, f"u{t + 1}") for t in range(nfree)],
        A=A,
        F=F,
        b=np.array(raw["c"][:m]),
        c=c,
        C=C,
        row_labels=[row_labels.get(t + 1, f"row{t + 1}") for t in range(m)],
    )
