"""ASCII MEDIT ``.mesh`` reader and writer.

Supported sections: ``MeshVersionFormatted``, ``Dimension`` (must be 3),
``Vertices`` (the per-vertex reference field becomes the vertex label),
``Tetrahedra``, and optional ``Triangles``/``Edges``/``Corners``/
``RequiredVertices``/``Ridges`` which are parsed and ignored. Indices are
1-based in the file. Coordinates are written with 17 significant digits so
that ``load_medit(save_medit(mesh))`` round-trips bit-identically.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .errors import ParseError
from .mesh import TetMesh

# sections parsed but not stored: name -> ints per row (after the count line)
_SKIPPED_SECTIONS = {
    "Triangles": 4,
    "Edges": 3,
    "Corners": 1,
    "RequiredVertices": 1,
    "Ridges": 1,
}


class _Tokens:
    def __init__(self, text: str):
        lines = []
        for line in text.splitlines():
            hash_pos = line.find("#")
            if hash_pos >= 0:
                line = line[:hash_pos]
            lines.append(line)
        self._tokens = " ".join(lines).split()
        self._pos = 0

    def peek(self) -> str | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of file")
        self._pos += 1
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next()
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected integer {what}, got {tok!r}") from None

    def next_float(self, what: str) -> float:
        tok = self.next()
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected number {what}, got {tok!r}") from None


def load_medit(stream) -> TetMesh:
    """Parse a MEDIT mesh from a text stream, file path, or string.

    Tets are re-oriented to positive volume by the :class:`TetMesh`
    constructor. Raises :class:`ParseError` for malformed content,
    :class:`IndexError` for out-of-range vertex indices, and
    :class:`DegenerateError` for near-zero tet volumes.
    """
    if hasattr(stream, "read"):
        text = stream.read()
    else:
        text = str(stream)
        if "\n" not in text and (text.strip().endswith(".mesh")
                                 or os.path.exists(text)):
            with open(text, "r", encoding="ascii") as fh:
                text = fh.read()
    toks = _Tokens(text)

    vertices = None
    labels = None
    tets = None
    while True:
        tok = toks.peek()
        if tok is None:
            break
        toks.next()
        if tok == "MeshVersionFormatted":
            toks.next_int("mesh version")
        elif tok == "Dimension":
            dim = toks.next_int("dimension")
            if dim != 3:
                raise ParseError(f"only dimension 3 is supported, got {dim}")
        elif tok == "Vertices":
            count = toks.next_int("vertex count")
            vertices = np.empty((count, 3))
            labels = np.empty(count, dtype=np.int64)
            for i in range(count):
                for a in range(3):
                    vertices[i, a] = toks.next_float(f"coordinate of vertex {i + 1}")
                labels[i] = toks.next_int(f"reference of vertex {i + 1}")
        elif tok == "Tetrahedra":
            count = toks.next_int("tet count")
            tets = np.empty((count, 4), dtype=np.int64)
            for i in range(count):
                for a in range(4):
                    tets[i, a] = toks.next_int(f"index of tet {i + 1}") - 1
                toks.next_int(f"reference of tet {i + 1}")
        elif tok in _SKIPPED_SECTIONS:
            width = _SKIPPED_SECTIONS[tok]
            count = toks.next_int(f"{tok} count")
            for _ in range(count * width):
                toks.next_int(f"{tok} entry")
        elif tok == "End":
            break
        else:
            raise ParseError(f"unknown section {tok!r}")

    if vertices is None:
        raise ParseError("missing Vertices section")
    if tets is None:
        raise ParseError("missing Tetrahedra section")
    if tets.size and (tets.min() < 0 or tets.max() >= len(vertices)):
        raise IndexError("tet references a vertex outside the Vertices section")
    if not np.any(labels):
        labels = None
    return TetMesh(vertices, tets, labels)


def save_medit(mesh: TetMesh, stream=None) -> str | None:
    """Write the mesh in ASCII MEDIT format.

    Returns the text when ``stream`` is None, otherwise writes to the stream
    (or file path) and returns None.
    """
    out = io.StringIO()
    out.write("MeshVersionFormatted 2\n")
    out.write("Dimension 3\n")
    out.write(f"Vertices\n{mesh.n_vertices}\n")
    labels = mesh.labels_or_zeros()
    for p, ref in zip(mesh.vertices, labels):
        out.write(f"{p[0]:.16e} {p[1]:.16e} {p[2]:.16e} {ref}\n")
    out.write(f"Tetrahedra\n{mesh.n_tets}\n")
    for tet in mesh.tets:
        out.write(f"{tet[0] + 1} {tet[1] + 1} {tet[2] + 1} {tet[3] + 1} 0\n")
    out.write("End\n")
    text = out.getvalue()
    if stream is None:
        return text
    if hasattr(stream, "write"):
        stream.write(text)
    else:
        with open(stream, "w", encoding="ascii") as fh:
            fh.write(text)
    return None
