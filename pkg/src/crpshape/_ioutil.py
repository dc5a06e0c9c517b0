"""Serialization helpers: full-precision JSON and atomic file writes."""

import os
import tempfile


def fmt17(x):
    """Format a float as decimal with 17 significant digits (lossless for
    64-bit floats)."""
    return format(float(x), ".17g")


def dumps_json(obj, indent=None, _level=0):
    """Serialize to JSON with floats written at 17 significant digits.

    Supports dict / list / tuple / str / int / float / bool / None, which is
    all the file formats of this package need. Dict keys are emitted in
    insertion order so output is deterministic.
    """
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = "," if indent is None else ","
    if isinstance(obj, dict):
        items = [
            f"{pad}{dumps_json(str(k))}: {dumps_json(v, indent, _level + 1)}"
            for k, v in obj.items()
        ]
        return "{" + sep.join(items) + (end if items else "") + "}"
    if isinstance(obj, (list, tuple)):
        items = [f"{pad}{dumps_json(v, indent, _level + 1)}" for v in obj]
        return "[" + sep.join(items) + (end if items else "") + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int,)):
        return str(obj)
    if isinstance(obj, float):
        return fmt17(obj)
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    raise TypeError(f"not JSON-serializable here: {type(obj)!r}")


def atomic_write_text(path, text):
    """Write text to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
