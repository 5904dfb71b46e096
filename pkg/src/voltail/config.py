"""Plain-text run configuration: ``[section]`` headers and ``key=value`` pairs.

Several pairs may share a line when separated by commas, e.g.
``[vol] kind=local-dip, sigma0=0.3``; a comma piece without ``=`` continues
the previous value, so ``y-grid=0,0.5,1`` is a list. ``#`` starts a comment. Keys are
flattened across sections (dashes become underscores) since every key maps
to one command-line option; a key repeated in two sections is an error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Tuple

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = "<config>"):
        where = f"{source}:{line}:{column}: " if line else f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass
class RunConfig:
    sections: Dict[str, Dict[str, str]] = field(default_factory=dict)
    origin: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    source: str = "<config>"

    def flat(self) -> Dict[str, str]:
        out: Dict[str, str] = {}
        for sec in self.sections.values():
            out.update(sec)
        return out


def _split_pairs(body: str, offset: int):
    """Split on commas that are outside parentheses; yield (text, column0)."""
    depth, start = 0, 0
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            yield body[start:i], offset + start
            start = i + 1
    yield body[start:], offset + start


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig(source=source)
    section = "run"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        body = line.strip()
        if body.startswith("["):
            end = body.find("]")
            if end < 0:
                raise ConfigError("unterminated section header", lineno, col, source)
            name = body[1:end].strip()
            if not _KEY.fullmatch(name):
                raise ConfigError(f"bad section name {name!r}", lineno, col + 1, source)
            section = name
            cfg.sections.setdefault(section, {})
            rest = body[end + 1:]
            if not rest.strip():
                continue
            body, col = rest, col + end + 1
        last = None
        for piece, c0 in _split_pairs(body, col - 1):
            if not piece.strip():
                raise ConfigError("empty entry", lineno, c0 + 1, source)
            lead = len(piece) - len(piece.lstrip())
            pcol = c0 + lead + 1
            if "=" not in piece and last is not None:
                cfg.sections[section][last] += "," + piece.strip()
                continue
            if "=" not in piece:
                raise ConfigError(f"expected key=value, found {piece.strip()!r}", lineno, pcol, source)
            key, value = piece.split("=", 1)
            key = key.strip()
            if not _KEY.fullmatch(key):
                raise ConfigError(f"bad key {key!r}", lineno, pcol, source)
            value = value.strip()
            if not value:
                raise ConfigError(f"missing value for {key!r}", lineno, pcol + len(piece.strip().split("=")[0]) + 1, source)
            dest = key.replace("-", "_")
            if dest in cfg.origin:
                first = cfg.origin[dest]
                raise ConfigError(f"duplicate key {key!r} (first set at line {first[0]})", lineno, pcol, source)
            cfg.sections.setdefault(section, {})[dest] = value
            cfg.origin[dest] = (lineno, pcol)
            last = dest
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=path) from exc
    return parse_config(text, source=path)
