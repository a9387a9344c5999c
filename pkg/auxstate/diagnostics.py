"""Terminal rendering of errors: headline, location, the offending YAML line and notes."""
import difflib
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Tuple

from .harness.config import KEYS, ConfigLoadError, ConfigLoc


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    path: Optional[str] = None
    loc: Optional[ConfigLoc] = None
    source: str = ""
    notes: Tuple[str, ...] = ()

    def render(self) -> str:
        lines = [f"{self.kind}: {self.message}"]
        where = _where(self.path, self.loc)
        if where:
            lines.append(f"--> {where}")
        if self.loc is not None:
            lines.extend(_excerpt(self.source, self.loc))
        lines.extend(f"= note: {note}" for note in self.notes)
        return "\n".join(lines)


def _where(path: Optional[str], loc: Optional[ConfigLoc]) -> str:
    if loc is None:
        return path or ""
    position = f"{loc.line}:{loc.column}"
    return f"{path}:{position}" if path else position


def _excerpt(source: str, loc: ConfigLoc) -> List[str]:
    source_lines = source.splitlines()
    if not 1 <= loc.line <= len(source_lines):
        return []
    text = source_lines[loc.line - 1]
    gutter = str(loc.line)
    column = min(max(loc.column, 1) - 1, len(text))
    return [f"{gutter} | {text}", f"{' ' * len(gutter)} | {' ' * column}^"]


def suggest_key(key: str) -> Tuple[str, ...]:
    close = difflib.get_close_matches(key, list(KEYS), n=1)
    return (f"did you mean '{close[0]}'?",) if close else ()


def from_load_error(error: ConfigLoadError) -> Diagnostic:
    key, _, detail = error.message.partition(": ")
    notes = suggest_key(key) if detail == "unknown key" else ()
    return Diagnostic(error.kind, error.message, error.path, error.loc, error.source, notes)


def quantity_notes(values: Mapping[str, object]) -> Tuple[str, ...]:
    return tuple(f"{name} = {value}" for name, value in sorted(values.items()))


def render_diagnostic(
    kind: str,
    message: str,
    source: str = "",
    loc: Optional[ConfigLoc] = None,
    path: Optional[str] = None,
    notes: Iterable[str] = (),
) -> str:
    return Diagnostic(kind, message, path, loc, source, tuple(notes)).render()
