"""Class index records and the line-oriented stub library format.

One signature per line::

    Charset#defaultCharset()->Charset,static
    Charset#forName(String charsetName)->Charset,static
    ListView#setSelection(int position)->void
    Charset

A method named like its class is a constructor and may omit ``->Ret``. A
bare class name declares a class with no listed members. Blank lines and
lines starting with ``//`` are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from codewire.errors import InputError
from codewire.syntax.nodes import TypeRef

_IDENT = re.compile(r"[A-Za-z_$][\w$]*$")
_CLASS_LINE = re.compile(r"[A-Za-z_$][\w$.]*$")


@dataclass(frozen=True)
class MethodSig:
    name: str
    return_type: TypeRef
    static: bool = False
    param_types: tuple[TypeRef, ...] = ()
    param_names: tuple[str | None, ...] = ()
    constructor: bool = False

    @property
    def arity(self) -> int:
        return len(self.param_types)

    def render(self) -> str:
        params = ", ".join(
            f"{t.name} {n}" if n else t.name for t, n in zip(self.param_types, self.param_names)
        )
        flag = ", static" if self.static else ""
        return f"{self.name}({params}) -> {self.return_type.name}{flag}"


@dataclass
class ClassInfo:
    name: str
    source: str  # "unit", "project", "stubs" or "builtin"
    methods: list[MethodSig] = field(default_factory=list)
    fields: dict[str, TypeRef] = field(default_factory=dict)
    static_fields: set[str] = field(default_factory=set)

    def methods_named(self, name: str, arity: int | None = None) -> list[MethodSig]:
        return [
            m for m in self.methods
            if m.name == name and not m.constructor and (arity is None or m.arity == arity)
        ]

    def constructors(self, arity: int | None = None) -> list[MethodSig]:
        return [m for m in self.methods if m.constructor and (arity is None or m.arity == arity)]


@dataclass
class StubLibrary:
    classes: dict[str, ClassInfo] = field(default_factory=dict)

    def merge(self, other: StubLibrary) -> StubLibrary:
        """Return a library holding both.

        Signatures in ``self`` replace those in ``other`` with the same name
        and arity; everything else from ``other`` is kept.
        """
        merged = {name: ClassInfo(info.name, info.source, list(info.methods)) for name, info in other.classes.items()}
        for name, info in self.classes.items():
            base = merged.get(name)
            if base is None:
                merged[name] = ClassInfo(info.name, info.source, list(info.methods))
                continue
            overridden = {(m.name, m.arity) for m in info.methods}
            kept = [m for m in base.methods if (m.name, m.arity) not in overridden]
            merged[name] = ClassInfo(name, info.source, list(info.methods) + kept)
        return StubLibrary(merged)

    def __len__(self) -> int:
        return len(self.classes)


def split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside angle brackets and parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "<(":
            depth += 1
        elif ch in ">)":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def _parse_param(raw: str, where: str) -> tuple[TypeRef, str | None]:
    raw = raw.strip()
    # "Type name": the last word is a name only when what precedes it is a complete type.
    head, _, tail = raw.rpartition(" ")
    if head and _IDENT.match(tail) and head.count("<") == head.count(">"):
        return TypeRef(head.replace(" ", "")), tail
    if not raw:
        raise InputError(f"{where}: empty parameter type")
    return TypeRef(raw.replace(" ", "")), None


def parse_stub_line(line: str, where: str = "<stubs>") -> tuple[str, MethodSig | None]:
    line = line.strip()
    if "#" not in line:
        if not _CLASS_LINE.match(line):
            raise InputError(f"{where}: malformed stub line {line!r}")
        return line.rsplit(".", 1)[-1], None
    owner, _, rest = line.partition("#")
    owner = owner.strip().rsplit(".", 1)[-1]
    open_paren = rest.find("(")
    close_paren = rest.rfind(")")
    if not _IDENT.match(owner) or open_paren <= 0 or close_paren < open_paren:
        raise InputError(f"{where}: malformed stub line {line!r}")
    name = rest[:open_paren].strip()
    if not _IDENT.match(name):
        raise InputError(f"{where}: bad method name in {line!r}")
    params_text = rest[open_paren + 1 : close_paren].strip()
    params = [_parse_param(p, where) for p in split_top_level(params_text)] if params_text else []
    tail = rest[close_paren + 1 :].strip()
    constructor = name == owner
    flags: list[str] = []
    if tail.startswith("->"):
        ret_and_flags = split_top_level(tail[2:])
        ret_text, flags = ret_and_flags[0], ret_and_flags[1:]
        if not ret_text:
            raise InputError(f"{where}: missing return type in {line!r}")
        return_type = TypeRef(ret_text.replace(" ", ""))
    elif constructor:
        flags = [f.strip() for f in tail.lstrip(",").split(",")] if tail else []
        return_type = TypeRef(owner)
    else:
        raise InputError(f"{where}: missing '->ReturnType' in {line!r}")
    unknown_flags = [f for f in flags if f and f != "static"]
    if unknown_flags:
        raise InputError(f"{where}: unknown flag(s) {unknown_flags} in {line!r}")
    sig = MethodSig(
        name=name,
        return_type=return_type,
        static="static" in flags,
        param_types=tuple(t for t, _ in params),
        param_names=tuple(n for _, n in params),
        constructor=constructor,
    )
    return owner, sig


def parse_stubs(text: str, source: str = "stubs", where: str = "<stubs>") -> StubLibrary:
    lib = StubLibrary()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("//"):
            continue
        owner, sig = parse_stub_line(stripped, f"{where}:{lineno}")
        info = lib.classes.setdefault(owner, ClassInfo(owner, source))
        if sig is not None:
            info.methods.append(sig)
    return lib


def load_stubs(path: str | Path) -> StubLibrary:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read stub library {path}: {exc}") from exc
    return parse_stubs(text, "stubs", str(path))


def builtin_stubs() -> StubLibrary:
    text = resources.files("codewire.syntax").joinpath("data/java_lang.stubs").read_text(encoding="utf-8")
    return parse_stubs(text, "builtin", "<builtin>")
