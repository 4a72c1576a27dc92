"""Model config documents: TOML in, TOML out.

A config is a restricted structured text document with the sections
`dimensions`, `amplification.<i>`, `selfsignal.<i>`, `outer.<i>`,
`input.<i>`, the arrays `coupling_c` / `coupling_d`, and `initial`.
Expressions are ASCII strings in the expression language (`^` is power,
`pi`/`e` predefined).  The serializer is deterministic so shipped configs
round-trip to structurally identical model specs.
"""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .exprlang import print_expr
from .model import (
    InitialCondition,
    ModelError,
    ModelSpec,
    build_initials,
    build_model,
    kernel_to_document,
)

__all__ = [
    "parse_document",
    "load_document",
    "load_model",
    "model_to_document",
    "document_to_toml",
]


def parse_document(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"config is not valid TOML: {exc}") from None


def load_document(path: str | Path) -> dict:
    return parse_document(Path(path).read_text(encoding="utf-8"))


def load_model(path: str | Path) -> tuple[ModelSpec, tuple[InitialCondition, ...]]:
    doc = load_document(path)
    spec = build_model(doc)
    return spec, build_initials(doc, spec.n)


# ---------------------------------------------------------------------------
# ModelSpec -> document -> TOML

def model_to_document(spec: ModelSpec,
                      initials: tuple[InitialCondition, ...] = ()) -> dict:
    doc: dict = {"dimensions": {"n": spec.n, "P": spec.P}}
    doc["amplification"] = {
        str(i + 1): {
            "expr": print_expr(amp.a),
            "a_lo": amp.a_lo,
            "a_hi": amp.a_hi,
            "A_expr": print_expr(amp.A),
        }
        for i, amp in enumerate(spec.amplification)
    }
    doc["selfsignal"] = {}
    for i, sig in enumerate(spec.self_signal):
        entry = {"expr": print_expr(sig.b), "beta_expr": print_expr(sig.beta)}
        if sig.beta_star is not None:
            entry["beta_star_expr"] = print_expr(sig.beta_star)
        doc["selfsignal"][str(i + 1)] = entry
    doc["outer"] = {
        str(i + 1): {"F_expr": print_expr(out.F), "zeta": out.zeta, "sigma": out.sigma}
        for i, out in enumerate(spec.outer)
    }
    doc["input"] = {
        str(i + 1): {"expr": print_expr(e)} for i, e in enumerate(spec.inputs)
    }
    if spec.couplings_c:
        doc["coupling_c"] = [
            {
                "i": t.i + 1, "j": t.j + 1, "l": t.l + 1, "p": t.p + 1,
                "c_expr": print_expr(t.c),
                "h_expr": print_expr(t.h),
                "gamma1": t.gamma1, "gamma2": t.gamma2,
                "tau_expr": print_expr(t.tau.tau),
                "tau_tilde_expr": print_expr(t.tau_tilde.tau),
            }
            for t in spec.couplings_c
        ]
    if spec.couplings_d:
        doc["coupling_d"] = [
            {
                "i": t.i + 1, "j": t.j + 1, "l": t.l + 1, "p": t.p + 1,
                "d_expr": print_expr(t.d),
                "f_expr": print_expr(t.f),
                "mu1": t.mu1, "mu2": t.mu2,
                "g_expr": print_expr(t.g),
                "g_tilde_expr": print_expr(t.g_tilde),
                "xi": t.xi, "xi_tilde": t.xi_tilde,
                "kernel": kernel_to_document(t.kernel),
                "kernel_tilde": kernel_to_document(t.kernel_tilde),
            }
            for t in spec.couplings_d
        ]
    if initials:
        doc["initial"] = [
            {"phi": [print_expr(e) for e in ic.phi], "bound": ic.bound}
            for ic in initials
        ]
    return doc


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        if any(ch in value for ch in '"\\\n'):
            raise ModelError(f"cannot serialize string with quotes/escapes: {value!r}")
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items())
        return "{" + inner + "}"
    raise ModelError(f"cannot serialize config value of type {type(value)}")


def document_to_toml(doc: dict) -> str:
    """Deterministic TOML emission of a config document."""
    lines: list[str] = []

    def table(header: str, entries: dict):
        lines.append(f"[{header}]")
        for key, value in entries.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")

    table("dimensions", doc["dimensions"])
    for section in ("amplification", "selfsignal", "outer", "input"):
        sub = doc.get(section, {})
        for idx in sorted(sub, key=int):
            table(f"{section}.{idx}", sub[idx])
    for section in ("coupling_c", "coupling_d", "initial"):
        for entry in doc.get(section, []):
            lines.append(f"[[{section}]]")
            for key, value in entry.items():
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
    return "\n".join(lines)
